//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by chain construction and the analysis routines.
#[derive(Debug, Error)]
pub enum MixError {
    /// Two objects that must share an index set (or dimension) do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A probability object failed its invariants (negative mass, bad row sum, ...).
    #[error("invalid probability data: {0}")]
    InvalidProbability(String),

    /// A quantity was requested outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An argument is outside the documented range.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A constructor's preconditions were violated (disconnected graph,
    /// non-symmetric generating set, non-reversible lamp chain, ...).
    #[error("construction error: {0}")]
    Construction(String),

    /// A configured state-space or work cap was exceeded.
    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    /// An iterative scan hit its step cap without converging.
    #[error("no convergence within {cap} steps: {what}")]
    NoConvergence { what: String, cap: u64 },

    /// The requested computation is not supported for this input.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A linear system was singular (typically a reducible chain).
    #[error("singular linear system: {0}")]
    Singular(String),

    /// A dyadic search ran past its horizon; carries diagnostics.
    #[error("search horizon exceeded: {0}")]
    Horizon(String),

    /// A claim that must hold for all valid inputs failed; indicates a bug
    /// or numerically pathological input, never expected in normal use.
    #[error("claim violation: {0}")]
    ClaimViolation(String),
}

pub type Result<T> = std::result::Result<T, MixError>;
