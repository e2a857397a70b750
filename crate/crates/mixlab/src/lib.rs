//! # mixlab
//!
//! A laboratory for random-walk analysis on finite chains and infinite
//! groups. Everything is exact where exactness is affordable (dense or
//! sparse matrix computation, closed forms, integer arithmetic) and seeded
//! Monte Carlo where it is not.
//!
//! ## Module map
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`chain`] | distributions, total variation in its equivalent forms, optimal couplings, the distance functionals `d(t)`, `dbar(t)`, `s(t)` |
//! | [`graphs`] | cycles, tori, hypercubes, trees, Cayley graphs, lazy walks, wreath-product (lamplighter) chains |
//! | [`spectral`] | spectra of reversible chains, mixing / separation / relaxation / hitting / cover times, spectral inequality sweeps |
//! | [`coupling`] | coupling simulators for cycles and tori, strong stationary times, halting states, the lamplighter stopping rules |
//! | [`longrange`] | Chebyshev functional calculus, the binomial-mixture identity for `P^t`, Gaussian long-range bounds, Bernstein tails |
//! | [`groups`] | walks on infinite groups: speed, exact distributions, entropy curves, the entropy--speed equivalences, lamplighter-group walks |
//! | [`geometry`] | Dirichlet forms, distance-moment lower bounds, diameter bounds on relaxation time, Foelner-set constructions |
//! | [`adapted`] | adapted lattice walks, excessive-measure and Lyapunov transience tests, covariance normalization |
//!
//! All randomized procedures take an explicit 64-bit seed and are
//! bit-reproducible for a fixed seed and crate version.

pub mod adapted;
pub mod chain;
pub mod coupling;
pub mod error;
pub mod geometry;
pub mod graphs;
pub mod groups;
pub mod linalg;
pub mod longrange;
pub mod numeric;
pub mod spectral;
pub mod walk;

pub use error::{MixError, Result};

// Matrix inputs and outputs across the public API use nalgebra types.
pub use nalgebra;
