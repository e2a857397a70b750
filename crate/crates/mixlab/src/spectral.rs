//! Mixing-time functionals of finite chains.
//!
//! ```text
//! t_mix(eps) = min { t >= 0 : d(t) <= eps }          (eps defaults to 1/4)
//! t_sep(eps) = min { t >= 0 : s(t) <= eps }
//! t_rel      = 1 / (1 - lambda_2)
//! t_hit      = max_{x,y} E_x[tau_y]
//! t_cov      = max_x E_x[tau_cov]
//! ```
//!
//! Spectra of reversible chains come from the symmetrization
//! `D^(1/2) P D^(-1/2)` (dense solver below a size threshold, Lanczos with
//! full reorthogonalization above it). Cover times are exact up to 14
//! vertices via the position x visited-set chain, whose visited sets only
//! grow: the system is block-triangular and is solved stratum by stratum.
//! Natural logarithms are used throughout.

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chain::{DistanceScan, FiniteChain, ITER_TOL};
use crate::error::{MixError, Result};
use crate::linalg;

/// Default threshold `eps = 1/4` for mixing and separation times.
pub const DEFAULT_EPS: f64 = 0.25;

/// Chains above this size use Lanczos instead of a dense eigensolver.
const DENSE_SPECTRUM_CAP: usize = 700;

/// Spectrum summary of a reversible chain.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    /// All eigenvalues, descending; present only on the dense path.
    pub eigenvalues: Vec<f64>,
    /// Second largest eigenvalue.
    pub lambda2: f64,
    /// Largest modulus among eigenvalues other than the top one.
    pub lambda_star: f64,
    /// Relaxation time `1 / (1 - lambda2)`.
    pub t_rel: f64,
}

/// Full spectrum of a reversible chain via the dense symmetric eigensolver.
pub fn spectrum(chain: &FiniteChain) -> Result<SpectralSummary> {
    if !chain.is_reversible() {
        return Err(MixError::Unsupported(
            "spectra are computed for reversible chains only".into(),
        ));
    }
    let n = chain.n_states();
    if n > DENSE_SPECTRUM_CAP {
        return Err(MixError::SizeCap(format!(
            "dense spectrum capped at {DENSE_SPECTRUM_CAP} states; use lambda2_sparse"
        )));
    }
    let pi = chain.stationary()?;
    let mut s = DMatrix::zeros(n, n);
    for x in 0..n {
        for (y, p) in chain.matrix().row(x) {
            s[(x, y)] = p * (pi[x] / pi[y]).sqrt();
        }
    }
    // Clean the symmetrization to exact symmetry before the eigensolve.
    let st = s.transpose();
    let sym = (s + st) * 0.5;
    let ev = linalg::symmetric_eigenvalues_desc(sym);
    summary_from_eigenvalues(ev)
}

fn summary_from_eigenvalues(ev: Vec<f64>) -> Result<SpectralSummary> {
    if (ev[0] - 1.0).abs() > 1e-8 {
        return Err(MixError::ClaimViolation(format!(
            "top eigenvalue {} is not 1",
            ev[0]
        )));
    }
    let lambda2 = if ev.len() > 1 { ev[1] } else { 0.0 };
    let lambda_star = ev.iter().skip(1).map(|l| l.abs()).fold(0.0_f64, f64::max);
    if 1.0 - lambda2 < 1e-13 {
        return Err(MixError::Singular(
            "unit second eigenvalue: chain is reducible".into(),
        ));
    }
    Ok(SpectralSummary {
        t_rel: 1.0 / (1.0 - lambda2),
        eigenvalues: ev,
        lambda2,
        lambda_star,
    })
}

/// Second eigenvalue of a large sparse reversible chain by Lanczos with
/// full reorthogonalization, deflating the known top eigenvector
/// `sqrt(pi)`.
pub fn lambda2_sparse(chain: &FiniteChain, iters: usize, seed: u64) -> Result<f64> {
    if !chain.is_reversible() {
        return Err(MixError::Unsupported(
            "lambda2_sparse needs a reversible chain".into(),
        ));
    }
    let n = chain.n_states();
    let pi = chain.stationary()?;
    let sqrt_pi: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    let inv_sqrt_pi: Vec<f64> = sqrt_pi.iter().map(|s| 1.0 / s).collect();
    let mat = chain.matrix();
    let apply = |v: &[f64], out: &mut [f64]| {
        // S v = D^(1/2) P D^(-1/2) v, applied with two diagonal scalings.
        let scaled_in: Vec<f64> = v.iter().zip(&inv_sqrt_pi).map(|(x, i)| x * i).collect();
        mat.mul_col_into(&scaled_in, out);
        for (o, s) in out.iter_mut().zip(&sqrt_pi) {
            *o *= s;
        }
    };
    let ritz = linalg::lanczos_top_deflated(n, apply, &sqrt_pi, 1, iters, seed)?;
    Ok(ritz[0])
}

/// Relaxation time, choosing the dense or sparse path by size.
pub fn t_rel(chain: &FiniteChain) -> Result<f64> {
    if chain.n_states() <= DENSE_SPECTRUM_CAP {
        Ok(spectrum(chain)?.t_rel)
    } else {
        let lambda2 = lambda2_sparse(chain, 400, 0x6c616e63)?;
        if 1.0 - lambda2 < 1e-13 {
            return Err(MixError::Singular("unit second eigenvalue".into()));
        }
        Ok(1.0 / (1.0 - lambda2))
    }
}

fn scan_first_below(
    mut value: impl FnMut(&DistanceScan) -> Result<f64>,
    scan: &mut DistanceScan,
    eps: f64,
    t_cap: u64,
    what: &str,
) -> Result<u64> {
    // The literal definition: smallest t with the functional <= eps, found
    // by a forward scan (monotonicity is not assumed).
    loop {
        if value(scan)? <= eps {
            return Ok(scan.t());
        }
        if scan.t() >= t_cap {
            return Err(MixError::NoConvergence {
                what: what.into(),
                cap: t_cap,
            });
        }
        scan.step();
    }
}

/// Mixing time `t_mix(eps)` by exact forward scan of `d(t)`.
pub fn t_mix(chain: &FiniteChain, eps: f64, t_cap: u64) -> Result<u64> {
    let mut scan = DistanceScan::all_starts(chain);
    scan_first_below(|s| s.d(), &mut scan, eps, t_cap, "t_mix")
}

/// Mixing time scanned from a single start; use only on chains whose
/// automorphisms act transitively on states (all `d_x` coincide).
pub fn t_mix_transitive(chain: &FiniteChain, eps: f64, t_cap: u64) -> Result<u64> {
    let mut scan = DistanceScan::single_start(chain, 0);
    scan_first_below(|s| s.d(), &mut scan, eps, t_cap, "t_mix")
}

/// Separation time `t_sep(eps)` by exact forward scan of `s(t)`.
pub fn t_sep(chain: &FiniteChain, eps: f64, t_cap: u64) -> Result<u64> {
    let mut scan = DistanceScan::all_starts(chain);
    scan_first_below(|s| s.sep(), &mut scan, eps, t_cap, "t_sep")
}

/// Single-start variant of `t_sep` for transitive chains.
pub fn t_sep_transitive(chain: &FiniteChain, eps: f64, t_cap: u64) -> Result<u64> {
    let mut scan = DistanceScan::single_start(chain, 0);
    scan_first_below(|s| s.sep(), &mut scan, eps, t_cap, "t_sep")
}

/// Table of expected hitting times `E_x[tau_y]` for all ordered pairs.
#[derive(Debug, Clone)]
pub struct HittingTable {
    /// `expected[x][y] = E_x[tau_y]`, zero on the diagonal.
    pub expected: Vec<Vec<f64>>,
}

impl HittingTable {
    /// `t_hit = max_{x,y} E_x[tau_y]`.
    pub fn t_hit(&self) -> f64 {
        self.expected.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// Solve for all pairwise expected hitting times: for each target `y`,
/// `(I - P restricted off y) h = 1` by dense LU.
pub fn hitting_times(chain: &FiniteChain) -> Result<HittingTable> {
    let n = chain.n_states();
    if n > 2048 {
        return Err(MixError::SizeCap(
            "hitting table capped at 2048 states".into(),
        ));
    }
    let mut expected = vec![vec![0.0; n]; n];
    for y in 0..n {
        let others: Vec<usize> = (0..n).filter(|&x| x != y).collect();
        let m = others.len();
        let mut a = DMatrix::zeros(m, m);
        for (i, &x) in others.iter().enumerate() {
            a[(i, i)] += 1.0;
            for (z, p) in chain.matrix().row(x) {
                if z == y {
                    continue;
                }
                let j = if z < y { z } else { z - 1 };
                a[(i, j)] -= p;
            }
        }
        let b = DVector::from_element(m, 1.0);
        let h = linalg::lu_solve(a, b).map_err(|_| {
            MixError::Singular("hitting-time system singular (chain reducible?)".into())
        })?;
        for (i, &x) in others.iter().enumerate() {
            expected[x][y] = h[i];
        }
    }
    Ok(HittingTable { expected })
}

/// Expected time to hit a set of target states, from every start.
/// Targets get 0; the system over the complement must be nonsingular.
pub fn expected_hitting_time_to_set(chain: &FiniteChain, targets: &[usize]) -> Result<Vec<f64>> {
    let n = chain.n_states();
    let is_target: Vec<bool> = {
        let mut v = vec![false; n];
        for &t in targets {
            v[t] = true;
        }
        v
    };
    let others: Vec<usize> = (0..n).filter(|&x| !is_target[x]).collect();
    let mut pos = vec![usize::MAX; n];
    for (i, &x) in others.iter().enumerate() {
        pos[x] = i;
    }
    let m = others.len();
    let mut a = DMatrix::zeros(m, m);
    for (i, &x) in others.iter().enumerate() {
        a[(i, i)] += 1.0;
        for (z, p) in chain.matrix().row(x) {
            if !is_target[z] {
                a[(i, pos[z])] -= p;
            }
        }
    }
    let b = DVector::from_element(m, 1.0);
    let h =
        linalg::lu_solve(a, b).map_err(|_| MixError::Singular("hitting system singular".into()))?;
    let mut out = vec![0.0; n];
    for (i, &x) in others.iter().enumerate() {
        out[x] = h[i];
    }
    Ok(out)
}

/// Method for `cover_time`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverMethod {
    /// Exact solve on the `(position, visited set)` chain; needs `n <= 14`.
    Exact,
    /// Seeded Monte Carlo with the given number of runs per start.
    MonteCarlo { samples: u64, seed: u64 },
}

/// Cover time `t_cov = max_x E_x[tau_cov]`, exact or Monte Carlo.
/// Returns `(value, stderr)`; the exact method reports stderr 0.
pub fn cover_time(chain: &FiniteChain, method: CoverMethod) -> Result<(f64, f64)> {
    match method {
        CoverMethod::Exact => {
            let per_start = cover_time_exact_all_starts(chain)?;
            Ok((per_start.into_iter().fold(0.0, f64::max), 0.0))
        }
        CoverMethod::MonteCarlo { samples, seed } => {
            let n = chain.n_states();
            let mut best = (0.0f64, 0.0f64);
            for x in 0..n {
                let (mean, se) =
                    cover_time_mc_from(chain, x, samples, crate::walk::stream_seed(seed, x as u64));
                if mean > best.0 {
                    best = (mean, se);
                }
            }
            Ok(best)
        }
    }
}

/// Exact `E_x[tau_cov]` for every start, via stratified solves over the
/// visited-set lattice (visited sets only grow, so strata close upward).
pub fn cover_time_exact_all_starts(chain: &FiniteChain) -> Result<Vec<f64>> {
    let n = chain.n_states();
    if n > 14 {
        return Err(MixError::SizeCap(format!(
            "exact cover time capped at 14 states, got {n}"
        )));
    }
    let full: u32 = ((1u64 << n) - 1) as u32;
    // expectations[mask * n + x] = E[(x, mask)], valid when x in mask.
    let mut expectations = vec![0.0f64; (full as usize + 1) * n];
    // Masks ordered by descending popcount; the full mask is all zeros.
    let mut masks: Vec<u32> = (1..=full).collect();
    masks.sort_unstable_by_key(|m| std::cmp::Reverse(m.count_ones()));
    for mask in masks {
        if mask == full {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&x| mask >> x & 1 == 1).collect();
        let m = members.len();
        let mut pos = vec![usize::MAX; n];
        for (i, &x) in members.iter().enumerate() {
            pos[x] = i;
        }
        let mut a = DMatrix::zeros(m, m);
        let mut b = DVector::from_element(m, 1.0);
        for (i, &x) in members.iter().enumerate() {
            a[(i, i)] += 1.0;
            for (y, p) in chain.matrix().row(x) {
                if mask >> y & 1 == 1 {
                    a[(i, pos[y])] -= p;
                } else {
                    let grown = mask | (1 << y);
                    b[i] += p * expectations[grown as usize * n + y];
                }
            }
        }
        let h = linalg::lu_solve(a, b)
            .map_err(|_| MixError::Singular("cover stratum singular".into()))?;
        for (i, &x) in members.iter().enumerate() {
            expectations[mask as usize * n + x] = h[i];
        }
    }
    Ok((0..n)
        .map(|x| expectations[(1usize << x) * n + x])
        .collect())
}

fn cover_time_mc_from(chain: &FiniteChain, start: usize, samples: u64, seed: u64) -> (f64, f64) {
    let n = chain.n_states();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for run in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::walk::stream_seed(seed, run));
        let mut x = start;
        let mut visited: u64 = 1 << start;
        let full = (1u64 << n) - 1;
        let mut t = 0u64;
        while visited != full {
            x = chain.sample_step(x, &mut rng);
            visited |= 1 << x;
            t += 1;
        }
        sum += t as f64;
        sum_sq += (t as f64) * (t as f64);
    }
    let mean = sum / samples as f64;
    let var = (sum_sq / samples as f64 - mean * mean).max(0.0);
    (mean, (var / samples as f64).sqrt())
}

/// Exact tail `P_start[tau_cov > t]` for `t = 0..=t_max`, by evolving the
/// distribution of the `(position, visited set)` chain.
pub fn cover_tail_exact(chain: &FiniteChain, start: usize, t_max: u64) -> Result<Vec<f64>> {
    let n = chain.n_states();
    if n > 14 {
        return Err(MixError::SizeCap(
            "exact cover tail capped at 14 states".into(),
        ));
    }
    let full = (1usize << n) - 1;
    let dim = (full + 1) * n;
    let mut cur = vec![0.0f64; dim];
    cur[(1usize << start) * n + start] = 1.0;
    let mut next = vec![0.0f64; dim];
    let mut tail = Vec::with_capacity(t_max as usize + 1);
    let uncovered_mass = |v: &[f64]| -> f64 {
        let covered: f64 = v[full * n..].iter().sum();
        1.0 - covered
    };
    tail.push(uncovered_mass(&cur));
    for _ in 0..t_max {
        next.fill(0.0);
        for mask in 0..=full {
            for x in 0..n {
                let w = cur[mask * n + x];
                if w == 0.0 {
                    continue;
                }
                for (y, p) in chain.matrix().row(x) {
                    let grown = mask | (1 << y);
                    next[grown * n + y] += w * p;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        tail.push(uncovered_mass(&cur));
    }
    Ok(tail)
}

/// One row of the per-`t` spectral inequality report.
#[derive(Debug, Clone)]
pub struct SpectralIneqRow {
    pub t: u64,
    pub d: f64,
    pub s: f64,
    /// `lambda_star^t / pi_min`
    pub sep_upper: f64,
    /// `|lambda2|^t`
    pub lam2_pow: f64,
    /// `d(t)^(1/t)` (0 for t = 0)
    pub d_root: f64,
    pub violations: u64,
}

/// Verifies `d_x(t) <= s_x(t) <= lambda_star^t / pi_min` and
/// `|lambda2|^t <= 2 d(t)` for `t = 1..=t_max`, and reports the
/// convergence of `d(t)^(1/t)` toward `lambda_star`.
pub fn spectral_inequality_report(chain: &FiniteChain, t_max: u64) -> Result<Vec<SpectralIneqRow>> {
    let summary = spectrum(chain)?;
    let pi = chain.stationary()?;
    let pi_min = pi.iter().copied().fold(f64::INFINITY, f64::min);
    let mut scan = DistanceScan::all_starts(chain);
    let mut rows = Vec::with_capacity(t_max as usize);
    for t in 1..=t_max {
        scan.step();
        debug_assert_eq!(scan.t(), t);
        let d_per = scan.d_per_start()?;
        let s_per = scan.sep_per_start()?;
        let d = d_per.iter().copied().fold(0.0, f64::max);
        let s = s_per.iter().copied().fold(0.0, f64::max);
        let sep_upper = summary.lambda_star.powi(t as i32) / pi_min;
        let lam2_pow = summary.lambda2.abs().powi(t as i32);
        let mut violations = 0;
        for (dx, sx) in d_per.iter().zip(&s_per) {
            if dx > &(sx + ITER_TOL) || *sx > sep_upper + ITER_TOL {
                violations += 1;
            }
        }
        if lam2_pow > 2.0 * d + ITER_TOL {
            violations += 1;
        }
        rows.push(SpectralIneqRow {
            t,
            d,
            s,
            sep_upper,
            lam2_pow,
            d_root: if d > 0.0 { d.powf(1.0 / t as f64) } else { 0.0 },
            violations,
        });
    }
    Ok(rows)
}

/// A violated short-distance diagonal bound.
#[derive(Debug, Clone)]
pub struct ShortRangeViolation {
    pub x: usize,
    pub t: u64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Checks `|P^t(x,x) - pi(x)| <= sqrt(2) Delta^(5/2) / sqrt(t)` for every
/// state and `1 <= t <= t_max` on a lazy chain of maximal degree `Delta`.
pub fn short_range_check(
    chain: &FiniteChain,
    max_degree: usize,
    t_max: u64,
) -> Result<Vec<ShortRangeViolation>> {
    let pi = chain.stationary()?.to_vec();
    let mut scan = DistanceScan::all_starts(chain);
    let mut violations = Vec::new();
    let coeff = 2.0_f64.sqrt() * (max_degree as f64).powf(2.5);
    for t in 1..=t_max {
        scan.step();
        for (x, row) in scan.rows().iter().enumerate() {
            let lhs = (row[x] - pi[x]).abs();
            let rhs = coeff / (t as f64).sqrt();
            if lhs > rhs + ITER_TOL {
                violations.push(ShortRangeViolation { x, t, lhs, rhs });
            }
        }
    }
    Ok(violations)
}
