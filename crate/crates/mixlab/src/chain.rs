//! Probability measures on finite state spaces and the distance machinery
//! of finite Markov chains.
//!
//! Total variation comes in four equivalent forms (max over events, half
//! l1, positive part, optimal-coupling miss probability); this module
//! computes the half-l1 form and exposes the others for cross checks. On
//! top of that sit the chain distance functionals
//!
//! ```text
//! d_x(t) = || P^t(x,.) - pi ||_TV        d(t)  = max_x d_x(t)
//! dbar(t) = max_{x,y} || P^t(x,.) - P^t(y,.) ||_TV
//! s_x(t) = max_y ( 1 - P^t(x,y) / pi(y) )
//! ```
//!
//! all evaluated exactly by repeated row-vector times matrix products;
//! full matrix powers are never formed here.

use nalgebra::{DMatrix, DVector};

use crate::error::{MixError, Result};
use crate::linalg::{self, SparseRows};
use crate::numeric::binomial_u128;

/// Absolute tolerance for single probability comparisons.
pub const PROB_TOL: f64 = 1e-12;
/// Looser tolerance for quantities built from iterated matrix products.
pub const ITER_TOL: f64 = 1e-10;

/// A finitely supported probability vector over state ids `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    /// Validates nonnegativity and total mass 1 (within `1e-12`).
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(MixError::InvalidProbability("empty distribution".into()));
        }
        if let Some(w) = weights.iter().find(|w| **w < 0.0 || !w.is_finite()) {
            return Err(MixError::InvalidProbability(format!(
                "negative or non-finite weight {w}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(MixError::InvalidProbability(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(Distribution { weights })
    }

    /// Point mass at `x` on a space of `n` states.
    pub fn point_mass(n: usize, x: usize) -> Self {
        let mut w = vec![0.0; n];
        w[x] = 1.0;
        Distribution { weights: w }
    }

    /// Uniform distribution on `n` states.
    pub fn uniform(n: usize) -> Self {
        Distribution {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

/// Total variation distance `1/2 sum |mu - nu|`.
///
/// Agrees with the max-over-events and positive-part forms by construction
/// and with the optimal-coupling miss probability (see `optimal_coupling`).
///
/// ```
/// use mixlab::chain::{tv_distance, Distribution};
///
/// let mu = Distribution::new(vec![0.5, 0.3, 0.2]).unwrap();
/// let nu = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
/// assert!((tv_distance(&mu, &nu).unwrap() - 0.3).abs() < 1e-15);
/// ```
pub fn tv_distance(mu: &Distribution, nu: &Distribution) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(MixError::Dimension(format!(
            "distributions over {} vs {} states",
            mu.len(),
            nu.len()
        )));
    }
    Ok(tv_slices(mu.as_slice(), nu.as_slice()))
}

/// Half-l1 distance of two same-length probability vectors.
pub fn tv_slices(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Positive-part form: mass of `mu - nu` on the set `B = {x : mu(x) > nu(x)}`.
pub fn tv_positive_part(mu: &Distribution, nu: &Distribution) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(MixError::Dimension("mismatched supports".into()));
    }
    Ok(mu
        .as_slice()
        .iter()
        .zip(nu.as_slice())
        .filter(|(x, y)| x > y)
        .map(|(x, y)| x - y)
        .sum())
}

/// A coupling of two distributions: a joint matrix with prescribed marginals.
#[derive(Debug, Clone)]
pub struct Coupling {
    q: DMatrix<f64>,
}

impl Coupling {
    /// Validates nonnegativity and both marginals within `1e-12`.
    pub fn new(q: DMatrix<f64>, mu: &Distribution, nu: &Distribution) -> Result<Self> {
        let n = mu.len();
        if q.nrows() != n || q.ncols() != nu.len() || n != nu.len() {
            return Err(MixError::Dimension("coupling shape mismatch".into()));
        }
        if q.iter().any(|v| *v < -PROB_TOL) {
            return Err(MixError::InvalidProbability(
                "negative coupling entry".into(),
            ));
        }
        for x in 0..n {
            let row: f64 = q.row(x).iter().sum();
            if (row - mu.as_slice()[x]).abs() > PROB_TOL {
                return Err(MixError::InvalidProbability(format!(
                    "row marginal {row} != mu({x})"
                )));
            }
        }
        for y in 0..n {
            let col: f64 = q.column(y).iter().sum();
            if (col - nu.as_slice()[y]).abs() > PROB_TOL {
                return Err(MixError::InvalidProbability(format!(
                    "column marginal {col} != nu({y})"
                )));
            }
        }
        Ok(Coupling { q })
    }

    pub fn joint(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// `P[X != Y]` under this coupling: one minus the diagonal mass.
    pub fn prob_unequal(&self) -> f64 {
        1.0 - self.q.diagonal().sum()
    }
}

/// The diagonal-packing coupling attaining the total variation distance.
///
/// `q(x,x) = min(mu(x), nu(x))`; the remaining mass is spread as the
/// conditionally independent product of the positive and negative parts.
/// When `mu = nu` the off-diagonal normalization vanishes and the
/// off-diagonal block is identically zero.
pub fn optimal_coupling(mu: &Distribution, nu: &Distribution) -> Result<Coupling> {
    if mu.len() != nu.len() {
        return Err(MixError::Dimension("mismatched supports".into()));
    }
    let n = mu.len();
    let m = mu.as_slice();
    let v = nu.as_slice();
    let mut q = DMatrix::zeros(n, n);
    let mut diag = 0.0;
    for x in 0..n {
        q[(x, x)] = m[x].min(v[x]);
        diag += q[(x, x)];
    }
    let rest = 1.0 - diag;
    if rest > PROB_TOL {
        for x in 0..n {
            let over = m[x] - v[x];
            if over <= 0.0 {
                continue;
            }
            for y in 0..n {
                let under = v[y] - m[y];
                if under <= 0.0 {
                    continue;
                }
                q[(x, y)] = over * under / rest;
            }
        }
    }
    Coupling::new(q, mu, nu)
}

/// A finite Markov chain: labeled states, a row-stochastic transition
/// matrix (sparse), and, when available, its stationary distribution and
/// reversibility flag.
#[derive(Debug, Clone)]
pub struct FiniteChain {
    mat: SparseRows,
    pi: Option<Vec<f64>>,
    reversible: Option<bool>,
    labels: Option<Vec<String>>,
}

/// Chains up to this size get their stationary distribution solved at
/// construction; larger chains must have it supplied by the constructor.
const STATIONARY_AUTO_CAP: usize = 4096;

impl FiniteChain {
    /// Build from dense rows, validating row sums and entry ranges, and
    /// solving for the stationary distribution when the chain is small
    /// enough and irreducible.
    pub fn from_dense_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let sparse_rows: Vec<Vec<(usize, f64)>> = rows
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .enumerate()
                    .filter(|&(_, v)| v != 0.0)
                    .collect()
            })
            .collect();
        Self::from_sparse_rows(n, sparse_rows)
    }

    /// Build from per-row `(state, probability)` lists.
    pub fn from_sparse_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(MixError::Dimension("row count != n".into()));
        }
        let mat = SparseRows::from_rows(n, rows);
        for i in 0..n {
            let mut sum = 0.0;
            for (_, v) in mat.row(i) {
                if !(0.0..=1.0 + PROB_TOL).contains(&v) {
                    return Err(MixError::InvalidProbability(format!(
                        "entry {v} out of [0,1] in row {i}"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(MixError::InvalidProbability(format!(
                    "row {i} sums to {sum}"
                )));
            }
        }
        let mut chain = FiniteChain {
            mat,
            pi: None,
            reversible: None,
            labels: None,
        };
        if n <= STATIONARY_AUTO_CAP {
            if let Ok(pi) = chain.solve_stationary() {
                chain.set_stationary_checked(pi)?;
            }
        }
        Ok(chain)
    }

    /// Attach a stationary distribution (for chains built with a known
    /// product-form measure). Verifies `pi P = pi` within `1e-10`.
    pub fn with_stationary(mut self, pi: Vec<f64>) -> Result<Self> {
        self.set_stationary_checked(pi)?;
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_states() {
            return Err(MixError::Dimension("label count != n".into()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    fn set_stationary_checked(&mut self, pi: Vec<f64>) -> Result<()> {
        let n = self.n_states();
        if pi.len() != n {
            return Err(MixError::Dimension("pi length != n".into()));
        }
        let sum: f64 = pi.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || pi.iter().any(|p| *p < -PROB_TOL) {
            return Err(MixError::InvalidProbability(
                "stationary vector is not a distribution".into(),
            ));
        }
        let mut out = vec![0.0; n];
        self.mat.mul_row_into(&pi, &mut out);
        let dev = out
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if dev > ITER_TOL {
            return Err(MixError::InvalidProbability(format!(
                "pi P deviates from pi by {dev}"
            )));
        }
        self.pi = Some(pi);
        self.reversible = Some(self.check_reversible());
        Ok(())
    }

    /// Stationary solve: replace the last equation of `(P^T - I) pi = 0`
    /// with the normalization `sum pi = 1` and run dense LU with partial
    /// pivoting, then verify the result is a fixed point under iteration.
    fn solve_stationary(&self) -> Result<Vec<f64>> {
        let n = self.n_states();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for (j, v) in self.mat.row(i) {
                a[(j, i)] += v;
            }
            a[(i, i)] -= 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        let sol = linalg::lu_solve(a, b)?;
        let mut pi: Vec<f64> = sol.iter().copied().collect();
        for p in pi.iter_mut() {
            if *p < 0.0 {
                if *p < -1e-9 {
                    return Err(MixError::Singular(
                        "stationary solve produced negative mass".into(),
                    ));
                }
                *p = 0.0;
            }
        }
        let sum: f64 = pi.iter().sum();
        for p in pi.iter_mut() {
            *p /= sum;
        }
        // Power-iteration verification: a true stationary vector is a fixed
        // point of repeated multiplication.
        let mut x = pi.clone();
        let mut y = vec![0.0; n];
        for _ in 0..32 {
            self.mat.mul_row_into(&x, &mut y);
            std::mem::swap(&mut x, &mut y);
        }
        let dev = x
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if dev > ITER_TOL {
            return Err(MixError::Singular(format!(
                "stationary candidate drifts by {dev} under iteration"
            )));
        }
        Ok(pi)
    }

    fn check_reversible(&self) -> bool {
        let pi = match &self.pi {
            Some(pi) => pi,
            None => return false,
        };
        let n = self.n_states();
        for x in 0..n {
            for (y, p) in self.mat.row(x) {
                let back = self.mat.get(y, x);
                if (pi[x] * p - pi[y] * back).abs() > ITER_TOL {
                    return false;
                }
            }
        }
        true
    }

    pub fn n_states(&self) -> usize {
        self.mat.n_rows()
    }

    pub fn matrix(&self) -> &SparseRows {
        &self.mat
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Transition probability `P(x, y)`.
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.mat.get(x, y)
    }

    /// Stationary distribution, or an error if none is attached.
    pub fn stationary(&self) -> Result<&[f64]> {
        self.pi
            .as_deref()
            .ok_or_else(|| MixError::Domain("chain has no stationary distribution attached".into()))
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible.unwrap_or(false)
    }

    /// One step of the distribution evolution `row <- row P`.
    pub fn step_row(&self, row: &[f64], out: &mut [f64]) {
        self.mat.mul_row_into(row, out);
    }

    /// Right action on a function: `out = P f`.
    pub fn apply_to_function(&self, f: &[f64], out: &mut [f64]) {
        self.mat.mul_col_into(f, out);
    }

    /// `P f` returning a fresh vector.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states()];
        self.apply_to_function(f, &mut out);
        out
    }

    /// Dense copy of the transition matrix (guarded by a size cap).
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        self.mat.to_dense()
    }

    /// The distribution after `t` steps started from the point mass at `x`.
    pub fn t_step_row(&self, x: usize, t: u64) -> Vec<f64> {
        let n = self.n_states();
        let mut row = vec![0.0; n];
        row[x] = 1.0;
        let mut tmp = vec![0.0; n];
        for _ in 0..t {
            self.step_row(&row, &mut tmp);
            std::mem::swap(&mut row, &mut tmp);
        }
        row
    }

    /// Sample a single transition from `x`.
    pub fn sample_step<R: rand::Rng>(&self, x: usize, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = x;
        for (y, p) in self.mat.row(x) {
            acc += p;
            last = y;
            if u < acc {
                return y;
            }
        }
        last
    }

    /// Support graph adjacency: `x ~ y` iff `P(x,y) > 0`, self loops skipped.
    pub fn support_neighbors(&self, x: usize) -> Vec<usize> {
        self.mat
            .row(x)
            .filter(|&(y, v)| y != x && v > 0.0)
            .map(|(y, _)| y)
            .collect()
    }
}

/// Incremental scan over `t -> P^t(x, .)` for a set of starting states.
///
/// Holds one evolving row per start; each call to `step` advances every
/// row by one multiplication, so scanning `t = 0..T` costs `T` products
/// per start instead of `T^2 / 2`.
pub struct DistanceScan<'a> {
    chain: &'a FiniteChain,
    rows: Vec<Vec<f64>>,
    scratch: Vec<f64>,
    t: u64,
}

impl<'a> DistanceScan<'a> {
    /// Scan from every state.
    pub fn all_starts(chain: &'a FiniteChain) -> Self {
        let n = chain.n_states();
        let rows = (0..n)
            .map(|x| {
                let mut r = vec![0.0; n];
                r[x] = 1.0;
                r
            })
            .collect();
        DistanceScan {
            chain,
            rows,
            scratch: vec![0.0; n],
            t: 0,
        }
    }

    /// Scan from a single state; valid as a stand-in for the full maximum
    /// only on chains whose automorphism group acts transitively.
    pub fn single_start(chain: &'a FiniteChain, x: usize) -> Self {
        let n = chain.n_states();
        let mut r = vec![0.0; n];
        r[x] = 1.0;
        DistanceScan {
            chain,
            rows: vec![r],
            scratch: vec![0.0; n],
            t: 0,
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Advance all rows by one step.
    pub fn step(&mut self) {
        for row in self.rows.iter_mut() {
            self.chain.step_row(row, &mut self.scratch);
            std::mem::swap(row, &mut self.scratch);
        }
        self.t += 1;
    }

    /// Per-start total variation distances to stationarity.
    pub fn d_per_start(&self) -> Result<Vec<f64>> {
        let pi = self.chain.stationary()?;
        Ok(self.rows.iter().map(|r| tv_slices(r, pi)).collect())
    }

    /// `d(t)` over the tracked starts.
    pub fn d(&self) -> Result<f64> {
        Ok(self.d_per_start()?.into_iter().fold(0.0, f64::max))
    }

    /// `dbar(t)`: max over ordered pairs of tracked starts.
    pub fn dbar(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.rows.len() {
            for j in (i + 1)..self.rows.len() {
                best = best.max(tv_slices(&self.rows[i], &self.rows[j]));
            }
        }
        best
    }

    /// Per-start separation distances `s_x(t)`.
    pub fn sep_per_start(&self) -> Result<Vec<f64>> {
        let pi = self.chain.stationary()?;
        if pi.iter().any(|p| *p <= 0.0) {
            return Err(MixError::Domain(
                "separation distance needs strictly positive stationary mass".into(),
            ));
        }
        Ok(self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .zip(pi)
                    .map(|(p, q)| 1.0 - p / q)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect())
    }

    /// `s(t)` over the tracked starts.
    pub fn sep(&self) -> Result<f64> {
        Ok(self
            .sep_per_start()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

/// `d(t)` and the per-state vector `d_x(t)`, computed exactly.
pub fn dist_from_stationarity(chain: &FiniteChain, t: u64) -> Result<(f64, Vec<f64>)> {
    let mut scan = DistanceScan::all_starts(chain);
    for _ in 0..t {
        scan.step();
    }
    let per = scan.d_per_start()?;
    let d = per.iter().copied().fold(0.0, f64::max);
    Ok((d, per))
}

/// `dbar(t) = max_{x,y} || P^t(x,.) - P^t(y,.) ||_TV`.
pub fn dbar(chain: &FiniteChain, t: u64) -> f64 {
    let mut scan = DistanceScan::all_starts(chain);
    for _ in 0..t {
        scan.step();
    }
    scan.dbar()
}

/// `s(t)` and the per-state vector `s_x(t)`.
pub fn separation_distance(chain: &FiniteChain, t: u64) -> Result<(f64, Vec<f64>)> {
    let mut scan = DistanceScan::all_starts(chain);
    for _ in 0..t {
        scan.step();
    }
    let per = scan.sep_per_start()?;
    let s = per.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((s, per))
}

/// Exact `|| Bin(n,1/2) - Bin(n+1,1/2) ||_TV = 2^(-n-1) C(n, floor(n/2))`.
///
/// ```
/// use mixlab::chain::binomial_tv_gap;
///
/// assert_eq!(binomial_tv_gap(0), 0.5);
/// assert_eq!(binomial_tv_gap(4), 6.0 / 32.0);
/// ```
pub fn binomial_tv_gap(n: u64) -> f64 {
    let c = binomial_u128(n, n / 2) as f64;
    c * 0.5_f64.powi(n as i32 + 1)
}

/// Random lazy reversible chain on `n` states, for sweeps and property
/// tests: a symmetric positive weight matrix with a diagonal heavy enough
/// that `P(x,x) = 1/2` exactly, row-normalized. Always irreducible (a path
/// backbone is forced), reversible with respect to the weighted measure.
pub fn random_lazy_reversible_chain<R: rand::Rng>(n: usize, rng: &mut R) -> FiniteChain {
    assert!(n >= 2);
    let mut w = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = if rng.gen::<f64>() < 0.3 {
                0.0
            } else {
                rng.gen::<f64>()
            };
            w[i][j] = v;
            w[j][i] = v;
        }
    }
    for i in 0..n.saturating_sub(1) {
        if w[i][i + 1] == 0.0 {
            let v = 0.5 + rng.gen::<f64>();
            w[i][i + 1] = v;
            w[i + 1][i] = v;
        }
    }
    for i in 0..n {
        let off: f64 = w[i].iter().sum();
        w[i][i] = off;
    }
    let rows: Vec<Vec<f64>> = w
        .iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            row.iter().map(|v| v / s).collect()
        })
        .collect();
    FiniteChain::from_dense_rows(rows).expect("generated chain is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dist(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    pub(crate) fn random_distribution<R: Rng>(n: usize, rng: &mut R) -> Distribution {
        let mut w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let s: f64 = w.iter().sum();
        for x in w.iter_mut() {
            *x /= s;
        }
        // Repair the rounding drift so the sum is exactly 1 up to one ulp.
        let s2: f64 = w.iter().sum();
        w[0] += 1.0 - s2;
        Distribution::new(w).unwrap()
    }

    #[test]
    fn tv_identical_is_zero() {
        let mu = dist(&[0.5, 0.3, 0.2]);
        assert_eq!(tv_distance(&mu, &mu).unwrap(), 0.0);
    }

    #[test]
    fn tv_disjoint_is_one() {
        let mu = dist(&[1.0, 0.0]);
        let nu = dist(&[0.0, 1.0]);
        assert_eq!(tv_distance(&mu, &nu).unwrap(), 1.0);
    }

    #[test]
    fn tv_hand_checked_example() {
        // half-l1 by hand: (0.3 + 0.0 + 0.3) / 2 = 0.3
        let mu = dist(&[0.5, 0.3, 0.2]);
        let nu = dist(&[0.2, 0.3, 0.5]);
        assert!((tv_distance(&mu, &nu).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn tv_dimension_mismatch() {
        let mu = dist(&[1.0]);
        let nu = dist(&[0.5, 0.5]);
        assert!(matches!(tv_distance(&mu, &nu), Err(MixError::Dimension(_))));
    }

    #[test]
    fn optimal_coupling_identical_measures() {
        let mu = dist(&[0.5, 0.3, 0.2]);
        let c = optimal_coupling(&mu, &mu).unwrap();
        assert!(c.prob_unequal().abs() < 1e-15);
        // Off-diagonal block all-zero by definition.
        for x in 0..3 {
            for y in 0..3 {
                if x != y {
                    assert_eq!(c.joint()[(x, y)], 0.0);
                }
            }
        }
    }

    #[test]
    fn optimal_coupling_diagonal_mass() {
        let mu = dist(&[0.5, 0.3, 0.2]);
        let nu = dist(&[0.2, 0.3, 0.5]);
        let c = optimal_coupling(&mu, &nu).unwrap();
        let diag: f64 = c.joint().diagonal().sum();
        assert!((diag - 0.7).abs() < 1e-12);
        assert!((c.prob_unequal() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn optimal_coupling_forced_by_marginals() {
        let mu = dist(&[1.0, 0.0]);
        let nu = dist(&[0.0, 1.0]);
        let c = optimal_coupling(&mu, &nu).unwrap();
        assert!((c.joint()[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((c.prob_unequal() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn four_tv_forms_agree_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let n = rng.gen_range(2..=50);
            let mu = random_distribution(n, &mut rng);
            let nu = random_distribution(n, &mut rng);
            let tv = tv_distance(&mu, &nu).unwrap();
            let pos = tv_positive_part(&mu, &nu).unwrap();
            assert!((tv - pos).abs() < 1e-12);
            let c = optimal_coupling(&mu, &nu).unwrap();
            assert!((tv - c.prob_unequal()).abs() < 1e-12);
        }
    }

    #[test]
    fn any_coupling_dominates_tv() {
        // Mixtures of the optimal and the independent coupling are couplings;
        // their miss probability must dominate the total variation distance.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(2..=20);
            let mu = random_distribution(n, &mut rng);
            let nu = random_distribution(n, &mut rng);
            let tv = tv_distance(&mu, &nu).unwrap();
            let opt = optimal_coupling(&mu, &nu).unwrap();
            let lambda: f64 = rng.gen();
            let mut q = opt.joint().clone() * lambda;
            for x in 0..n {
                for y in 0..n {
                    q[(x, y)] += (1.0 - lambda) * mu.as_slice()[x] * nu.as_slice()[y];
                }
            }
            let c = Coupling::new(q, &mu, &nu).unwrap();
            assert!(c.prob_unequal() >= tv - 1e-12);
        }
    }

    #[test]
    fn chain_validates_rows() {
        assert!(FiniteChain::from_dense_rows(vec![vec![0.5, 0.4], vec![0.5, 0.5]]).is_err());
        assert!(FiniteChain::from_dense_rows(vec![vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn two_state_flat_chain_mixes_in_one_step() {
        let p = FiniteChain::from_dense_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let (d1, _) = dist_from_stationarity(&p, 1).unwrap();
        assert!(d1.abs() < 1e-15);
        let (d0, per) = dist_from_stationarity(&p, 0).unwrap();
        assert!((d0 - 0.5).abs() < 1e-15);
        // d_x(0) = 1 - pi(x) for point mass starts
        for (x, dx) in per.iter().enumerate() {
            let pi = p.stationary().unwrap();
            assert!((dx - (1.0 - pi[x])).abs() < 1e-15);
        }
    }

    #[test]
    fn cycle_distance_decays_to_zero() {
        // Lazy C_4: d(t) is non-increasing and vanishes in the limit.
        let p = crate::graphs::lazy_srw(&crate::graphs::cycle(4).unwrap()).unwrap();
        let mut scan = DistanceScan::all_starts(&p);
        let mut prev = f64::INFINITY;
        for _ in 0..=120 {
            let d = scan.d().unwrap();
            assert!(d <= prev + 1e-14);
            prev = d;
            scan.step();
        }
        assert!(prev < 1e-8, "d(120) = {prev}");
    }

    #[test]
    fn dbar_at_zero_is_one() {
        let p = FiniteChain::from_dense_rows(vec![
            vec![0.5, 0.25, 0.25],
            vec![0.25, 0.5, 0.25],
            vec![0.25, 0.25, 0.5],
        ])
        .unwrap();
        assert!((dbar(&p, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dbar_matches_brute_force_pairwise_tv() {
        // Independent oracle: dense matrix power, then all ordered pairs.
        let p = crate::graphs::lazy_srw(&crate::graphs::cycle(8).unwrap()).unwrap();
        let t = 5u64;
        let dense = p.to_dense().unwrap();
        let mut power = nalgebra::DMatrix::identity(8, 8);
        for _ in 0..t {
            power = &power * &dense;
        }
        let mut brute: f64 = 0.0;
        for x in 0..8 {
            for y in 0..8 {
                let tv = 0.5
                    * (0..8)
                        .map(|z| (power[(x, z)] - power[(y, z)]).abs())
                        .sum::<f64>();
                brute = brute.max(tv);
            }
        }
        assert!((dbar(&p, t) - brute).abs() < 1e-12);
    }

    #[test]
    fn separation_at_zero_is_one() {
        let p = FiniteChain::from_dense_rows(vec![
            vec![0.5, 0.25, 0.25],
            vec![0.25, 0.5, 0.25],
            vec![0.25, 0.25, 0.5],
        ])
        .unwrap();
        let (s0, _) = separation_distance(&p, 0).unwrap();
        assert!((s0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_solve_matches_known_two_state() {
        // P = [[0.8, 0.2], [0.3, 0.7]] has pi = (0.6, 0.4).
        let p = FiniteChain::from_dense_rows(vec![vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
        let pi = p.stationary().unwrap();
        assert!((pi[0] - 0.6).abs() < 1e-12);
        assert!((pi[1] - 0.4).abs() < 1e-12);
        assert!(p.is_reversible());
    }

    #[test]
    fn binomial_tv_gap_small_cases() {
        assert!((binomial_tv_gap(0) - 0.5).abs() < 1e-15);
        assert!((binomial_tv_gap(4) - 6.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn binomial_tv_gap_equals_direct_tv() {
        // Direct integer computation: TV = sum_k |2 C(n,k) - C(n+1,k)| / 2^(n+2).
        for n in 0..=60u64 {
            let mut num: u128 = 0;
            for k in 0..=(n + 1) {
                let a = 2 * binomial_u128(n, k);
                let b = binomial_u128(n + 1, k);
                num += a.abs_diff(b);
            }
            let direct = num as f64 * 0.5_f64.powi(n as i32 + 2);
            let closed = binomial_tv_gap(n);
            // Integer identity: num must equal 2 * C(n, floor(n/2)) exactly.
            assert_eq!(num, 2 * binomial_u128(n, n / 2), "n={n}");
            assert!((direct - closed).abs() < 1e-15);
        }
    }

    #[test]
    fn binomial_tv_gap_asymptotics() {
        let n = 100u64;
        let target = 1.0 / (2.0 * std::f64::consts::PI * n as f64).sqrt();
        let ratio = binomial_tv_gap(n) / target;
        assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
    }
}
