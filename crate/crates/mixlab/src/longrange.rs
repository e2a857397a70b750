//! Long-range transition bounds via Chebyshev functional calculus.
//!
//! The workhorse identity expands a matrix power into Chebyshev polynomials
//! weighted by the simple-random-walk law on the integers:
//!
//! ```text
//! P^t = sum_{k=-t}^{t} P(S_t = k) Q_{|k|}(P)
//! ```
//!
//! Since `Q_k(P)(x,y)` vanishes below graph distance `k` and is bounded by
//! `sqrt(pi(y)/pi(x))` for reversible `P`, transition probabilities decay
//! like the walk tail `P(S_t >= rho(x,y))`, and hence like
//! `exp(-rho^2 / 2t)` by the Bernstein-Chernoff bound.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::chain::FiniteChain;
use crate::error::{MixError, Result};
use crate::numeric::{binomial_half_pmf, srw_tail_prob};

/// Monomial-basis coefficients of the Chebyshev polynomials `Q_0..Q_k`,
/// exact integers under the recurrence `Q_{k+1} = 2 xi Q_k - Q_{k-1}`.
#[derive(Debug, Clone)]
pub struct ChebyshevTable {
    /// `coeffs[k][j]` is the coefficient of `xi^j` in `Q_k`.
    pub coeffs: Vec<Vec<i128>>,
}

impl ChebyshevTable {
    /// Table up to degree `k_max`; coefficients stay within `i128` for
    /// every degree this crate uses (they grow like `2^k`).
    pub fn up_to(k_max: usize) -> Self {
        let mut coeffs: Vec<Vec<i128>> = Vec::with_capacity(k_max + 1);
        coeffs.push(vec![1]);
        if k_max >= 1 {
            coeffs.push(vec![0, 1]);
        }
        for k in 1..k_max {
            let mut next = vec![0i128; k + 2];
            for (j, &c) in coeffs[k].iter().enumerate() {
                next[j + 1] = next[j + 1].checked_add(2 * c).expect("chebyshev overflow");
            }
            for (j, &c) in coeffs[k - 1].iter().enumerate() {
                next[j] -= c;
            }
            coeffs.push(next);
        }
        ChebyshevTable { coeffs }
    }

    /// Evaluate `Q_k` at a scalar by Horner's rule.
    pub fn eval(&self, k: usize, xi: f64) -> f64 {
        self.coeffs[k]
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * xi + c as f64)
    }
}

/// `Q_k(P)` by the matrix three-term recurrence (not monomial expansion,
/// which would be numerically unstable).
pub fn chebyshev_apply(chain: &FiniteChain, k: usize) -> Result<DMatrix<f64>> {
    let p = chain.to_dense()?;
    let n = p.nrows();
    let mut prev = DMatrix::identity(n, n);
    if k == 0 {
        return Ok(prev);
    }
    let mut cur = p.clone();
    for _ in 1..k {
        let next = 2.0 * (&p * &cur) - &prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Graph distances on the support graph of the chain
/// (`x ~ y` iff `p(x,y) > 0`, self loops ignored), by BFS.
pub fn support_distances(chain: &FiniteChain) -> Vec<Vec<u32>> {
    let n = chain.n_states();
    let mut all = Vec::with_capacity(n);
    for s in 0..n {
        let mut dist = vec![u32::MAX; n];
        dist[s] = 0;
        let mut queue = VecDeque::new();
        queue.push_back(s);
        while let Some(x) = queue.pop_front() {
            for y in chain.support_neighbors(x) {
                if dist[y] == u32::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        all.push(dist);
    }
    all
}

/// Maximum absolute deviation between `P^t` and its binomial Chebyshev
/// mixture. `t <= 30` keeps the binomial weights exactly representable;
/// larger `t` is served by `binomial_mixture_identity_check_lax` below.
pub fn binomial_mixture_identity_check(chain: &FiniteChain, t: u64) -> Result<f64> {
    if t > 30 {
        return Err(MixError::Argument(
            "exact mixture check limited to t <= 30; use the lax mode".into(),
        ));
    }
    mixture_deviation(chain, t)
}

/// The same deviation computed with floating binomial weights; tolerate
/// about `1e-8` here instead of `1e-10`.
pub fn binomial_mixture_identity_check_lax(chain: &FiniteChain, t: u64) -> Result<f64> {
    mixture_deviation(chain, t)
}

fn mixture_deviation(chain: &FiniteChain, t: u64) -> Result<f64> {
    let p = chain.to_dense()?;
    let n = p.nrows();

    // Exact power by repeated multiplication.
    let mut power = DMatrix::identity(n, n);
    for _ in 0..t {
        power = &power * &p;
    }

    // Mixture sum_{k=-t}^t P(S_t = k) Q_{|k|}(P): S_t = 2 Bin(t,1/2) - t.
    let pmf = binomial_half_pmf(t);
    let mut weights = vec![0.0f64; t as usize + 1]; // weight of |k|
    for (j, w) in pmf.iter().enumerate() {
        let k = (2 * j as i64 - t as i64).unsigned_abs() as usize;
        weights[k] += w;
    }

    let mut mixture = DMatrix::zeros(n, n);
    let mut prev = DMatrix::identity(n, n);
    if weights[0] != 0.0 {
        mixture += &prev * weights[0];
    }
    if t >= 1 {
        let mut cur = p.clone();
        if weights[1] != 0.0 {
            mixture += &cur * weights[1];
        }
        for k in 2..=t as usize {
            let next = 2.0 * (&p * &cur) - &prev;
            prev = cur;
            cur = next;
            if weights[k] != 0.0 {
                mixture += &cur * weights[k];
            }
        }
    }

    let dev = (&power - &mixture)
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    Ok(dev)
}

/// A violated long-range bound at `(x, y, t)`.
#[derive(Debug, Clone)]
pub struct VcViolation {
    pub x: usize,
    pub y: usize,
    pub t: u64,
    pub lhs: f64,
    pub rhs: f64,
    /// Which bound failed: the walk-tail middle bound or the Gaussian one.
    pub which: &'static str,
}

/// Checks, for all pairs and `1 <= t <= t_max`, the two-layer bound
///
/// ```text
/// p^t(x,y) <= 2 sqrt(pi(y)/pi(x)) P(S_t >= rho(x,y))
///          <= 2 sqrt(pi(y)/pi(x)) exp(-rho(x,y)^2 / 2t)
/// ```
///
/// Returns all violations (expected empty).
pub fn vc_bound_check(
    chain: &FiniteChain,
    distances: &[Vec<u32>],
    t_max: u64,
) -> Result<Vec<VcViolation>> {
    if !chain.is_reversible() {
        return Err(MixError::Unsupported(
            "long-range bound needs reversibility".into(),
        ));
    }
    let pi = chain.stationary()?.to_vec();
    let p = chain.to_dense()?;
    let n = p.nrows();
    let mut power = DMatrix::identity(n, n);
    let mut violations = Vec::new();
    // Tail lookups are shared across pairs per t.
    for t in 1..=t_max {
        power = &power * &p;
        let mut tails = vec![0.0f64; n + 1];
        for (r, tail) in tails.iter_mut().enumerate() {
            *tail = srw_tail_prob(t, r as u64);
        }
        for x in 0..n {
            for y in 0..n {
                let rho = distances[x][y];
                if rho == u32::MAX {
                    continue;
                }
                let ratio = 2.0 * (pi[y] / pi[x]).sqrt();
                let lhs = power[(x, y)];
                let middle = ratio * tails[(rho as usize).min(n)];
                let gauss = ratio * (-(rho as f64).powi(2) / (2.0 * t as f64)).exp();
                if lhs > middle + 1e-12 {
                    violations.push(VcViolation {
                        x,
                        y,
                        t,
                        lhs,
                        rhs: middle,
                        which: "walk-tail",
                    });
                }
                if middle > gauss + 1e-12 {
                    violations.push(VcViolation {
                        x,
                        y,
                        t,
                        lhs: middle,
                        rhs: gauss,
                        which: "gaussian",
                    });
                }
            }
        }
    }
    Ok(violations)
}

/// Exact tail `P(S_t >= r)` of simple random walk on the integers next to
/// its Bernstein-Chernoff bound `exp(-r^2 / 2t)`.
///
/// ```
/// use mixlab::longrange::bernstein_tail;
///
/// let (exact, bound) = bernstein_tail(10, 4).unwrap();
/// assert!((exact - 176.0 / 1024.0).abs() < 1e-15);
/// assert!(exact <= bound);
/// ```
pub fn bernstein_tail(t: u64, r: u64) -> Result<(f64, f64)> {
    if r > t {
        return Err(MixError::Argument(format!(
            "need 0 <= R <= t, got R={r}, t={t}"
        )));
    }
    let exact = srw_tail_prob(t, r);
    let bound = (-(r as f64).powi(2) / (2.0 * t.max(1) as f64)).exp();
    Ok((exact, bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Distribution;
    use crate::graphs::{cycle, dary_tree_ball, lazy_srw};
    use crate::numeric::binomial_u128;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::chain::random_lazy_reversible_chain as random_lazy_reversible;

    #[test]
    fn chebyshev_table_basics() {
        let table = ChebyshevTable::up_to(12);
        assert_eq!(table.coeffs[0], vec![1]);
        assert_eq!(table.coeffs[1], vec![0, 1]);
        assert_eq!(table.coeffs[2], vec![-1, 0, 2]);
        assert_eq!(table.coeffs[3], vec![0, -3, 0, 4]);
        // |Q_k| <= 1 on [-1, 1] at sampled points.
        for k in 0..=12 {
            for i in 0..=100 {
                let xi = -1.0 + 2.0 * i as f64 / 100.0;
                assert!(table.eval(k, xi).abs() <= 1.0 + 1e-9, "k={k} xi={xi}");
            }
        }
        // Q_k(cos h) = cos(k h).
        for k in 0..=12 {
            for i in 0..10 {
                let h = 0.1 + i as f64 * 0.3;
                assert!((table.eval(k, h.cos()) - (k as f64 * h).cos()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn chebyshev_apply_degenerate_cases() {
        let chain = lazy_srw(&cycle(5).unwrap()).unwrap();
        let q0 = chebyshev_apply(&chain, 0).unwrap();
        assert!(q0.is_identity(0.0));
        let q1 = chebyshev_apply(&chain, 1).unwrap();
        let p = chain.to_dense().unwrap();
        assert!((q1 - p).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn chebyshev_support_vanishes_below_distance() {
        let chain = lazy_srw(&cycle(9).unwrap()).unwrap();
        let dist = support_distances(&chain);
        for k in 0..=4usize {
            let qk = chebyshev_apply(&chain, k).unwrap();
            for x in 0..9 {
                for y in 0..9 {
                    if dist[x][y] as usize > k {
                        assert_eq!(qk[(x, y)], 0.0, "k={k} ({x},{y})");
                    }
                }
            }
        }
    }

    #[test]
    fn power_support_vanishes_below_distance() {
        let chain = lazy_srw(&dary_tree_ball(3, 3).unwrap()).unwrap();
        let dist = support_distances(&chain);
        let p = chain.to_dense().unwrap();
        let mut power = DMatrix::identity(p.nrows(), p.nrows());
        for k in 0..4u32 {
            for x in 0..p.nrows() {
                for y in 0..p.nrows() {
                    if dist[x][y] > k {
                        assert_eq!(power[(x, y)], 0.0);
                    }
                }
            }
            power = &power * &p;
        }
    }

    #[test]
    fn mixture_identity_exact_cases() {
        let chain = lazy_srw(&cycle(8).unwrap()).unwrap();
        assert_eq!(binomial_mixture_identity_check(&chain, 0).unwrap(), 0.0);
        assert!(binomial_mixture_identity_check(&chain, 10).unwrap() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let random = random_lazy_reversible(20, &mut rng);
        assert!(binomial_mixture_identity_check(&random, 15).unwrap() < 1e-10);
        assert!(binomial_mixture_identity_check(&chain, 31).is_err());
        assert!(binomial_mixture_identity_check_lax(&chain, 40).unwrap() < 1e-8);
    }

    #[test]
    fn contraction_in_pi_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let chain = random_lazy_reversible(15, &mut rng);
        let pi = chain.stationary().unwrap().to_vec();
        for k in [0usize, 1, 3, 7, 15] {
            let qk = chebyshev_apply(&chain, k).unwrap();
            for _ in 0..20 {
                let v: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm_pi = |u: &[f64]| -> f64 {
                    u.iter()
                        .zip(&pi)
                        .map(|(x, p)| x * x * p)
                        .sum::<f64>()
                        .sqrt()
                };
                let qv: Vec<f64> = (0..15)
                    .map(|i| (0..15).map(|j| qk[(i, j)] * v[j]).sum())
                    .collect();
                assert!(norm_pi(&qv) <= norm_pi(&v) + 1e-10);
            }
        }
    }

    #[test]
    fn vc_bounds_hold_on_cycle_and_tree() {
        let c10 = lazy_srw(&cycle(10).unwrap()).unwrap();
        let d = support_distances(&c10);
        assert!(vc_bound_check(&c10, &d, 100).unwrap().is_empty());

        let tree = lazy_srw(&dary_tree_ball(3, 5).unwrap()).unwrap();
        let d = support_distances(&tree);
        assert!(vc_bound_check(&tree, &d, 60).unwrap().is_empty());
    }

    #[test]
    fn vc_bound_diagonal_is_trivial() {
        // rho = 0: the middle bound is 2 P(S_t >= 0) >= 1 >= p^t(x,x).
        for t in [1u64, 5, 20] {
            assert!(2.0 * srw_tail_prob(t, 0) >= 1.0);
        }
    }

    #[test]
    fn bernstein_bounds() {
        let (exact, bound) = bernstein_tail(10, 0).unwrap();
        assert!(exact >= 0.5);
        assert_eq!(bound, 1.0);
        let (exact, _) = bernstein_tail(10, 4).unwrap();
        assert!((exact - 176.0 / 1024.0).abs() < 1e-12);
        let (exact, bound) = bernstein_tail(100, 30).unwrap();
        assert!(exact <= (-4.5f64).exp());
        assert!(exact <= bound);
        assert!(bernstein_tail(10, 11).is_err());
        // Dominance on a grid.
        for t in 1..=60u64 {
            for r in 0..=t {
                let (e, b) = bernstein_tail(t, r).unwrap();
                assert!(e <= b + 1e-12, "t={t} R={r}");
            }
        }
    }

    #[test]
    fn binomial_weights_match_tail_sums() {
        // Cross-check the pmf against exact u128 binomials at t = 30.
        let pmf = binomial_half_pmf(30);
        for (j, w) in pmf.iter().enumerate() {
            let exact = binomial_u128(30, j as u64) as f64 * 0.5f64.powi(30);
            assert!((w - exact).abs() < 1e-15);
        }
    }

    #[test]
    fn tv_gap_consistency_with_distribution_type() {
        // Bin(4,1/2) vs Bin(5,1/2) padded to a common support.
        let b4: Vec<f64> = (0..=5)
            .map(|k| binomial_u128(4, k) as f64 * 0.5f64.powi(4))
            .collect();
        let b5: Vec<f64> = (0..=5)
            .map(|k| binomial_u128(5, k) as f64 * 0.5f64.powi(5))
            .collect();
        let mu = Distribution::new(b4).unwrap();
        let nu = Distribution::new(b5).unwrap();
        let tv = crate::chain::tv_distance(&mu, &nu).unwrap();
        assert!((tv - crate::chain::binomial_tv_gap(4)).abs() < 1e-15);
    }
}
