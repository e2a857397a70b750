//! Exact binomial arithmetic shared by the distance and long-range modules.

/// Binomial coefficient `C(n, k)` as an exact `u128`.
///
/// Panics on overflow; safe for `n <= 128`.
pub fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc
            .checked_mul((n - i) as u128)
            .expect("binomial_u128 overflow");
        acc /= (i + 1) as u128;
    }
    acc
}

/// Probability mass function of Binomial(t, 1/2) as `f64`s.
///
/// Uses the multiplicative recurrence from `2^-t`; valid for `t` up to a few
/// thousand (the smallest mass stays well above the subnormal range for
/// `t <= 2000`).
pub fn binomial_half_pmf(t: u64) -> Vec<f64> {
    let mut pmf = vec![0.0; t as usize + 1];
    pmf[0] = 0.5_f64.powi(t as i32);
    for j in 0..t as usize {
        pmf[j + 1] = pmf[j] * (t - j as u64) as f64 / (j as f64 + 1.0);
    }
    pmf
}

/// Tail `P(S_t >= r)` for simple random walk `S_t` on the integers
/// (sum of `t` independent +-1 steps), with `r >= 0`.
///
/// `S_t >= r` iff the number of +1 steps is at least `ceil((t + r) / 2)`.
pub fn srw_tail_prob(t: u64, r: u64) -> f64 {
    if r > t {
        return 0.0;
    }
    let lo = t + r; // #(+1 steps) >= ceil((t+r)/2)
    let j0 = lo / 2 + (lo % 2);
    let pmf = binomial_half_pmf(t);
    // Sum smallest terms first.
    let mut acc = 0.0;
    for j in (j0 as usize..=t as usize).rev() {
        acc += pmf[j];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_binomials() {
        assert_eq!(binomial_u128(0, 0), 1);
        assert_eq!(binomial_u128(10, 3), 120);
        assert_eq!(binomial_u128(100, 50), 100891344545564193334812497256);
        assert_eq!(binomial_u128(5, 7), 0);
    }

    #[test]
    fn pmf_sums_to_one() {
        for t in [0u64, 1, 7, 30, 200] {
            let s: f64 = binomial_half_pmf(t).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "t={t} sum={s}");
        }
    }

    #[test]
    fn tail_matches_hand_counts() {
        // P(S_10 >= 4) = P(Bin(10,1/2) >= 7) = (120+45+10+1)/1024
        assert!((srw_tail_prob(10, 4) - 176.0 / 1024.0).abs() < 1e-15);
        // P(S_t >= 0) >= 1/2 always (equality only in the limit)
        for t in [1u64, 2, 9, 100] {
            assert!(srw_tail_prob(t, 0) >= 0.5);
        }
        assert_eq!(srw_tail_prob(5, 6), 0.0);
        assert!((srw_tail_prob(3, 3) - 0.125).abs() < 1e-15);
    }
}
