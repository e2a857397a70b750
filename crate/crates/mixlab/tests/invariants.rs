//! Cross-module invariants: coupling tails dominate distance, the
//! generalized lamplighter relaxation band, and the dyadic-block walk's
//! transience diagnostic.

use mixlab::adapted::{simulate_adapted, AdaptedRule};
use mixlab::chain::{dist_from_stationarity, FiniteChain};
use mixlab::coupling::torus_coupling_run;
use mixlab::graphs::{cycle, gamblers_ruin_chain, generalized_lamplighter_chain, lazy_srw, torus};
use mixlab::spectral::{hitting_times, spectrum, t_rel};
use mixlab::walk::stream_seed;

/// Exact tail `P_k[tau_{0,n} > t]` of the non-lazy gambler's ruin walk.
fn gambler_tail(n: usize, k: usize, t_max: u64) -> Vec<f64> {
    let chain: FiniteChain = gamblers_ruin_chain(n, false).unwrap();
    let mut row = vec![0.0; n + 1];
    row[k] = 1.0;
    let mut tmp = vec![0.0; n + 1];
    let mut tail = Vec::with_capacity(t_max as usize + 1);
    for _ in 0..=t_max {
        tail.push(1.0 - row[0] - row[n]);
        chain.step_row(&row, &mut tmp);
        std::mem::swap(&mut row, &mut tmp);
    }
    tail
}

#[test]
fn coupling_tail_dominates_distance_on_cycles() {
    // d(t) <= max_{x,y} P[tau_couple > t]; the cycle coupling's meeting
    // time is exactly the gambler's ruin from the clockwise distance, so
    // the right-hand side is computable exactly.
    for n in [5usize, 8] {
        let chain = lazy_srw(&cycle(n).unwrap()).unwrap();
        let t_max = 100u64;
        let tails: Vec<Vec<f64>> = (1..n).map(|k| gambler_tail(n, k, t_max)).collect();
        for t in 0..=t_max {
            let (d, _) = dist_from_stationarity(&chain, t).unwrap();
            let worst = tails
                .iter()
                .map(|tail| tail[t as usize])
                .fold(0.0, f64::max);
            assert!(d <= worst + 1e-12, "n={n} t={t}: d={d} > tail={worst}");
        }
    }
}

#[test]
fn coupling_tail_dominates_distance_on_torus() {
    // Same bound on Z_3^2, with the coupling tail estimated by seeded
    // Monte Carlo (binomial 3-sigma slack on each checkpoint).
    let n = 3usize;
    let d = 2usize;
    let chain = lazy_srw(&torus(n, d).unwrap()).unwrap();
    let runs = 4000u64;
    let checkpoints = [1u64, 2, 4, 8, 16, 32];
    // Worst start pair: scan all representative separations.
    let starts: Vec<Vec<usize>> = vec![vec![1, 0], vec![1, 1]];
    for start in starts {
        let mut exceed = vec![0u64; checkpoints.len()];
        for run in 0..runs {
            let y0 = vec![0usize; d];
            let record =
                torus_coupling_run(n, d, &start, &y0, stream_seed(42, run), 10_000).unwrap();
            let tau = record.tau_couple.unwrap_or(u64::MAX);
            for (i, &cp) in checkpoints.iter().enumerate() {
                if tau > cp {
                    exceed[i] += 1;
                }
            }
        }
        for (i, &cp) in checkpoints.iter().enumerate() {
            let (dist, _) = dist_from_stationarity(&chain, cp).unwrap();
            let p_hat = exceed[i] as f64 / runs as f64;
            let se = (p_hat * (1.0 - p_hat) / runs as f64).sqrt().max(1e-4);
            assert!(
                dist <= p_hat + 3.0 * se,
                "start {start:?} t={cp}: d={dist} vs tail {p_hat} (se {se})"
            );
        }
    }
}

#[test]
fn generalized_lamplighter_relaxation_band() {
    // t_rel(H wr G) against t_hit(G) + |G| t_rel(H) for H = lazy C_3:
    // the ratio sits in a fixed band and moves by less than 4x across n.
    let lamp = lazy_srw(&cycle(3).unwrap()).unwrap();
    let t_rel_lamp = spectrum(&lamp).unwrap().t_rel;
    let mut ratios = Vec::new();
    for n in 3..=7usize {
        let g = cycle(n).unwrap();
        let base = lazy_srw(&g).unwrap();
        let t_hit = hitting_times(&base).unwrap().t_hit();
        let wreath = generalized_lamplighter_chain(&g, &lamp).unwrap();
        let rel = t_rel(&wreath).unwrap();
        let denom = t_hit + n as f64 * t_rel_lamp;
        ratios.push(rel / denom);
    }
    let max = ratios.iter().copied().fold(f64::MIN, f64::max);
    let min = ratios.iter().copied().fold(f64::MAX, f64::min);
    assert!(min >= 0.02 && max <= 50.0, "ratios out of band: {ratios:?}");
    assert!(max / min < 4.0, "ratios vary too much: {ratios:?}");
}

#[test]
fn dyadic_block_walk_rarely_returns_late() {
    // Transience diagnostic over 200 seeds at horizon 2^18: origin visits
    // after time 2^10 are rare. Raw visit counts have a heavy conditional
    // tail (a single block whose frozen coordinate is 0 yields a 1d
    // segment re-crossing the origin ~sqrt(block length) times), so the
    // bounded statistic is the number of dyadic blocks containing a late
    // visit; the median of the raw counts is still 0.
    let rule = AdaptedRule::TimeBlocks;
    let measures = rule.default_measures(2);
    let mut late_returns = Vec::with_capacity(200);
    let mut late_blocks = Vec::with_capacity(200);
    for seed in 0..200u64 {
        let run = simulate_adapted(&rule, &measures, 1 << 18, stream_seed(718, seed)).unwrap();
        late_returns.push(run.returns_after(1 << 10));
        let mut blocks: Vec<u32> = run
            .return_times
            .iter()
            .filter(|&&t| t > 1 << 10)
            .map(|&t| 63 - t.leading_zeros())
            .collect();
        blocks.dedup();
        late_blocks.push(blocks.len() as u64);
    }
    late_returns.sort_unstable();
    late_blocks.sort_unstable();
    let median_returns = late_returns[late_returns.len() / 2];
    let median_blocks = late_blocks[late_blocks.len() / 2];
    let max_blocks = *late_blocks.last().unwrap();
    assert_eq!(median_returns, 0, "median late returns {median_returns}");
    assert_eq!(median_blocks, 0);
    assert!(max_blocks <= 5, "max late visit episodes {max_blocks}");
}
