//! Executable couplings and strong stationary times.
//!
//! The cycle coupling moves exactly one of the two walks at each step
//! (four equally likely cases), so the clockwise difference performs a
//! non-lazy gambler's ruin absorbed at `{0, n}`. The torus coupling applies
//! the same trick coordinate-wise behind a uniformly chosen coordinate.
//!
//! For stopping rules, the hypercube refresh time is simulated directly
//! (with its antipodal halting state), and a generic separation-optimal
//! strong stationary time is realized for any small chain by sequential
//! rejection against precomputed separation profiles: the rule stops at
//! time `t` in state `y` with conditional probability chosen so that
//! `P[tau > t] = s_x(t)` holds exactly. On wreath products, waiting for
//! the cover time and then running such a rule from the marker position
//! yields the lamplighter strong stationary time.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::chain::{DistanceScan, FiniteChain};
use crate::error::{MixError, Result};
use crate::graphs::{decode_lamp_state, encode_lamp_state, lamplighter_chain, lazy_srw, Graph};
use crate::spectral::cover_tail_exact;

/// A coupled pair of cycle trajectories.
#[derive(Debug, Clone)]
pub struct CoupledTrajectory {
    pub x_path: Vec<u32>,
    pub y_path: Vec<u32>,
    /// First meeting time, or `None` when the run hit its cap first
    /// (an open record; statistics treat it as censored).
    pub tau_couple: Option<u64>,
}

/// Stepper for the four-case cycle coupling. Once the walks meet they move
/// together, so each marginal stays a lazy simple random walk at all times.
pub struct CycleCoupling {
    n: u32,
    pub x: u32,
    pub y: u32,
}

impl CycleCoupling {
    pub fn new(n: usize, x0: usize, y0: usize) -> Result<Self> {
        if n < 3 {
            return Err(MixError::Construction("cycle coupling needs n >= 3".into()));
        }
        if x0 >= n || y0 >= n {
            return Err(MixError::Argument("start out of range".into()));
        }
        Ok(CycleCoupling {
            n: n as u32,
            x: x0 as u32,
            y: y0 as u32,
        })
    }

    pub fn coupled(&self) -> bool {
        self.x == self.y
    }

    pub fn step<R: Rng>(&mut self, rng: &mut R) {
        let n = self.n;
        if self.coupled() {
            // Joint lazy move.
            let u: f64 = rng.gen();
            if u < 0.5 {
                return;
            }
            let inc = if u < 0.75 { 1 } else { n - 1 };
            self.x = (self.x + inc) % n;
            self.y = self.x;
        } else {
            // Exactly one walk moves, by +-1, each case probability 1/4.
            let case = rng.gen_range(0..4u8);
            match case {
                0 => self.y = (self.y + 1) % n,
                1 => self.y = (self.y + n - 1) % n,
                2 => self.x = (self.x + 1) % n,
                _ => self.x = (self.x + n - 1) % n,
            }
        }
    }

    /// Clockwise difference `x - y` modulo `n`.
    pub fn difference(&self) -> u32 {
        (self.x + self.n - self.y) % self.n
    }
}

/// Run the cycle coupling until the walks meet or `t_max` elapses.
pub fn cycle_coupling_run(
    n: usize,
    x0: usize,
    y0: usize,
    seed: u64,
    t_max: u64,
) -> Result<CoupledTrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pair = CycleCoupling::new(n, x0, y0)?;
    let mut x_path = vec![pair.x];
    let mut y_path = vec![pair.y];
    let mut tau = if pair.coupled() { Some(0) } else { None };
    let mut t = 0u64;
    while tau.is_none() && t < t_max {
        pair.step(&mut rng);
        t += 1;
        x_path.push(pair.x);
        y_path.push(pair.y);
        if pair.coupled() {
            tau = Some(t);
        }
    }
    Ok(CoupledTrajectory {
        x_path,
        y_path,
        tau_couple: tau,
    })
}

/// A coupled pair of torus trajectories with per-coordinate meeting times.
#[derive(Debug, Clone)]
pub struct TorusCoupledTrajectory {
    pub x_path: Vec<Vec<u32>>,
    pub y_path: Vec<Vec<u32>>,
    pub tau_couple: Option<u64>,
    /// First agreement time of each coordinate.
    pub coord_tau: Vec<Option<u64>>,
}

/// Stepper for the coordinate-wise torus coupling: pick a uniform
/// coordinate; move both walks together on agreeing coordinates, and use
/// the cycle coupling's four cases on disagreeing ones.
pub struct TorusCoupling {
    n: u32,
    pub x: Vec<u32>,
    pub y: Vec<u32>,
}

impl TorusCoupling {
    pub fn new(n: usize, d: usize, x0: &[usize], y0: &[usize]) -> Result<Self> {
        if n < 3 || d < 1 {
            return Err(MixError::Construction(
                "torus coupling needs n >= 3, d >= 1".into(),
            ));
        }
        if x0.len() != d || y0.len() != d {
            return Err(MixError::Dimension("start dimension != d".into()));
        }
        if x0.iter().chain(y0).any(|&c| c >= n) {
            return Err(MixError::Argument("start coordinate out of range".into()));
        }
        Ok(TorusCoupling {
            n: n as u32,
            x: x0.iter().map(|&c| c as u32).collect(),
            y: y0.iter().map(|&c| c as u32).collect(),
        })
    }

    pub fn coupled(&self) -> bool {
        self.x == self.y
    }

    pub fn step<R: Rng>(&mut self, rng: &mut R) {
        let n = self.n;
        let i = rng.gen_range(0..self.x.len());
        if self.x[i] == self.y[i] {
            let u: f64 = rng.gen();
            if u < 0.5 {
                return;
            }
            let inc = if u < 0.75 { 1 } else { n - 1 };
            self.x[i] = (self.x[i] + inc) % n;
            self.y[i] = self.x[i];
        } else {
            let case = rng.gen_range(0..4u8);
            match case {
                0 => self.y[i] = (self.y[i] + 1) % n,
                1 => self.y[i] = (self.y[i] + n - 1) % n,
                2 => self.x[i] = (self.x[i] + 1) % n,
                _ => self.x[i] = (self.x[i] + n - 1) % n,
            }
        }
    }
}

/// Run the torus coupling until full agreement or `t_max`.
pub fn torus_coupling_run(
    n: usize,
    d: usize,
    x0: &[usize],
    y0: &[usize],
    seed: u64,
    t_max: u64,
) -> Result<TorusCoupledTrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pair = TorusCoupling::new(n, d, x0, y0)?;
    let mut coord_tau: Vec<Option<u64>> = (0..d)
        .map(|i| {
            if pair.x[i] == pair.y[i] {
                Some(0)
            } else {
                None
            }
        })
        .collect();
    let mut x_path = vec![pair.x.clone()];
    let mut y_path = vec![pair.y.clone()];
    let mut tau = if pair.coupled() { Some(0) } else { None };
    let mut t = 0u64;
    while tau.is_none() && t < t_max {
        pair.step(&mut rng);
        t += 1;
        x_path.push(pair.x.clone());
        y_path.push(pair.y.clone());
        for i in 0..d {
            if coord_tau[i].is_none() && pair.x[i] == pair.y[i] {
                coord_tau[i] = Some(t);
            }
        }
        if pair.coupled() {
            tau = Some(t);
        }
    }
    Ok(TorusCoupledTrajectory {
        x_path,
        y_path,
        tau_couple: tau,
        coord_tau,
    })
}

/// Outcome of one strong-stationary-time run.
#[derive(Debug, Clone)]
pub struct SSTRecord {
    /// The stopping time, in steps.
    pub tau: u64,
    /// State occupied when the rule stopped.
    pub state_at_tau: usize,
    /// Halting state when the construction has one (hitting it forces the
    /// stop); the generic rule records none.
    pub halting_state: Option<usize>,
    /// Diagnostic: true if the halting state was visited strictly before
    /// the stop (must never happen).
    pub halting_violation: bool,
}

/// Simulate the coordinate-refresh representation of the lazy hypercube
/// walk from `x0` (a `d`-bit state) and stop when every coordinate has
/// been refreshed at least once. The antipode of `x0` is a halting state.
pub fn hypercube_refresh_sst(d: usize, x0: usize, seed: u64) -> Result<SSTRecord> {
    if d < 1 || d > 63 {
        return Err(MixError::Argument("need 1 <= d <= 63".into()));
    }
    if x0 >> d != 0 {
        return Err(MixError::Argument("start out of range".into()));
    }
    let full = (1u64 << d) - 1;
    let antipode = (x0 as u64 ^ full) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = x0 as u64;
    let mut refreshed: u64 = 0;
    let mut t = 0u64;
    let mut halting_violation = false;
    while refreshed != full {
        let coord = rng.gen_range(0..d);
        let bit = 1u64 << coord;
        if rng.gen::<f64>() < 0.5 {
            state |= bit;
        } else {
            state &= !bit;
        }
        refreshed |= bit;
        t += 1;
        if state == antipode as u64 && refreshed != full {
            halting_violation = true;
        }
    }
    Ok(SSTRecord {
        tau: t,
        state_at_tau: state as usize,
        halting_state: Some(antipode),
        halting_violation,
    })
}

/// Inclusion-exclusion tail of the coordinate-refresh time:
/// `P[tau > t] = sum_{j>=1} (-1)^(j+1) C(d,j) (1 - j/d)^t`.
pub fn refresh_tail(d: usize, t: u64) -> f64 {
    let mut acc = 0.0;
    let mut sign = 1.0;
    for j in 1..=d {
        let c = crate::numeric::binomial_u128(d as u64, j as u64) as f64;
        acc += sign * c * (1.0 - j as f64 / d as f64).powi(t as i32);
        sign = -sign;
    }
    acc
}

/// Generic separation-optimal strong stationary time for one starting
/// state of a small ergodic chain.
///
/// Precomputes the row powers `P^t(x, .)` and the separation profile
/// `sigma_t = s_x(t)`; the stopping rule then stops at time `t` in state
/// `y` with conditional probability
///
/// ```text
/// (sigma_{t-1} - sigma_t) pi(y) / ( P^t(x,y) - (1 - sigma_{t-1}) pi(y) )
/// ```
///
/// which realizes `P[tau > t] = s_x(t)` exactly. No halting state is
/// recorded: the rule is separation optimal without one.
pub struct SeparationOptimalSst {
    start: usize,
    pi: Vec<f64>,
    /// rows[t] = P^t(start, .)
    rows: Vec<Vec<f64>>,
    /// sigma[t] = s_start(t)
    sigma: Vec<f64>,
}

/// Precomputation cap for separation profiles.
const SST_TABLE_CAP: usize = 200_000;

impl SeparationOptimalSst {
    pub fn new(chain: &FiniteChain, start: usize) -> Result<Self> {
        let n = chain.n_states();
        if n > 4096 {
            return Err(MixError::SizeCap(
                "separation-optimal rule needs exact tables; capped at 4096 states".into(),
            ));
        }
        let pi = chain.stationary()?.to_vec();
        if pi.iter().any(|p| *p <= 0.0) {
            return Err(MixError::Domain("needs strictly positive pi".into()));
        }
        let mut scan = DistanceScan::single_start(chain, start);
        let mut rows = Vec::new();
        let mut sigma = Vec::new();
        loop {
            let row = scan.rows()[0].clone();
            let s = row
                .iter()
                .zip(&pi)
                .map(|(p, q)| 1.0 - p / q)
                .fold(f64::NEG_INFINITY, f64::max)
                .max(0.0);
            rows.push(row);
            sigma.push(s);
            if s < 1e-14 {
                break;
            }
            if sigma.len() > SST_TABLE_CAP {
                return Err(MixError::NoConvergence {
                    what: "separation profile did not vanish".into(),
                    cap: SST_TABLE_CAP as u64,
                });
            }
            scan.step();
        }
        Ok(SeparationOptimalSst {
            start,
            pi,
            rows,
            sigma,
        })
    }

    /// `P[tau > t]`, equal to the separation profile by construction.
    pub fn tail(&self, t: usize) -> f64 {
        if t < self.sigma.len() {
            self.sigma[t]
        } else {
            0.0
        }
    }

    /// Conditional stop probability in state `y` at time `t`, given the
    /// rule has not yet stopped.
    fn stop_probability(&self, t: usize, y: usize) -> f64 {
        let sigma_prev = if t == 0 { 1.0 } else { self.sigma[t - 1] };
        let sigma_t = self.tail(t);
        let release = (sigma_prev - sigma_t) * self.pi[y];
        if release <= 0.0 {
            return 0.0;
        }
        let not_stopped =
            self.rows[t.min(self.rows.len() - 1)][y] - (1.0 - sigma_prev) * self.pi[y];
        if not_stopped <= 0.0 {
            return 1.0;
        }
        (release / not_stopped).clamp(0.0, 1.0)
    }

    /// Run the rule on a freshly sampled trajectory.
    pub fn run<R: Rng>(&self, chain: &FiniteChain, rng: &mut R) -> SSTRecord {
        let mut state = self.start;
        let mut t = 0usize;
        loop {
            if rng.gen::<f64>() < self.stop_probability(t, state) {
                return SSTRecord {
                    tau: t as u64,
                    state_at_tau: state,
                    halting_state: None,
                    halting_violation: false,
                };
            }
            if t + 1 >= self.rows.len() {
                // Residual tail below 1e-14: stop unconditionally.
                return SSTRecord {
                    tau: t as u64,
                    state_at_tau: state,
                    halting_state: None,
                    halting_violation: false,
                };
            }
            state = chain.sample_step(state, rng);
            t += 1;
        }
    }
}

/// Per-time comparison of the wreath separation distance against the
/// base-walk cover tail.
#[derive(Debug, Clone)]
pub struct SepLowerRow {
    pub t: u64,
    /// max over wreath starts of the separation distance
    pub sep_max: f64,
    /// max over base starts of `P[tau_cov > t]`
    pub cover_tail_max: f64,
    /// min over starts of `s_diamond(t) - P[tau_cov > t]` (>= 0 expected)
    pub min_margin: f64,
}

/// Exact check of the separation lower bound on `Z_2 wr G`: for every
/// start `(f0, x0)` and every `t <= t_max`,
/// `s_diamond_{(f0,x0)}(t) >= P_{x0}[tau_cov > t]`.
pub fn lamplighter_sep_lower(g: &Graph, t_max: u64) -> Result<Vec<SepLowerRow>> {
    let base = lazy_srw(g)?;
    let n = g.n_vertices();
    let wreath = lamplighter_chain(g)?;
    let tails: Vec<Vec<f64>> = (0..n)
        .map(|x0| cover_tail_exact(&base, x0, t_max))
        .collect::<Result<_>>()?;
    let mut scan = DistanceScan::all_starts(&wreath);
    let mut rows = Vec::with_capacity(t_max as usize + 1);
    for t in 0..=t_max {
        let sep = scan.sep_per_start()?;
        let mut sep_max: f64 = 0.0;
        let mut tail_max: f64 = 0.0;
        let mut min_margin = f64::INFINITY;
        for (id, s) in sep.iter().enumerate() {
            let (_, x0) = decode_lamp_state(id, 2, n);
            let tail = tails[x0][t as usize];
            sep_max = sep_max.max(*s);
            tail_max = tail_max.max(tail);
            min_margin = min_margin.min(s - tail);
        }
        rows.push(SepLowerRow {
            t,
            sep_max,
            cover_tail_max: tail_max,
            min_margin,
        });
        scan.step();
    }
    Ok(rows)
}

/// Sampler for the lamplighter strong stationary time
/// `tau = tau_cov + tau_G(X_{tau_cov})`: wait for the marker to cover the
/// base graph (all lamps refreshed), then run a separation-optimal rule
/// for the marker from wherever it stands.
pub struct LamplighterSstSampler {
    base: FiniteChain,
    n: usize,
    /// One separation-optimal rule per possible restart position.
    rules: Vec<SeparationOptimalSst>,
}

impl LamplighterSstSampler {
    pub fn new(g: &Graph) -> Result<Self> {
        let n = g.n_vertices();
        if n > 12 {
            return Err(MixError::Unsupported(
                "lamplighter stopping rule needs exact separation tables; |G| <= 12".into(),
            ));
        }
        let base = lazy_srw(g)?;
        let rules = (0..n)
            .map(|x| SeparationOptimalSst::new(&base, x))
            .collect::<Result<Vec<_>>>()?;
        Ok(LamplighterSstSampler { base, n, rules })
    }

    /// Run one trajectory; returns the stop record on the wreath state
    /// space (id encoded by `encode_lamp_state`) together with the cover
    /// time and the lamp configuration at covering.
    pub fn run(&self, x0: usize, f0: &[usize], seed: u64) -> LamplighterSstRun {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n;
        let mut lamps = f0.to_vec();
        let mut x = x0;
        let mut visited: u64 = 1 << x0;
        let full = (1u64 << n) - 1;
        let mut t = 0u64;
        // Phase 1: run the wreath dynamics until the marker covers G.
        while visited != full {
            let y = self.base.sample_step(x, &mut rng);
            lamps[x] = rng.gen_range(0..2);
            lamps[y] = rng.gen_range(0..2);
            x = y;
            visited |= 1 << x;
            t += 1;
        }
        let tau_cov = t;
        let lamps_at_cover = lamps.clone();
        // Phase 2: separation-optimal rule for the marker, lamps keep
        // refreshing along the way.
        let rule = &self.rules[x];
        let mut s = 0usize;
        let mut state = x;
        loop {
            if rng.gen::<f64>() < rule.stop_probability(s, state) {
                break;
            }
            if s + 1 >= rule.rows.len() {
                break;
            }
            let y = self.base.sample_step(state, &mut rng);
            lamps[state] = rng.gen_range(0..2);
            lamps[y] = rng.gen_range(0..2);
            state = y;
            s += 1;
            t += 1;
        }
        LamplighterSstRun {
            record: SSTRecord {
                tau: t,
                state_at_tau: encode_lamp_state(&lamps, state, 2, n),
                halting_state: None,
                halting_violation: false,
            },
            tau_cov,
            lamps_at_cover,
        }
    }
}

/// Result of one lamplighter stopping-rule trajectory.
#[derive(Debug, Clone)]
pub struct LamplighterSstRun {
    pub record: SSTRecord,
    pub tau_cov: u64,
    pub lamps_at_cover: Vec<usize>,
}

/// Chi-square goodness-of-fit p-value of observed counts against expected
/// probabilities. Cells with expected probability zero must be empty.
pub fn chi_square_p_value(observed: &[u64], expected_probs: &[f64]) -> Result<f64> {
    if observed.len() != expected_probs.len() {
        return Err(MixError::Dimension("chi-square shape mismatch".into()));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(MixError::Argument("no observations".into()));
    }
    let mut stat = 0.0;
    let mut df = 0i64;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        let e = p * total as f64;
        if e <= 0.0 {
            if o > 0 {
                return Ok(0.0);
            }
            continue;
        }
        stat += (o as f64 - e) * (o as f64 - e) / e;
        df += 1;
    }
    df -= 1;
    if df <= 0 {
        return Ok(1.0);
    }
    let dist = ChiSquared::new(df as f64)
        .map_err(|e| MixError::Argument(format!("chi-square df: {e}")))?;
    Ok(1.0 - dist.cdf(stat))
}
