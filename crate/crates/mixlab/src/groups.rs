//! Random walks on infinite groups, generated on the fly: speed and
//! entropy estimation, exact small-time distributions, the bounded
//! harmonic function correspondence at desk scale, and walks on the
//! lamplighter groups over the integer lattices.
//!
//! Three model families are built in:
//!
//! * `Z^d` with the coordinate generators (exact l1 word length);
//! * the `d`-regular tree, tracked radially (spheres are equivalent under
//!   the vertex symmetry, so the radial law determines everything);
//! * the lamplighter group `G_d` over `Z^d`, whose generators either move
//!   the marker or switch the lamp under it.
//!
//! Word lengths in `G_d` for `d >= 2` hide a travelling-salesman problem,
//! so those models report certified lower/upper intervals instead of exact
//! values; `G_1` has an exact formula, validated against breadth-first
//! search on the Cayley ball. Entropies are reported in nats.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chain::FiniteChain;
use crate::error::{MixError, Result};
use crate::walk::{stream_seed, WalkSample};

/// Word length of a group element: exact, or a certified interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordLength {
    Exact(u64),
    Interval { lower: u64, upper: u64 },
}

impl WordLength {
    pub fn lower(&self) -> u64 {
        match *self {
            WordLength::Exact(v) => v,
            WordLength::Interval { lower, .. } => lower,
        }
    }

    pub fn upper(&self) -> u64 {
        match *self {
            WordLength::Exact(v) => v,
            WordLength::Interval { upper, .. } => upper,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, WordLength::Exact(_))
    }
}

/// A group random-walk model: a state, a seeded step, and a word-length
/// evaluator. The generator set is symmetric in every builtin model.
pub trait WalkModel {
    type State: Clone;
    fn origin(&self) -> Self::State;
    fn step<R: Rng>(&self, state: &mut Self::State, rng: &mut R);
    fn word_length(&self, state: &Self::State) -> WordLength;
    /// Number of generators (graph degree of the non-lazy walk).
    fn degree(&self) -> usize;
}

/// Simple random walk on `Z^d` with the `2d` coordinate generators.
#[derive(Debug, Clone, Copy)]
pub struct LatticeModel {
    pub d: usize,
    pub lazy: bool,
}

impl LatticeModel {
    pub fn new(d: usize, lazy: bool) -> Result<Self> {
        if d == 0 {
            return Err(MixError::Argument("lattice dimension must be >= 1".into()));
        }
        Ok(LatticeModel { d, lazy })
    }
}

impl WalkModel for LatticeModel {
    type State = Vec<i64>;

    fn origin(&self) -> Vec<i64> {
        vec![0; self.d]
    }

    fn step<R: Rng>(&self, state: &mut Vec<i64>, rng: &mut R) {
        if self.lazy && rng.gen::<f64>() < 0.5 {
            return;
        }
        let axis = rng.gen_range(0..self.d);
        if rng.gen::<bool>() {
            state[axis] += 1;
        } else {
            state[axis] -= 1;
        }
    }

    fn word_length(&self, state: &Vec<i64>) -> WordLength {
        WordLength::Exact(state.iter().map(|x| x.unsigned_abs()).sum())
    }

    fn degree(&self) -> usize {
        2 * self.d
    }
}

/// Simple random walk on the `d`-regular tree, represented by its distance
/// from the root. Within a sphere all vertices are equivalent, so the
/// radial walk carries the full law of `|X_n|`.
#[derive(Debug, Clone, Copy)]
pub struct TreeModel {
    pub d: usize,
    pub lazy: bool,
}

impl TreeModel {
    pub fn new(d: usize, lazy: bool) -> Result<Self> {
        if d < 3 {
            return Err(MixError::Argument("tree degree must be >= 3".into()));
        }
        Ok(TreeModel { d, lazy })
    }
}

impl WalkModel for TreeModel {
    type State = u64;

    fn origin(&self) -> u64 {
        0
    }

    fn step<R: Rng>(&self, state: &mut u64, rng: &mut R) {
        if self.lazy && rng.gen::<f64>() < 0.5 {
            return;
        }
        if *state == 0 {
            *state = 1;
        } else if rng.gen_range(0..self.d) == 0 {
            *state -= 1;
        } else {
            *state += 1;
        }
    }

    fn word_length(&self, state: &u64) -> WordLength {
        WordLength::Exact(*state)
    }

    fn degree(&self) -> usize {
        self.d
    }
}

/// An element of the lamplighter group over `Z^d`: the finite set of lit
/// lamps plus the marker position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LampGroupElement {
    pub on_lamps: BTreeSet<Vec<i64>>,
    pub marker: Vec<i64>,
}

/// The lamplighter group `G_d` over `Z^d` with its `2d + 1` generators:
/// move the marker along a coordinate, or switch the lamp under it.
#[derive(Debug, Clone, Copy)]
pub struct LampGroupModel {
    pub d: usize,
    pub lazy: bool,
}

impl LampGroupModel {
    pub fn new(d: usize, lazy: bool) -> Result<Self> {
        if d == 0 {
            return Err(MixError::Argument(
                "lamp group dimension must be >= 1".into(),
            ));
        }
        Ok(LampGroupModel { d, lazy })
    }
}

impl WalkModel for LampGroupModel {
    type State = LampGroupElement;

    fn origin(&self) -> LampGroupElement {
        LampGroupElement {
            on_lamps: BTreeSet::new(),
            marker: vec![0; self.d],
        }
    }

    fn step<R: Rng>(&self, state: &mut LampGroupElement, rng: &mut R) {
        if self.lazy && rng.gen::<f64>() < 0.5 {
            return;
        }
        let gen = rng.gen_range(0..(2 * self.d + 1));
        if gen == 2 * self.d {
            // Switch the lamp at the marker.
            if !state.on_lamps.remove(&state.marker) {
                state.on_lamps.insert(state.marker.clone());
            }
        } else {
            let axis = gen / 2;
            if gen % 2 == 0 {
                state.marker[axis] += 1;
            } else {
                state.marker[axis] -= 1;
            }
        }
    }

    fn word_length(&self, state: &LampGroupElement) -> WordLength {
        if self.d == 1 {
            WordLength::Exact(g1_word_length(
                state.on_lamps.iter().map(|v| v[0]),
                state.marker[0],
            ))
        } else {
            WordLength::Interval {
                lower: lamp_length_lower(state),
                upper: lamp_length_upper(state),
            }
        }
    }

    fn degree(&self) -> usize {
        2 * self.d + 1
    }
}

/// Exact word length in `G_1`: every lit lamp costs one switch, and the
/// marker must sweep the interval spanned by the lamps, the origin and its
/// final position, in the cheaper of the two sweep orders.
pub fn g1_word_length(lamps: impl IntoIterator<Item = i64>, marker: i64) -> u64 {
    let mut lo = 0i64.min(marker);
    let mut hi = 0i64.max(marker);
    let mut switches = 0u64;
    for lamp in lamps {
        lo = lo.min(lamp);
        hi = hi.max(lamp);
        switches += 1;
    }
    let left_first = (-lo) + (hi - lo) + (hi - marker);
    let right_first = hi + (hi - lo) + (marker - lo);
    switches + left_first.min(right_first) as u64
}

/// Certified lower bound on the `G_d` word length: one switch per lit
/// lamp, plus travel at least the marker displacement, at least any
/// through-lamp detour, and at least enough moves to visit every required
/// site.
pub fn lamp_length_lower(state: &LampGroupElement) -> u64 {
    let l1 = |v: &[i64]| -> u64 { v.iter().map(|x| x.unsigned_abs()).sum() };
    let l1_diff =
        |a: &[i64], b: &[i64]| -> u64 { a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).sum() };
    let switches = state.on_lamps.len() as u64;
    let marker_dist = l1(&state.marker);
    let detour = state
        .on_lamps
        .iter()
        .map(|s| l1(s) + l1_diff(s, &state.marker))
        .max()
        .unwrap_or(0);
    // Visiting k distinct sites takes at least k - 1 moves.
    let mut sites: BTreeSet<&Vec<i64>> = state.on_lamps.iter().collect();
    let origin = vec![0; state.marker.len()];
    sites.insert(&origin);
    sites.insert(&state.marker);
    let visit_moves = sites.len() as u64 - 1;
    switches + marker_dist.max(detour).max(visit_moves)
}

/// Upper bound on the `G_d` word length from the greedy nearest-neighbor
/// tour: visit lamps in nearest-first order, switch each once, end at the
/// marker.
pub fn lamp_length_upper(state: &LampGroupElement) -> u64 {
    let l1_diff =
        |a: &[i64], b: &[i64]| -> u64 { a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).sum() };
    let mut pos = vec![0i64; state.marker.len()];
    let mut remaining: Vec<&Vec<i64>> = state.on_lamps.iter().collect();
    let mut travel = 0u64;
    while !remaining.is_empty() {
        let (idx, dist) = remaining
            .iter()
            .enumerate()
            .map(|(i, s)| (i, l1_diff(s, &pos)))
            .min_by_key(|&(i, d)| (d, i))
            .unwrap();
        travel += dist;
        pos = remaining.swap_remove(idx).clone();
    }
    travel += l1_diff(&state.marker, &pos);
    state.on_lamps.len() as u64 + travel
}

/// Empirical speed estimate: mean of `|X_n| / n` over independent seeded
/// walks, with its standard error. Models with interval word lengths get
/// a lower and an upper estimate; exact models collapse the two.
#[derive(Debug, Clone, Copy)]
pub struct SpeedEstimate {
    pub v_hat: f64,
    pub stderr: f64,
    pub v_hat_upper: f64,
    pub stderr_upper: f64,
    pub exact_lengths: bool,
}

/// Run `n_walks` independent walks of `n_steps` steps each.
pub fn speed_estimate<M: WalkModel>(
    model: &M,
    n_steps: u64,
    n_walks: u64,
    seed: u64,
) -> Result<SpeedEstimate> {
    if n_steps == 0 || n_walks == 0 {
        return Err(MixError::Argument(
            "need n_steps >= 1 and n_walks >= 1".into(),
        ));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut sum_up = 0.0;
    let mut sum_up_sq = 0.0;
    let mut exact = true;
    for walk in 0..n_walks {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, walk));
        let mut state = model.origin();
        for _ in 0..n_steps {
            model.step(&mut state, &mut rng);
        }
        let len = model.word_length(&state);
        exact &= len.is_exact();
        let lo = len.lower() as f64 / n_steps as f64;
        let hi = len.upper() as f64 / n_steps as f64;
        sum += lo;
        sum_sq += lo * lo;
        sum_up += hi;
        sum_up_sq += hi * hi;
    }
    let n = n_walks as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    let mean_up = sum_up / n;
    let var_up = (sum_up_sq / n - mean_up * mean_up).max(0.0);
    Ok(SpeedEstimate {
        v_hat: mean,
        stderr: (var / n).sqrt(),
        v_hat_upper: mean_up,
        stderr_upper: (var_up / n).sqrt(),
        exact_lengths: exact,
    })
}

/// Exact law of the lattice walk at time `n`, on the grid `[-n, n]^d`.
#[derive(Debug, Clone)]
pub struct LatticeDistribution {
    pub d: usize,
    pub n: u64,
    side: usize,
    probs: Vec<f64>,
}

impl LatticeDistribution {
    fn index_of(&self, point: &[i64]) -> Option<usize> {
        let half = self.n as i64;
        let mut idx = 0usize;
        let mut stride = 1usize;
        for &c in point {
            if c.abs() > half {
                return None;
            }
            idx += (c + half) as usize * stride;
            stride *= self.side;
        }
        Some(idx)
    }

    pub fn prob(&self, point: &[i64]) -> f64 {
        self.index_of(point).map_or(0.0, |i| self.probs[i])
    }

    /// Iterate `(point, probability)` over nonzero cells in index order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<i64>, f64)> + '_ {
        let half = self.n as i64;
        let side = self.side;
        let d = self.d;
        self.probs.iter().enumerate().filter_map(move |(idx, &p)| {
            if p == 0.0 {
                return None;
            }
            let mut point = Vec::with_capacity(d);
            let mut rest = idx;
            for _ in 0..d {
                point.push((rest % side) as i64 - half);
                rest /= side;
            }
            Some((point, p))
        })
    }

    /// Entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }

    /// Expected l1 word length.
    pub fn mean_word_length(&self) -> f64 {
        self.iter()
            .map(|(x, p)| p * x.iter().map(|c| c.abs()).sum::<i64>() as f64)
            .sum()
    }

    /// Expected squared Euclidean norm.
    pub fn mean_square_radius(&self) -> f64 {
        self.iter()
            .map(|(x, p)| p * x.iter().map(|c| (c * c) as f64).sum::<f64>())
            .sum()
    }

    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|p| **p > 0.0).count()
    }
}

/// Exact convolution of the lattice walk law out to time `n`.
pub fn lattice_exact_distribution(model: &LatticeModel, n: u64) -> Result<LatticeDistribution> {
    let d = model.d;
    let side = 2 * n as usize + 1;
    let cells = side.checked_pow(d as u32).filter(|&c| c <= 50_000_000);
    let cells = cells
        .ok_or_else(|| MixError::SizeCap(format!("lattice law grid for d={d}, n={n} too large")))?;
    let mut cur = vec![0.0f64; cells];
    let center: Vec<i64> = vec![0; d];
    let mut dist = LatticeDistribution {
        d,
        n,
        side,
        probs: cur.clone(),
    };
    let origin_idx = dist.index_of(&center).unwrap();
    cur[origin_idx] = 1.0;
    let mut next = vec![0.0f64; cells];
    let strides: Vec<usize> = (0..d)
        .scan(1usize, |acc, _| {
            let v = *acc;
            *acc *= side;
            Some(v)
        })
        .collect();
    let move_p = if model.lazy {
        0.5 / (2.0 * d as f64)
    } else {
        1.0 / (2.0 * d as f64)
    };
    for _ in 0..n {
        next.fill(0.0);
        for idx in 0..cells {
            let w = cur[idx];
            if w == 0.0 {
                continue;
            }
            if model.lazy {
                next[idx] += 0.5 * w;
            }
            let mut rest = idx;
            for axis in 0..d {
                let coord = rest % side;
                rest /= side;
                // Support never reaches the grid edge mid-evolution.
                debug_assert!(coord > 0 && coord + 1 < side);
                next[idx - strides[axis]] += move_p * w;
                next[idx + strides[axis]] += move_p * w;
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    dist.probs = cur;
    Ok(dist)
}

/// Exact radial law of the tree walk plus the sphere sizes
/// `N_r = d (d-1)^(r-1)`.
#[derive(Debug, Clone)]
pub struct TreeRadialDistribution {
    pub d: usize,
    pub n: u64,
    /// `radial[r] = P(|X_n| = r)`
    pub radial: Vec<f64>,
}

impl TreeRadialDistribution {
    pub fn sphere_size_ln(&self, r: usize) -> f64 {
        if r == 0 {
            0.0
        } else {
            (self.d as f64).ln() + (r as f64 - 1.0) * ((self.d - 1) as f64).ln()
        }
    }

    /// Entropy in nats: radial entropy plus the in-sphere uniform part
    /// (vertices within a sphere are equally likely by symmetry).
    pub fn entropy(&self) -> f64 {
        let mut h = 0.0;
        for (r, &p) in self.radial.iter().enumerate() {
            if p > 0.0 {
                h += -p * p.ln() + p * self.sphere_size_ln(r);
            }
        }
        h
    }

    pub fn mean_radius(&self) -> f64 {
        self.radial
            .iter()
            .enumerate()
            .map(|(r, &p)| r as f64 * p)
            .sum()
    }
}

/// Exact radial law of the tree walk at time `n`.
pub fn tree_exact_distribution(model: &TreeModel, n: u64) -> Result<TreeRadialDistribution> {
    if n > 100_000 {
        return Err(MixError::SizeCap(
            "tree radial law capped at n = 100000".into(),
        ));
    }
    let d = model.d as f64;
    let len = n as usize + 1;
    let mut cur = vec![0.0f64; len + 1];
    cur[0] = 1.0;
    let mut next = vec![0.0f64; len + 1];
    let (stay, scale) = if model.lazy { (0.5, 0.5) } else { (0.0, 1.0) };
    for _ in 0..n {
        next.fill(0.0);
        for r in 0..len {
            let w = cur[r];
            if w == 0.0 {
                continue;
            }
            next[r] += stay * w;
            if r == 0 {
                next[1] += scale * w;
            } else {
                next[r + 1] += scale * w * (d - 1.0) / d;
                next[r - 1] += scale * w / d;
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur.truncate(len);
    Ok(TreeRadialDistribution {
        d: model.d,
        n,
        radial: cur,
    })
}

/// Exact entropy curve of a walk: `H(X_n)` for `n = 0..=n_max`, its
/// increments, and the expected word lengths.
#[derive(Debug, Clone)]
pub struct EntropyCurve {
    /// `entropies[n] = H(X_n)` in nats.
    pub entropies: Vec<f64>,
    /// `increments[n-1] = H(X_n) - H(X_{n-1})` for `n >= 1`.
    pub increments: Vec<f64>,
    /// `mean_lengths[n] = E|X_n|`.
    pub mean_lengths: Vec<f64>,
    /// Number of generators of the walk.
    pub degree: usize,
}

impl EntropyCurve {
    /// Largest violation of the non-increasing increment property
    /// (positive values mean a violation of the given size).
    pub fn max_increment_violation(&self) -> f64 {
        self.increments
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Entropy rate estimate: the final increment.
    pub fn h_estimate(&self) -> f64 {
        *self.increments.last().unwrap_or(&0.0)
    }
}

/// Entropy curve of the lattice walk.
pub fn lattice_entropy_curve(model: &LatticeModel, n_max: u64) -> Result<EntropyCurve> {
    let mut entropies = Vec::with_capacity(n_max as usize + 1);
    let mut mean_lengths = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        let dist = lattice_exact_distribution(model, n)?;
        entropies.push(dist.entropy());
        mean_lengths.push(dist.mean_word_length());
    }
    curve_from(entropies, mean_lengths, 2 * model.d)
}

/// Entropy curve of the tree walk.
pub fn tree_entropy_curve(model: &TreeModel, n_max: u64) -> Result<EntropyCurve> {
    let mut entropies = Vec::with_capacity(n_max as usize + 1);
    let mut mean_lengths = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        let dist = tree_exact_distribution(model, n)?;
        entropies.push(dist.entropy());
        mean_lengths.push(dist.mean_radius());
    }
    curve_from(entropies, mean_lengths, model.d)
}

fn curve_from(entropies: Vec<f64>, mean_lengths: Vec<f64>, degree: usize) -> Result<EntropyCurve> {
    let increments: Vec<f64> = entropies.windows(2).map(|w| w[1] - w[0]).collect();
    let curve = EntropyCurve {
        entropies,
        increments,
        mean_lengths,
        degree,
    };
    // Exact curves must have non-increasing increments; a violation means
    // the computation (not the walk) is broken.
    let v = curve.max_increment_violation();
    if v > 1e-9 {
        return Err(MixError::ClaimViolation(format!(
            "entropy increments rose by {v}"
        )));
    }
    Ok(curve)
}

/// One row of the entropy-speed bridge report.
#[derive(Debug, Clone, Copy)]
pub struct KvvRow {
    pub n: u64,
    pub entropy: f64,
    pub mean_length: f64,
    /// `(ln 2 + H(X_n)) / n`
    pub bridge1_lhs: f64,
    /// `(E|X_n|)^2 / (2 n^2)`
    pub bridge1_rhs: f64,
    /// `E[|X_n| + 1] ln(2 deg) / n - H(X_n) / n` (must be >= 0)
    pub bridge2_gap: f64,
}

impl KvvRow {
    pub fn holds(&self, tol: f64) -> bool {
        self.bridge1_lhs >= self.bridge1_rhs - tol && self.bridge2_gap >= -tol
    }
}

/// Evaluate both finite-`n` bridges between entropy and speed on an exact
/// entropy curve.
pub fn kvv_cross_check(curve: &EntropyCurve) -> Vec<KvvRow> {
    let ln2 = std::f64::consts::LN_2;
    let log2d = (2.0 * curve.degree as f64).ln();
    (1..curve.entropies.len())
        .map(|n| {
            let nf = n as f64;
            let h = curve.entropies[n];
            let e = curve.mean_lengths[n];
            KvvRow {
                n: n as u64,
                entropy: h,
                mean_length: e,
                bridge1_lhs: (ln2 + h) / nf,
                bridge1_rhs: e * e / (2.0 * nf * nf),
                bridge2_gap: (e + 1.0) * log2d / nf - h / nf,
            }
        })
        .collect()
}

/// Max residual `|u(x) - (Pu)(x)|` over the interior states, plus a flag
/// warning that the interior touches the truncation boundary (no buffer
/// of non-interior states separates it from the edge of the domain).
pub fn harmonic_check(chain: &FiniteChain, u: &[f64], interior: &[usize]) -> Result<(f64, bool)> {
    let n = chain.n_states();
    if u.len() != n {
        return Err(MixError::Dimension("function length != n_states".into()));
    }
    let pu = chain.apply(u);
    let mut max_residual = 0.0f64;
    for &x in interior {
        if x >= n {
            return Err(MixError::Argument(format!(
                "interior state {x} out of range"
            )));
        }
        max_residual = max_residual.max((u[x] - pu[x]).abs());
    }
    let boundary_warning = interior.len() == n;
    Ok((max_residual, boundary_warning))
}

/// Outcome of a lamplighter-group walk.
#[derive(Debug, Clone)]
pub struct LampWalkResult {
    pub sample: WalkSample,
    /// Number of lamps on at the end.
    pub lamps_on: u64,
    /// Word length of the final element (exact for `d = 1`).
    pub length: WordLength,
}

/// Simulate the generator walk on `G_d` and report the lamps-on count,
/// the marker displacement and the word-length bounds.
pub fn lamp_group_walk(d: usize, n_steps: u64, seed: u64) -> Result<LampWalkResult> {
    let model = LampGroupModel::new(d, false)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = model.origin();
    let mut returns = 0u64;
    let mut max_radius = 0.0f64;
    for _ in 0..n_steps {
        model.step(&mut state, &mut rng);
        let r2: f64 = state.marker.iter().map(|&x| (x * x) as f64).sum();
        max_radius = max_radius.max(r2.sqrt());
        if state.marker.iter().all(|&x| x == 0) && state.on_lamps.is_empty() {
            returns += 1;
        }
    }
    let length = model.word_length(&state);
    Ok(LampWalkResult {
        sample: WalkSample {
            seed,
            n_steps,
            final_position: state.marker.clone(),
            returns_to_origin: returns,
            max_radius,
            trace: Vec::new(),
        },
        lamps_on: state.on_lamps.len() as u64,
        length,
    })
}
