//! Geometric lower bounds for random walks on transitive graphs: Dirichlet
//! forms, distance second moments, the diameter bound on relaxation and
//! mixing times, and the Foelner-set construction on the amenable lattice.
//!
//! Inner products here use counting measure; the transitive graphs in
//! scope have uniform stationary mass, so the choice only rescales both
//! sides of every ratio.

use crate::chain::FiniteChain;
use crate::error::{MixError, Result};
use crate::graphs::Graph;
use crate::spectral::{self, DEFAULT_EPS};

/// Dirichlet form `Q_n(f) = <(I - P^n) f, f>` with counting inner product,
/// evaluated with `n` matrix-vector products.
pub fn dirichlet_form(chain: &FiniteChain, f: &[f64], n: u64) -> Result<f64> {
    if f.len() != chain.n_states() {
        return Err(MixError::Dimension("function length != n_states".into()));
    }
    let mut g = f.to_vec();
    let mut tmp = vec![0.0; f.len()];
    for _ in 0..n {
        chain.apply_to_function(&g, &mut tmp);
        std::mem::swap(&mut g, &mut tmp);
    }
    Ok(f.iter()
        .zip(&g)
        .zip(f)
        .map(|((fi, gi), _)| fi * (fi - gi))
        .sum())
}

/// Consecutive differences `Delta_j = Q_{j+1}(f) - Q_j(f)` for
/// `j = 0..=j_max`, evaluated incrementally.
pub fn dirichlet_deltas(chain: &FiniteChain, f: &[f64], j_max: u64) -> Result<Vec<f64>> {
    if f.len() != chain.n_states() {
        return Err(MixError::Dimension("function length != n_states".into()));
    }
    // Delta_j = <P^j f, (I - P) f>.
    let pf = chain.apply(f);
    let imp: Vec<f64> = f.iter().zip(&pf).map(|(a, b)| a - b).collect();
    let mut g = f.to_vec();
    let mut tmp = vec![0.0; f.len()];
    let mut out = Vec::with_capacity(j_max as usize + 1);
    for _ in 0..=j_max {
        out.push(g.iter().zip(&imp).map(|(a, b)| a * b).sum());
        chain.apply_to_function(&g, &mut tmp);
        std::mem::swap(&mut g, &mut tmp);
    }
    Ok(out)
}

/// One row of the distance-moment report.
#[derive(Debug, Clone, Copy)]
pub struct DistanceMomentRow {
    pub n: u64,
    /// `E[rho(X_0, X_n)^2]` for the lazy walk, exact.
    pub mean_square_distance: f64,
    /// `n / (2 d)`
    pub lower_bound: f64,
    /// `(1/d) Q_n(f) / Q_1(f)` with `f` the second eigenfunction.
    pub eigen_ratio_bound: f64,
}

/// Exact check of the distance-moment lower bound on a vertex-transitive
/// graph: for the lazy walk and all `n <= t_rel`,
/// `E[rho(X_0,X_n)^2] >= n / (2 d)`, plus the sharper eigenfunction ratio.
pub fn distance_moment_check(g: &Graph) -> Result<Vec<DistanceMomentRow>> {
    if !g.is_regular() {
        return Err(MixError::Unsupported(
            "distance-moment check needs a vertex-transitive (regular) graph".into(),
        ));
    }
    let d = g.degree(0) as f64;
    let chain = crate::graphs::lazy_srw(g)?;
    let summary = spectral::spectrum(&chain)?;
    let dist = g.distances_from(0);
    let n_max = summary.t_rel.floor() as u64;
    let mut row_vec = vec![0.0; g.n_vertices()];
    row_vec[0] = 1.0;
    let mut tmp = vec![0.0; g.n_vertices()];
    let mut out = Vec::new();
    for n in 1..=n_max.max(1) {
        chain.step_row(&row_vec.clone(), &mut tmp);
        std::mem::swap(&mut row_vec, &mut tmp);
        let e_rho2: f64 = row_vec
            .iter()
            .zip(&dist)
            .map(|(p, &r)| p * (r as f64) * (r as f64))
            .sum();
        let lam = summary.lambda2;
        let ratio = (1.0 - lam.powi(n as i32)) / (1.0 - lam);
        out.push(DistanceMomentRow {
            n,
            mean_square_distance: e_rho2,
            lower_bound: n as f64 / (2.0 * d),
            eigen_ratio_bound: ratio / d,
        });
    }
    Ok(out)
}

/// Diameter bound report: `t_rel <= 2 d diam^2` and
/// `t_mix <= 2 d diam^2 ln |G|` for the lazy walk on a transitive graph.
#[derive(Debug, Clone, Copy)]
pub struct DiameterBoundReport {
    pub t_rel: f64,
    pub t_mix: u64,
    pub diameter: u32,
    pub degree: usize,
    pub rel_bound: f64,
    pub mix_bound: f64,
}

impl DiameterBoundReport {
    pub fn holds(&self) -> bool {
        self.t_rel <= self.rel_bound + 1e-9 && (self.t_mix as f64) <= self.mix_bound + 1e-9
    }
}

pub fn corollary_trel_diam(g: &Graph) -> Result<DiameterBoundReport> {
    if !g.is_regular() {
        return Err(MixError::Unsupported("needs a regular graph".into()));
    }
    let chain = crate::graphs::lazy_srw(g)?;
    let summary = spectral::spectrum(&chain)?;
    let diam = g.diameter()?;
    let degree = g.degree(0);
    let n = g.n_vertices() as f64;
    let rel_bound = 2.0 * degree as f64 * (diam as f64).powi(2);
    let mix_bound = rel_bound * n.ln();
    let t_mix = spectral::t_mix(
        &chain,
        DEFAULT_EPS,
        (rel_bound * n.ln()).ceil() as u64 * 4 + 16,
    )?;
    Ok(DiameterBoundReport {
        t_rel: summary.t_rel,
        t_mix,
        diameter: diam,
        degree,
        rel_bound,
        mix_bound,
    })
}

/// Scalar field on a centered square grid over `Z^2`, wide enough that
/// walk evolutions never feel the truncation (padding = step horizon).
#[derive(Debug, Clone)]
pub struct LatticeField {
    half: i64,
    side: usize,
    data: Vec<f64>,
}

impl LatticeField {
    pub fn zeros(half: i64) -> Self {
        let side = (2 * half + 1) as usize;
        LatticeField {
            half,
            side,
            data: vec![0.0; side * side],
        }
    }

    fn idx(&self, x: i64, y: i64) -> usize {
        ((y + self.half) as usize) * self.side + (x + self.half) as usize
    }

    pub fn get(&self, x: i64, y: i64) -> f64 {
        if x.abs() > self.half || y.abs() > self.half {
            0.0
        } else {
            self.data[self.idx(x, y)]
        }
    }

    pub fn set(&mut self, x: i64, y: i64, v: f64) {
        let i = self.idx(x, y);
        self.data[i] = v;
    }

    /// One step of the non-lazy simple random walk operator `P`.
    /// Exact on fields whose support stays one cell inside the grid.
    pub fn apply_srw(&self) -> LatticeField {
        let mut out = LatticeField::zeros(self.half);
        let side = self.side as i64;
        for yy in 0..side {
            for xx in 0..side {
                let i = (yy * side + xx) as usize;
                let up = if yy + 1 < side {
                    self.data[i + self.side]
                } else {
                    0.0
                };
                let down = if yy > 0 {
                    self.data[i - self.side]
                } else {
                    0.0
                };
                let right = if xx + 1 < side { self.data[i + 1] } else { 0.0 };
                let left = if xx > 0 { self.data[i - 1] } else { 0.0 };
                out.data[i] = 0.25 * (up + down + left + right);
            }
        }
        out
    }

    pub fn dot(&self, other: &LatticeField) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn axpy(&mut self, a: f64, other: &LatticeField) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn sub(&self, other: &LatticeField) -> LatticeField {
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x -= y;
        }
        out
    }
}

/// Foelner construction report on the `Z^2` box `[-k, k]^2`.
#[derive(Debug, Clone)]
pub struct FolnerReport {
    /// Edge-boundary-to-volume ratio of the box.
    pub delta: f64,
    /// `theta = || P psi - psi ||_2` for the normalized indicator.
    pub theta: f64,
    /// Dyadic index `m` found with `2 a_m - a_{m+1} >= 1 / (8 theta)`.
    pub m: u32,
    /// Achieved Rayleigh-type ratio `||(I-P) phi||^2 / <phi, (I-P) phi>`.
    pub ratio: f64,
    /// The claimed ceiling `32 theta`.
    pub bound: f64,
    /// `||(I-P) phi||^2 / Q_1(phi)`, for the distance-moment corollary.
    pub phi_defect_ratio: f64,
}

impl FolnerReport {
    pub fn holds(&self) -> bool {
        self.ratio <= self.bound + 1e-9 && self.theta * self.theta <= self.delta + 1e-12
    }
}

/// Build the normalized box indicator on `[-k, k]^2`, run the dyadic
/// search for `m` with `2 a_m - a_{m+1} >= 1/(8 theta)` where
/// `a_m = <phi_{2^m}, psi>`, `phi_j = sum_{i<j} P^i psi`, and return the
/// achieved ratio for `phi = phi_{2^m}` (claimed to be at most
/// `32 theta`). The grid is padded by the full search horizon so every
/// evolution is exact.
pub fn folner_ratio(k: i64) -> Result<FolnerReport> {
    if k < 1 {
        return Err(MixError::Argument("box half-side must be >= 1".into()));
    }
    for m_cap in [5u32, 7, 9] {
        match folner_ratio_with_horizon(k, m_cap) {
            Ok(report) => return Ok(report),
            Err(MixError::Horizon(_)) if m_cap < 9 => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

fn folner_ratio_with_horizon(k: i64, m_cap: u32) -> Result<FolnerReport> {
    let horizon = 1i64 << (m_cap + 1);
    let half = k + horizon + 1;
    let volume = ((2 * k + 1) * (2 * k + 1)) as f64;
    let boundary_edges = (4 * (2 * k + 1)) as f64;
    let delta = boundary_edges / volume;

    let mut psi = LatticeField::zeros(half);
    let w = 1.0 / volume.sqrt();
    for y in -k..=k {
        for x in -k..=k {
            psi.set(x, y, w);
        }
    }

    let p_psi = psi.apply_srw();
    let theta = p_psi.sub(&psi).norm_sq().sqrt();
    if theta >= 0.5 {
        return Err(MixError::Domain(format!(
            "theta = {theta} >= 1/2: box too small for the dyadic argument"
        )));
    }
    let target = 1.0 / (8.0 * theta);

    // a_m needs the correlation sums c_i = <P^i psi, psi>.
    let total_steps = 1usize << (m_cap + 1);
    let mut correlations = Vec::with_capacity(total_steps);
    let mut g = psi.clone();
    for _ in 0..total_steps {
        correlations.push(g.dot(&psi));
        g = g.apply_srw();
    }
    let a = |m: u32| -> f64 { correlations[..1 << m].iter().sum() };

    let mut ell = 0u32;
    while (1u64 << (ell + 1)) as f64 * theta < 0.5 {
        ell += 1;
    }
    let mut found = None;
    for m in ell..=m_cap.saturating_sub(1) {
        if 2.0 * a(m) - a(m + 1) >= target {
            found = Some(m);
            break;
        }
    }
    let m = found.ok_or_else(|| {
        MixError::Horizon(format!(
            "no dyadic index up to {m_cap} reached 2 a_m - a_(m+1) >= {target:.4} \
             (theta = {theta:.4}, a_{m_cap} = {:.4})",
            a(m_cap)
        ))
    })?;

    // phi = sum_{i < 2^m} P^i psi, evaluated afresh on the same grid.
    let steps = 1usize << m;
    let mut phi = LatticeField::zeros(half);
    let mut g = psi.clone();
    for _ in 0..steps {
        phi.axpy(1.0, &g);
        g = g.apply_srw();
    }
    let defect = phi.sub(&phi.apply_srw());
    let defect_norm_sq = defect.norm_sq();
    let energy = phi.dot(&defect);
    Ok(FolnerReport {
        delta,
        theta,
        m,
        ratio: defect_norm_sq / energy,
        bound: 32.0 * theta,
        phi_defect_ratio: defect_norm_sq / energy,
    })
}

/// Exact `E[rho(X_0, X_n)^2]` for the non-lazy walk on `Z^2` (graph
/// distance is the l1 norm), for the Foelner-side checks.
pub fn lattice_mean_square_distance(n: u64) -> Result<Vec<f64>> {
    let model = crate::groups::LatticeModel::new(2, false)?;
    let mut out = Vec::with_capacity(n as usize + 1);
    for t in 0..=n {
        let dist = crate::groups::lattice_exact_distribution(&model, t)?;
        let e: f64 = dist
            .iter()
            .map(|(x, p)| {
                let l1 = (x[0].abs() + x[1].abs()) as f64;
                p * l1 * l1
            })
            .sum();
        out.push(e);
    }
    Ok(out)
}
