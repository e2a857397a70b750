//! Trajectory records and seed plumbing shared by the simulators.

/// Seed for the `index`-th stream of a master seed.
///
/// Streams are split deterministically by index; the SplitMix64 finalizer
/// keeps ensembles of different master seeds from sharing streams.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One recorded trajectory of a seeded walk, with summary statistics.
///
/// Positions are integer lattice vectors (group walks record the marker).
#[derive(Debug, Clone)]
pub struct WalkSample {
    /// Seed that produced this sample.
    pub seed: u64,
    /// Number of steps taken.
    pub n_steps: u64,
    /// Position after the last step.
    pub final_position: Vec<i64>,
    /// Number of times the walk sat at the origin at a time `t >= 1`.
    pub returns_to_origin: u64,
    /// Largest Euclidean norm seen along the trajectory.
    pub max_radius: f64,
    /// Optional subsampled trace `(t, position)` for dumping.
    pub trace: Vec<(u64, Vec<i64>)>,
}

impl WalkSample {
    /// Euclidean norm of the final position.
    pub fn final_radius(&self) -> f64 {
        self.final_position
            .iter()
            .map(|&x| (x as f64) * (x as f64))
            .sum::<f64>()
            .sqrt()
    }

    /// l1 norm of the final position.
    pub fn final_l1(&self) -> i64 {
        self.final_position.iter().map(|x| x.abs()).sum()
    }
}
