//! Batch front-end for the chain laboratory.
//!
//! Every experiment is a subcommand; every run writes its result tables
//! (CSV or JSON) plus a `<command>_manifest.json` recording the version,
//! seed and parameters. Identical configuration and seed give byte
//! identical result files.
//!
//! Exit codes: 0 ok, 2 usage error, 3 size cap exceeded, 4 a checked
//! bound or assertion was violated, 1 other failures.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use mixlab::adapted::{
    excessive_measure_check, lyapunov_condition, normalize_spd_pair, simulate_adapted,
    superharmonicity_probe, AdaptedRule, PlaneKernel, StepMeasure,
};
use mixlab::chain::{optimal_coupling, tv_distance, DistanceScan, Distribution};
use mixlab::coupling::{
    cycle_coupling_run, hypercube_refresh_sst, torus_coupling_run, LamplighterSstSampler,
};
use mixlab::error::MixError;
use mixlab::geometry::{corollary_trel_diam, distance_moment_check, folner_ratio};
use mixlab::graphs::{
    complete, cycle, dary_tree_ball, hypercube, lamplighter_chain, lazy_srw, srw, torus, Graph,
};
use mixlab::groups::{
    lattice_entropy_curve, speed_estimate, tree_entropy_curve, LampGroupModel, LatticeModel,
    TreeModel,
};
use mixlab::longrange::{binomial_mixture_identity_check, support_distances, vc_bound_check};
use mixlab::spectral::{cover_time, hitting_times, spectrum, t_mix, t_sep, CoverMethod};

use output::{int, num, text, write_manifest, Format, Table};

#[derive(Parser)]
#[command(name = "mixlab", version, about = "Markov chain mixing laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for result files and the manifest.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Output format for result tables.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// 64-bit seed for every randomized procedure.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum GraphKind {
    Cycle,
    Torus,
    Hypercube,
    Complete,
    TreeBall,
}

#[derive(Debug, Args, Serialize)]
struct GraphArgs {
    /// Graph family.
    #[arg(long, value_enum)]
    graph: GraphKind,
    /// Side length (cycle, torus, complete).
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Dimension (torus, hypercube) or degree (tree-ball).
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Radius (tree-ball).
    #[arg(long, default_value_t = 3)]
    radius: usize,
}

impl GraphArgs {
    fn build(&self) -> mixlab::Result<Graph> {
        match self.graph {
            GraphKind::Cycle => cycle(self.n),
            GraphKind::Torus => torus(self.n, self.d),
            GraphKind::Hypercube => hypercube(self.d),
            GraphKind::Complete => complete(self.n),
            GraphKind::TreeBall => dary_tree_ball(self.d, self.radius),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum CoverKind {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum CouplingKind {
    Cycle,
    Torus,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum SstKind {
    Hypercube,
    Lamplighter,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ModelKind {
    Zd,
    Tree,
    Lamp,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum GeomCheck {
    Moments,
    Corollary,
    Folner,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum AdaptedAction {
    Simulate,
    Excessive,
    Lyapunov,
    Normalize,
    Probe,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum RuleKind {
    Blocks,
    FirstVisit,
    Region,
    MaxCoordinate,
}

#[derive(Subcommand)]
enum Command {
    /// Total variation distance and the optimal coupling of two measures.
    Tv {
        /// First measure, comma separated weights.
        #[arg(long)]
        mu: String,
        /// Second measure, comma separated weights.
        #[arg(long)]
        nu: String,
    },
    /// Distance-to-stationarity curves d(t), s(t) and the mixing times.
    Mix {
        #[command(flatten)]
        graph: GraphArgs,
        /// Threshold for both mixing and separation times.
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        /// Hard cap on the scan.
        #[arg(long, default_value_t = 1_000_000)]
        tcap: u64,
    },
    /// Eigenvalues, relaxation time and the per-t spectral inequality
    /// report of the lazy walk.
    Spectrum {
        #[command(flatten)]
        graph: GraphArgs,
        /// Horizon for the inequality and short-range reports.
        #[arg(long, default_value_t = 50)]
        report_tmax: u64,
    },
    /// All pairwise expected hitting times of the lazy walk.
    Hitting {
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Cover time of the walk, exact or Monte Carlo.
    Cover {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, value_enum, default_value_t = CoverKind::Exact)]
        method: CoverKind,
        /// Runs per start for the Monte Carlo method.
        #[arg(long, default_value_t = 1000)]
        samples: u64,
        /// Use the non-lazy walk.
        #[arg(long, default_value_t = false)]
        nonlazy: bool,
    },
    /// Lamplighter sweeps: mixing vs cover time, relaxation vs hitting
    /// time, and the separation lower bound, over base cycles.
    Lamplighter {
        /// Smallest base cycle.
        #[arg(long, default_value_t = 3)]
        nmin: usize,
        /// Largest base cycle.
        #[arg(long, default_value_t = 8)]
        nmax: usize,
    },
    /// Coupling simulations on the cycle or torus.
    Coupling {
        #[arg(long, value_enum, default_value_t = CouplingKind::Cycle)]
        kind: CouplingKind,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Starting separation (clockwise distance, applied per coordinate
        /// for the torus).
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        runs: u64,
        /// Cap per run; defaults to 100 n^2.
        #[arg(long)]
        tmax: Option<u64>,
    },
    /// Strong stationary time samples (hypercube refresh or lamplighter).
    Sst {
        #[arg(long, value_enum, default_value_t = SstKind::Hypercube)]
        kind: SstKind,
        /// Hypercube dimension or base cycle length.
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        runs: u64,
    },
    /// Long-range bounds: the binomial mixture identity and the
    /// Gaussian transition bound (violations file expected empty).
    Vc {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 50)]
        tmax: u64,
        /// Horizon for the exact mixture identity check.
        #[arg(long, default_value_t = 15)]
        identity_tmax: u64,
    },
    /// Speed of a group walk.
    Speed {
        #[arg(long, value_enum, default_value_t = ModelKind::Tree)]
        model: ModelKind,
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 1000)]
        steps: u64,
        #[arg(long, default_value_t = 1000)]
        walks: u64,
        #[arg(long, default_value_t = false)]
        lazy: bool,
    },
    /// Exact entropy curve of a group walk.
    Entropy {
        #[arg(long, value_enum, default_value_t = ModelKind::Zd)]
        model: ModelKind,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 30)]
        nmax: u64,
        #[arg(long, default_value_t = false)]
        lazy: bool,
    },
    /// Geometric bounds: distance moments, the diameter bound, or the
    /// Foelner construction.
    Geom {
        #[arg(long, value_enum)]
        check: GeomCheck,
        #[command(flatten)]
        graph: GraphArgs,
        /// Box half-side for the Foelner check.
        #[arg(long, default_value_t = 10)]
        k: i64,
    },
    /// Adapted-walk simulators and transience diagnostics.
    Adapted {
        #[arg(long, value_enum)]
        action: AdaptedAction,
        #[arg(long, value_enum, default_value_t = RuleKind::Region)]
        rule: RuleKind,
        #[arg(long, default_value_t = 100_000)]
        steps: u64,
        /// Off-axis probability of the max-coordinate rule.
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        /// Box radius for the excessive-measure check.
        #[arg(long, default_value_t = 50)]
        radius: i64,
        /// Exponent of the power-law test function.
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        /// Probe shells, comma separated.
        #[arg(long, default_value = "25,50,100")]
        shells: String,
        /// Diagonal of the first covariance (lyapunov / normalize).
        #[arg(long, default_value = "1,1,1")]
        m1: String,
        /// Diagonal of the second covariance (normalize).
        #[arg(long, default_value = "1,2,3")]
        m2: String,
    },
}

fn parse_weights(s: &str) -> Result<Vec<f64>, MixError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| MixError::Argument(format!("bad number {p:?}: {e}")))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                MixError::SizeCap(_) => ExitCode::from(3),
                MixError::Argument(_) | MixError::Dimension(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn io_err(e: std::io::Error) -> MixError {
    MixError::Argument(format!("io: {e}"))
}

fn run(cli: Cli) -> Result<ExitCode, MixError> {
    let dir = cli.out.clone();
    let format = cli.format;
    let seed = cli.seed;
    let mut violation = false;

    match &cli.command {
        Command::Tv { mu, nu } => {
            let mu_d = Distribution::new(parse_weights(mu)?)?;
            let nu_d = Distribution::new(parse_weights(nu)?)?;
            let tv = tv_distance(&mu_d, &nu_d)?;
            let coupling = optimal_coupling(&mu_d, &nu_d)?;
            let mut table = Table::new("tv", vec!["tv", "coupling_diagonal", "prob_unequal"]);
            table.push(vec![
                num(tv),
                num(1.0 - coupling.prob_unequal()),
                num(coupling.prob_unequal()),
            ]);
            table.write(&dir, format).map_err(io_err)?;
            write_manifest(&dir, "tv", seed, json!({"mu": mu, "nu": nu})).map_err(io_err)?;
            println!("tv = {tv}");
        }
        Command::Mix { graph, eps, tcap } => {
            let g = graph.build()?;
            let chain = lazy_srw(&g)?;
            let tm = t_mix(&chain, *eps, *tcap)?;
            let ts = t_sep(&chain, *eps, *tcap)?;
            let horizon = tm.max(ts) + 5;
            let mut scan = DistanceScan::all_starts(&chain);
            let mut curve = Table::new("mix_curve", vec!["t", "d", "s"]);
            for t in 0..=horizon {
                curve.push(vec![int(t), num(scan.d()?), num(scan.sep()?)]);
                scan.step();
            }
            curve.write(&dir, format).map_err(io_err)?;
            let mut summary = Table::new("mix_summary", vec!["eps", "t_mix", "t_sep"]);
            summary.push(vec![num(*eps), int(tm), int(ts)]);
            summary.write(&dir, format).map_err(io_err)?;
            write_manifest(
                &dir,
                "mix",
                seed,
                json!({"graph": graph, "eps": eps, "tcap": tcap}),
            )
            .map_err(io_err)?;
            println!("t_mix({eps}) = {tm}, t_sep({eps}) = {ts}");
        }
        Command::Spectrum { graph, report_tmax } => {
            let g = graph.build()?;
            let chain = lazy_srw(&g)?;
            let s = spectrum(&chain)?;
            let mut table = Table::new("spectrum", vec!["index", "eigenvalue"]);
            for (i, l) in s.eigenvalues.iter().enumerate() {
                table.push(vec![int(i as u64), num(*l)]);
            }
            table.write(&dir, format).map_err(io_err)?;
            let mut summary =
                Table::new("spectrum_summary", vec!["lambda2", "lambda_star", "t_rel"]);
            summary.push(vec![num(s.lambda2), num(s.lambda_star), num(s.t_rel)]);
            summary.write(&dir, format).map_err(io_err)?;
            // Per-t inequality report and the short-range diagonal check.
            let rows = mixlab::spectral::spectral_inequality_report(&chain, *report_tmax)?;
            let mut ineq = Table::new(
                "spectrum_inequalities",
                vec![
                    "t",
                    "d",
                    "s",
                    "sep_upper",
                    "lam2_pow",
                    "d_root",
                    "violations",
                ],
            );
            for r in &rows {
                violation |= r.violations > 0;
                ineq.push(vec![
                    int(r.t),
                    num(r.d),
                    num(r.s),
                    num(r.sep_upper),
                    num(r.lam2_pow),
                    num(r.d_root),
                    int(r.violations),
                ]);
            }
            ineq.write(&dir, format).map_err(io_err)?;
            let max_degree = (0..g.n_vertices()).map(|v| g.degree(v)).max().unwrap_or(0);
            let short = mixlab::spectral::short_range_check(&chain, max_degree, *report_tmax)?;
            violation |= !short.is_empty();
            let mut short_table = Table::new("spectrum_short_range", vec!["x", "t", "lhs", "rhs"]);
            for v in &short {
                short_table.push(vec![int(v.x as u64), int(v.t), num(v.lhs), num(v.rhs)]);
            }
            short_table.write(&dir, format).map_err(io_err)?;
            write_manifest(
                &dir,
                "spectrum",
                seed,
                json!({"graph": graph, "report_tmax": report_tmax}),
            )
            .map_err(io_err)?;
            println!("lambda2 = {}, t_rel = {}", s.lambda2, s.t_rel);
        }
        Command::Hitting { graph } => {
            let g = graph.build()?;
            let chain = lazy_srw(&g)?;
            let table_h = hitting_times(&chain)?;
            let mut table = Table::new("hitting", vec!["x", "y", "expected"]);
            for (x, row) in table_h.expected.iter().enumerate() {
                for (y, v) in row.iter().enumerate() {
                    table.push(vec![int(x as u64), int(y as u64), num(*v)]);
                }
            }
            table.write(&dir, format).map_err(io_err)?;
            write_manifest(&dir, "hitting", seed, json!({"graph": graph})).map_err(io_err)?;
            println!("t_hit = {}", table_h.t_hit());
        }
        Command::Cover {
            graph,
            method,
            samples,
            nonlazy,
        } => {
            let g = graph.build()?;
            let chain = if *nonlazy { srw(&g)? } else { lazy_srw(&g)? };
            let m = match method {
                CoverKind::Exact => CoverMethod::Exact,
                CoverKind::MonteCarlo => CoverMethod::MonteCarlo {
                    samples: *samples,
                    seed,
                },
            };
            let (value, stderr) = cover_time(&chain, m)?;
            let mut table = Table::new("cover", vec!["method", "value", "stderr"]);
            table.push(vec![
                text(match method {
                    CoverKind::Exact => "exact",
                    CoverKind::MonteCarlo => "monte_carlo",
                }),
                num(value),
                num(stderr),
            ]);
            table.write(&dir, format).map_err(io_err)?;
            write_manifest(
                &dir,
                "cover",
                seed,
                json!({"graph": graph, "method": method, "samples": samples, "nonlazy": nonlazy}),
            )
            .map_err(io_err)?;
            println!("t_cov = {value} (stderr {stderr})");
        }
        Command::Lamplighter { nmin, nmax } => {
            let mut table = Table::new(
                "lamplighter",
                vec![
                    "n",
                    "t_cov",
                    "t_mix_wreath",
                    "mix_lower",
                    "mix_upper",
                    "t_hit",
                    "t_rel_wreath",
                    "rel_upper",
                    "rel_ratio",
                ],
            );
            for n in *nmin..=*nmax {
                let g = cycle(n)?;
                let base = lazy_srw(&g)?;
                let (t_cov, _) = cover_time(&base, CoverMethod::Exact)?;
                let wreath = lamplighter_chain(&g)?;
                let tm = mixlab::spectral::t_mix_transitive(&wreath, 0.25, (100.0 * t_cov) as u64)?;
                let t_hit = hitting_times(&base)?.t_hit();
                let t_rel_wreath = mixlab::spectral::t_rel(&wreath)?;
                let rel_upper = 4.0 / std::f64::consts::LN_2 * t_hit;
                if (tm as f64) < t_cov / 12.0 || (tm as f64) > 18.0 * t_cov {
                    violation = true;
                }
                if t_rel_wreath > rel_upper {
                    violation = true;
                }
                table.push(vec![
                    int(n as u64),
                    num(t_cov),
                    int(tm),
                    num(t_cov / 12.0),
                    num(18.0 * t_cov),
                    num(t_hit),
                    num(t_rel_wreath),
                    num(rel_upper),
                    num(t_rel_wreath / t_hit),
                ]);
            }
            table.write(&dir, format).map_err(io_err)?;
            write_manifest(
                &dir,
                "lamplighter",
                seed,
                json!({"nmin": nmin, "nmax": nmax}),
            )
            .map_err(io_err)?;
            println!("lamplighter sweep n = {nmin}..={nmax} done");
        }
        Command::Coupling {
            kind,
            n,
            d,
            k,
            runs,
            tmax,
        } => {
            let cap = tmax.unwrap_or(100 * (*n as u64) * (*n as u64));
            let mut table = Table::new("coupling", vec!["run", "tau", "censored"]);
            let mut sum = 0.0;
            let mut closed = 0u64;
            for run in 0..*runs {
                let tau = match kind {
                    CouplingKind::Cycle => {
                        cycle_coupling_run(
                            *n,
                            *k % *n,
                            0,
                            mixlab::walk::stream_seed(seed, run),
                            cap,
                        )?
                        .tau_couple
                    }
                    CouplingKind::Torus => {
                        let x0 = vec![*k % *n; *d];
                        let y0 = vec![0usize; *d];
                        torus_coupling_run(
                            *n,
                            *d,
                            &x0,
                            &y0,
                            mixlab::walk::stream_seed(seed, run),
                            cap,
                        )?
                        .tau_couple
                    }
                };
                match tau {
                    Some(t) => {
                        sum += t as f64;
                        closed += 1;
                        table.push(vec![int(run), int(t), int(0)]);
                    }
                    None => table.push(vec![int(run), int(0), int(1)]),
                }
            }
            table.write(&dir, format).map_err(io_err)?;
            // Line-oriented trajectory dump of the first run: "t x y",
            // torus coordinates comma-joined within each field.
            let mut dump = String::new();
            match kind {
                CouplingKind::Cycle => {
                    let run = cycle_coupling_run(
                        *n,
                        *k % *n,
                        0,
                        mixlab::walk::stream_seed(seed, 0),
                        cap,
                    )?;
                    for (t, (x, y)) in run.x_path.iter().zip(&run.y_path).enumerate() {
                        dump.push_str(&format!("{t} {x} {y}\n"));
                    }
                }
                CouplingKind::Torus => {
                    let x0 = vec![*k % *n; *d];
                    let y0 = vec![0usize; *d];
                    let run = torus_coupling_run(
                        *n,
                        *d,
                        &x0,
                        &y0,
                        mixlab::walk::stream_seed(seed, 0),
                        cap,
                    )?;
                    for (t, (x, y)) in run.x_path.iter().zip(&run.y_path).enumerate() {
                        let xs: Vec<String> = x.iter().map(|c| c.to_string()).collect();
                        let ys: Vec<String> = y.iter().map(|c| c.to_string()).collect();
                        dump.push_str(&format!("{t} {} {}\n", xs.join(","), ys.join(",")));
                    }
                }
            }
            std::fs::create_dir_all(&dir).map_err(io_err)?;
            std::fs::write(dir.join("coupling_trajectory.txt"), dump).map_err(io_err)?;
            write_manifest(
                &dir,
                "coupling",
                seed,
                json!({"kind": kind, "n": n, "d": d, "k": k, "runs": runs, "tmax": cap}),
            )
            .map_err(io_err)?;
            println!(
                "coupled {closed}/{runs}, mean tau = {}",
                if closed > 0 {
                    sum / closed as f64
                } else {
                    f64::NAN
                }
            );
        }
        Command::Sst { kind, n, runs } => {
            let mut table = Table::new("sst", vec!["run", "tau", "state"]);
            match kind {
                SstKind::Hypercube => {
                    for run in 0..*runs {
                        let rec =
                            hypercube_refresh_sst(*n, 0, mixlab::walk::stream_seed(seed, run))?;
                        table.push(vec![int(run), int(rec.tau), int(rec.state_at_tau as u64)]);
                    }
                }
                SstKind::Lamplighter => {
                    let g = cycle(*n)?;
                    let sampler = LamplighterSstSampler::new(&g)?;
                    let f0 = vec![0usize; *n];
                    for run in 0..*runs {
                        let rec = sampler.run(0, &f0, mixlab::walk::stream_seed(seed, run));
                        table.push(vec![
                            int(run),
                            int(rec.record.tau),
                            int(rec.record.state_at_tau as u64),
                        ]);
                    }
                }
            }
            table.write(&dir, format).map_err(io_err)?;
            write_manifest(
                &dir,
                "sst",
                seed,
                json!({"kind": kind, "n": n, "runs": runs}),
            )
            .map_err(io_err)?;
            println!("sst sample of {runs} runs written");
        }
        Command::Vc {
            graph,
            tmax,
            identity_tmax,
        } => {
            let g = graph.build()?;
            let chain = lazy_srw(&g)?;
            let mut identity = Table::new("vc_identity", vec!["t", "deviation"]);
            for t in 0..=*identity_tmax {
                identity.push(vec![
                    int(t),
                    num(binomial_mixture_identity_check(&chain, t)?),
                ]);
            }
            identity.write(&dir, format).map_err(io_err)?;
            let distances = support_distances(&chain);
            let violations = vc_bound_check(&chain, &distances, *tmax)?;
            let mut table = Table::new("vc_violations", vec!["x", "y", "t", "lhs", "rhs", "which"]);
            for v in &violations {
                table.push(vec![
                    int(v.x as u64),
                    int(v.y as u64),
                    int(v.t),
                    num(v.lhs),
                    num(v.rhs),
                    text(v.which),
                ]);
            }
            table.write(&dir, format).map_err(io_err)?;
            write_manifest(
                &dir,
                "vc",
                seed,
                json!({"graph": graph, "tmax": tmax, "identity_tmax": identity_tmax}),
            )
            .map_err(io_err)?;
            println!("{} violations", violations.len());
            violation |= !violations.is_empty();
        }
        Command::Speed {
            model,
            d,
            steps,
            walks,
            lazy,
        } => {
            let est = match model {
                ModelKind::Zd => {
                    speed_estimate(&LatticeModel::new(*d, *lazy)?, *steps, *walks, seed)?
                }
                ModelKind::Tree => {
                    speed_estimate(&TreeModel::new(*d, *lazy)?, *steps, *walks, seed)?
                }
                ModelKind::Lamp => {
                    speed_estimate(&LampGroupModel::new(*d, *lazy)?, *steps, *walks, seed)?
                }
            };
            let mut table = Table::new(
                "speed",
                vec![
                    "v_hat",
                    "stderr",
                    "v_hat_upper",
                    "stderr_upper",
                    "exact_lengths",
                ],
            );
            table.push(vec![
                num(est.v_hat),
                num(est.stderr),
                num(est.v_hat_upper),
                num(est.stderr_upper),
                text(if est.exact_lengths { "true" } else { "false" }),
            ]);
            table.write(&dir, format).map_err(io_err)?;
            write_manifest(
                &dir,
                "speed",
                seed,
                json!({"model": model, "d": d, "steps": steps, "walks": walks, "lazy": lazy}),
            )
            .map_err(io_err)?;
            println!("v_hat = {} (stderr {})", est.v_hat, est.stderr);
        }
        Command::Entropy {
            model,
            d,
            nmax,
            lazy,
        } => {
            let curve = match model {
                ModelKind::Zd => lattice_entropy_curve(&LatticeModel::new(*d, *lazy)?, *nmax)?,
                ModelKind::Tree => tree_entropy_curve(&TreeModel::new(*d, *lazy)?, *nmax)?,
                ModelKind::Lamp => {
                    return Err(MixError::Unsupported(
                        "exact entropy needs an exact law; lamp groups are out of range".into(),
                    ))
                }
            };
            let mut table = Table::new("entropy", vec!["n", "entropy", "increment", "mean_length"]);
            for n in 0..curve.entropies.len() {
                table.push(vec![
                    int(n as u64),
                    num(curve.entropies[n]),
                    num(if n == 0 { 0.0 } else { curve.increments[n - 1] }),
                    num(curve.mean_lengths[n]),
                ]);
            }
            table.write(&dir, format).map_err(io_err)?;
            write_manifest(
                &dir,
                "entropy",
                seed,
                json!({"model": model, "d": d, "nmax": nmax, "lazy": lazy}),
            )
            .map_err(io_err)?;
            println!(
                "H({}) = {}, h estimate = {}",
                nmax,
                curve.entropies.last().unwrap(),
                curve.h_estimate()
            );
        }
        Command::Geom { check, graph, k } => {
            match check {
                GeomCheck::Moments => {
                    let g = graph.build()?;
                    let rows = distance_moment_check(&g)?;
                    let mut table = Table::new(
                        "geom_moments",
                        vec![
                            "n",
                            "mean_square_distance",
                            "lower_bound",
                            "eigen_ratio_bound",
                        ],
                    );
                    for r in &rows {
                        if r.mean_square_distance < r.lower_bound - 1e-10 {
                            violation = true;
                        }
                        table.push(vec![
                            int(r.n),
                            num(r.mean_square_distance),
                            num(r.lower_bound),
                            num(r.eigen_ratio_bound),
                        ]);
                    }
                    table.write(&dir, format).map_err(io_err)?;
                }
                GeomCheck::Corollary => {
                    let g = graph.build()?;
                    let r = corollary_trel_diam(&g)?;
                    violation |= !r.holds();
                    let mut table = Table::new(
                        "geom_corollary",
                        vec![
                            "t_rel",
                            "t_mix",
                            "diameter",
                            "degree",
                            "rel_bound",
                            "mix_bound",
                        ],
                    );
                    table.push(vec![
                        num(r.t_rel),
                        int(r.t_mix),
                        int(r.diameter as u64),
                        int(r.degree as u64),
                        num(r.rel_bound),
                        num(r.mix_bound),
                    ]);
                    table.write(&dir, format).map_err(io_err)?;
                }
                GeomCheck::Folner => {
                    let r = folner_ratio(*k)?;
                    violation |= !r.holds();
                    let mut table = Table::new(
                        "geom_folner",
                        vec!["k", "delta", "theta", "m", "ratio", "bound"],
                    );
                    table.push(vec![
                        int(*k as u64),
                        num(r.delta),
                        num(r.theta),
                        int(r.m as u64),
                        num(r.ratio),
                        num(r.bound),
                    ]);
                    table.write(&dir, format).map_err(io_err)?;
                }
            }
            write_manifest(
                &dir,
                "geom",
                seed,
                json!({"check": check, "graph": graph, "k": k}),
            )
            .map_err(io_err)?;
            println!("geom {check:?} done");
        }
        Command::Adapted {
            action,
            rule,
            steps,
            eps,
            radius,
            alpha,
            shells,
            m1,
            m2,
        } => {
            match action {
                AdaptedAction::Simulate => {
                    let (r, d) = match rule {
                        RuleKind::Blocks => (AdaptedRule::TimeBlocks, 2),
                        RuleKind::FirstVisit => (AdaptedRule::FirstVisit, 2),
                        RuleKind::Region => (AdaptedRule::Region, 2),
                        RuleKind::MaxCoordinate => (AdaptedRule::MaxCoordinate { eps: *eps }, 3),
                    };
                    let measures = r.default_measures(d);
                    let run = simulate_adapted(&r, &measures, *steps, seed)?;
                    let mut table = Table::new(
                        "adapted_run",
                        vec![
                            "steps",
                            "final_l1",
                            "returns_to_origin",
                            "first_visits",
                            "max_radius",
                        ],
                    );
                    table.push(vec![
                        int(*steps),
                        int(run.sample.final_l1().unsigned_abs()),
                        int(run.sample.returns_to_origin),
                        int(run.first_visits),
                        num(run.sample.max_radius),
                    ]);
                    table.write(&dir, format).map_err(io_err)?;
                    // Subsampled trajectory for plotting.
                    let mut trace = Table::new(
                        "adapted_trace",
                        if d == 2 {
                            vec!["t", "x", "y"]
                        } else {
                            vec!["t", "x", "y", "z"]
                        },
                    );
                    for (t, pos) in &run.sample.trace {
                        let mut row = vec![int(*t)];
                        row.extend(pos.iter().map(|&c| serde_json::json!(c)));
                        trace.push(row);
                    }
                    trace.write(&dir, format).map_err(io_err)?;
                }
                AdaptedAction::Excessive => {
                    let r = excessive_measure_check(PlaneKernel::RegionBiased, *radius);
                    violation |= !(r.excessive_everywhere && r.strict_at_origin);
                    let mut table = Table::new(
                        "adapted_excessive",
                        vec![
                            "radius",
                            "max_column_sum",
                            "origin_column_sum",
                            "strict_at_origin",
                        ],
                    );
                    table.push(vec![
                        int(*radius as u64),
                        num(r.max_column_sum),
                        num(r.origin_column_sum),
                        text(if r.strict_at_origin { "true" } else { "false" }),
                    ]);
                    table.write(&dir, format).map_err(io_err)?;
                }
                AdaptedAction::Lyapunov => {
                    let diag = parse_weights(m1)?;
                    let mat = nalgebra_diag(&diag);
                    let (ok, margin) = lyapunov_condition(&mat)?;
                    let mut table = Table::new("adapted_lyapunov", vec!["satisfied", "margin"]);
                    table.push(vec![text(if ok { "true" } else { "false" }), num(margin)]);
                    table.write(&dir, format).map_err(io_err)?;
                }
                AdaptedAction::Normalize => {
                    let a = normalize_spd_pair(
                        &nalgebra_diag(&parse_weights(m1)?),
                        &nalgebra_diag(&parse_weights(m2)?),
                    )?;
                    let mut table = Table::new("adapted_normalize", vec!["row", "c0", "c1", "c2"]);
                    for i in 0..3 {
                        table.push(vec![
                            int(i as u64),
                            num(a[(i, 0)]),
                            num(a[(i, 1)]),
                            num(a[(i, 2)]),
                        ]);
                    }
                    table.write(&dir, format).map_err(io_err)?;
                }
                AdaptedAction::Probe => {
                    let radii: Vec<u64> = shells
                        .split(',')
                        .map(|s| {
                            s.trim()
                                .parse::<u64>()
                                .map_err(|e| MixError::Argument(format!("bad shell: {e}")))
                        })
                        .collect::<Result<_, _>>()?;
                    let report = superharmonicity_probe(&[StepMeasure::srw(3)], *alpha, &radii)?;
                    violation |= report.failed;
                    let mut table = Table::new("adapted_probe", vec!["shell", "worst"]);
                    for (r, v) in &report.shell_worst {
                        table.push(vec![int(*r), num(*v)]);
                    }
                    table.write(&dir, format).map_err(io_err)?;
                }
            }
            write_manifest(
                &dir,
                "adapted",
                seed,
                json!({
                    "action": action, "rule": rule, "steps": steps, "eps": eps,
                    "radius": radius, "alpha": alpha, "shells": shells, "m1": m1, "m2": m2
                }),
            )
            .map_err(io_err)?;
            println!("adapted {action:?} done");
        }
    }

    Ok(if violation {
        ExitCode::from(4)
    } else {
        ExitCode::SUCCESS
    })
}

fn nalgebra_diag(diag: &[f64]) -> mixlab::nalgebra::DMatrix<f64> {
    let n = diag.len();
    let mut m = mixlab::nalgebra::DMatrix::zeros(n, n);
    for (i, &v) in diag.iter().enumerate() {
        m[(i, i)] = v;
    }
    m
}
