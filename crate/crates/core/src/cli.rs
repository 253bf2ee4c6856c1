//! The `flownoise` command line.
//!
//! Machine output (CSV or JSON) goes to `--out FILE` when given, and the
//! human summary to stdout. Without `--out`, the machine output takes
//! stdout and the summary moves to stderr, so pipes stay clean.
//!
//! Exit codes: 0 success, 1 a statistical or exact test failed, 2 usage or
//! parameter error.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::chaos::{spectral_measure, subset_indices, zm_character, zm_character_urho};
use crate::checks::{exact_suite, CheckOutcome};
use crate::error::{invalid, Error};
use crate::estimators::{blacknoise_variance_scan, dyadic_scales, Nu, Phi, VarianceScanResult};
use crate::flows::{
    build_flow, n_point_motion, sticky_coin_motion, write_trajectories_csv, ArratiaLattice,
    CoalWalk, CoinLaw, FlowPath, RotationLattice, SplitWalk, StepModel, StickyWalk, Trajectory,
    ZmToy, TRAJECTORY_CSV_HEADER,
};
use crate::perturb::{sensitivity_curve, write_curve_csv, CorrelationEstimate, MIN_REPLICAS};
use crate::rng::{map_replicas, replica_rng};
use crate::semigroups::{CircleMap, Semigroup, ZmElem};
use crate::sticky_exact::{
    beta_moment_identity, check_detailed_balance, empirical_occupancy, invariant_measure,
    total_variation, DetailedBalanceReport, OccupationConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TEST_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Tolerance of the exact sticky-lattice identities.
const EXACT_TOL: f64 = 1e-10;
/// Largest total variation accepted between the long-run occupation law
/// and the conditioned invariant measure.
const MC_TV_TOL: f64 = 0.02;

#[derive(Debug, Parser)]
#[command(
    name = "flownoise",
    version,
    about = "Stochastic flows, noise sensitivity and exact chaos analysis"
)]
struct Cli {
    /// Worker threads; falls back to FLOWNOISE_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample flows and write particle trajectories.
    Simulate(SimulateArgs),
    /// Correlation of a functional under rho-resampling of the steps.
    Sensitivity(SensitivityArgs),
    /// Exact spectral measure of a toy-model character.
    Spectral(SpectralArgs),
    /// Invariant measure and detailed balance of the sticky lattice flow.
    StickyVerify(StickyVerifyArgs),
    /// Variance-per-scale trend of the Arratia flow against a classical control.
    Blacknoise(BlacknoiseArgs),
    /// Every exact invariant.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Machine output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimModel {
    ZmToy,
    CoalLattice,
    SplitLattice,
    StickyWalk,
    ArratiaLattice,
    RotationLattice,
    StickyLattice,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: SimModel,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    replicas: usize,
    #[arg(long)]
    seed: u64,
    /// Comma-separated starting points. Split-lattice points are half-integers.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    starts: Vec<f64>,
    /// Modulus of the circle models.
    #[arg(long, default_value_t = 16)]
    m: u32,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    /// Coin law Beta(eps, eps) of the sticky lattice.
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SensModel {
    ZmToy,
    ArratiaLattice,
}

#[derive(Debug, Args)]
struct SensitivityArgs {
    #[arg(long, value_enum)]
    model: SensModel,
    #[arg(long, default_value_t = 2)]
    m: u32,
    #[arg(long)]
    steps: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    rho_grid: Vec<f64>,
    #[arg(long)]
    replicas: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SpecModel {
    ZmToy,
}

#[derive(Debug, Args)]
struct SpectralArgs {
    #[arg(long, value_enum, default_value = "zm-toy")]
    model: SpecModel,
    #[arg(long)]
    m: u32,
    #[arg(long)]
    steps: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct StickyVerifyArgs {
    #[arg(long, default_value_t = 5)]
    m_max: usize,
    #[arg(long, default_value_t = 4)]
    n_max: u32,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5,0.7,0.9")]
    eps: Vec<f64>,
    /// Also compare a long simulated run with the invariant measure.
    #[arg(long)]
    seed: Option<u64>,
    /// Length of the simulated run.
    #[arg(long, default_value_t = 1_000_000)]
    mc_steps: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct BlacknoiseArgs {
    #[arg(long, default_value_t = 128)]
    m: u32,
    #[arg(long, default_value_t = 10_000)]
    replicas: usize,
    #[arg(long)]
    seed: u64,
    /// Comma-separated scales; dyadic 2^-6 .. 2^-10 by default.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Seed of the random instances.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

/// Failure of a run, mapped to an exit code.
enum Failure {
    Usage(String),
    Test,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(format!("i/o error: {e}"))
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Runs the CLI on process arguments with the real standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut io::stdout(), &mut io::stderr())
}

/// Runs the CLI with explicit output streams and returns the exit code.
pub fn run_with<I, T>(
    args: I,
    stdout: &mut (dyn Write + Send),
    stderr: &mut (dyn Write + Send),
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{rendered}");
                    EXIT_USAGE
                }
            };
        }
    };
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(cli.command, stdout, stderr)) {
        Ok(()) => EXIT_OK,
        Err(Failure::Test) => EXIT_TEST_FAILURE,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
    }
}

fn thread_count(flag: Option<usize>) -> std::result::Result<Option<usize>, String> {
    let n =
        match flag {
            Some(n) => Some(n),
            None => match std::env::var("FLOWNOISE_THREADS") {
                Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                    format!("FLOWNOISE_THREADS must be a positive integer, got {v:?}")
                })?),
                Err(_) => None,
            },
        };
    match n {
        Some(0) => Err("thread count must be positive".into()),
        n => Ok(n),
    }
}

fn dispatch(
    command: Command,
    stdout: &mut (dyn Write + Send),
    stderr: &mut (dyn Write + Send),
) -> CliResult {
    match command {
        Command::Simulate(a) => simulate(a, stdout, stderr),
        Command::Sensitivity(a) => sensitivity(a, stdout, stderr),
        Command::Spectral(a) => spectral(a, stdout, stderr),
        Command::StickyVerify(a) => sticky_verify(a, stdout, stderr),
        Command::Blacknoise(a) => blacknoise(a, stdout, stderr),
        Command::Check(a) => check(a, stdout, stderr),
    }
}

/// Where the machine output and the summary go.
struct Sink<'a> {
    machine: Box<dyn Write + 'a>,
    summary: &'a mut (dyn Write + Send),
    format: Format,
}

impl<'a> Sink<'a> {
    fn open(
        output: &OutputArgs,
        default: Format,
        stdout: &'a mut (dyn Write + Send),
        stderr: &'a mut (dyn Write + Send),
    ) -> std::result::Result<Self, Failure> {
        let format = output.format.unwrap_or(default);
        Ok(match &output.out {
            Some(path) => {
                let file = File::create(path).map_err(|e| {
                    Failure::Usage(format!("cannot create {}: {e}", path.display()))
                })?;
                Sink {
                    machine: Box::new(BufWriter::new(file)),
                    summary: stdout,
                    format,
                }
            }
            None => Sink {
                machine: Box::new(stdout),
                summary: stderr,
                format,
            },
        })
    }

    fn json<T: Serialize + ?Sized>(&mut self, value: &T) -> CliResult {
        serde_json::to_writer_pretty(&mut self.machine, value)
            .map_err(|e| Failure::Usage(format!("serialization failed: {e}")))?;
        writeln!(self.machine)?;
        Ok(())
    }

    fn say(&mut self, line: impl Display) -> CliResult {
        writeln!(self.summary, "{line}")?;
        Ok(())
    }

    fn finish(mut self) -> CliResult {
        self.machine.flush()?;
        self.summary.flush()?;
        Ok(())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Serialize)]
struct TrajectoryRecord {
    replica: usize,
    particle: usize,
    start: f64,
    positions: Vec<f64>,
}

fn as_integers(starts: &[f64]) -> std::result::Result<Vec<i64>, Failure> {
    starts
        .iter()
        .map(|&x| {
            if x.fract() == 0.0 && x.abs() < 1e15 {
                Ok(x as i64)
            } else {
                Err(usage(format!("start {x} is not an integer")))
            }
        })
        .collect()
}

fn as_sites(starts: &[f64], m: u32) -> std::result::Result<Vec<u32>, Failure> {
    as_integers(starts)?
        .into_iter()
        .map(|x| {
            u32::try_from(x)
                .ok()
                .filter(|&x| x < m)
                .ok_or_else(|| usage(format!("start {x} is not a site of Z_{m}")))
        })
        .collect()
}

fn as_nonnegative(starts: &[f64]) -> std::result::Result<Vec<i64>, Failure> {
    let xs = as_integers(starts)?;
    match xs.iter().find(|&&x| x < 0) {
        Some(x) => Err(usage(format!(
            "start {x} must be nonnegative for this model"
        ))),
        None => Ok(xs),
    }
}

/// Half-integers, stored doubled.
fn as_half_integers(starts: &[f64]) -> std::result::Result<Vec<i64>, Failure> {
    starts
        .iter()
        .map(|&x| {
            let d = 2.0 * x;
            if d.fract() == 0.0 && (d as i64) % 2 != 0 {
                Ok(d as i64)
            } else {
                Err(usage(format!("start {x} is not a half-integer")))
            }
        })
        .collect()
}

fn trajectories_of<M, P>(
    model: &M,
    starts: &[P],
    steps: usize,
    replicas: usize,
    seed: u64,
    scale: impl Fn(P) -> f64 + Sync,
) -> std::result::Result<Vec<Vec<Trajectory<f64>>>, Failure>
where
    M: StepModel,
    M::Elem: Semigroup<Point = P>,
    P: Copy + Send + Sync,
{
    let runs = map_replicas(
        seed,
        replicas,
        |_, rng| -> crate::Result<Vec<Trajectory<f64>>> {
            let flow: FlowPath<M::Elem> = build_flow(model, steps, rng)?;
            Ok(n_point_motion(&flow, starts)?
                .into_iter()
                .map(|t| Trajectory {
                    start: scale(t.start),
                    positions: t.positions.into_iter().map(&scale).collect(),
                })
                .collect())
        },
    );
    Ok(runs.into_iter().collect::<crate::Result<_>>()?)
}

fn simulate(
    a: SimulateArgs,
    stdout: &mut (dyn Write + Send),
    stderr: &mut (dyn Write + Send),
) -> CliResult {
    if a.steps == 0 {
        return Err(usage("--steps must be positive"));
    }
    if a.replicas == 0 {
        return Err(usage("--replicas must be positive"));
    }
    if a.starts.is_empty() {
        return Err(usage("need at least one start"));
    }
    let runs = match a.model {
        SimModel::ZmToy => {
            let model = ZmToy::new(a.m)?;
            let starts = as_sites(&a.starts, a.m)?;
            trajectories_of(&model, &starts, a.steps, a.replicas, a.seed, f64::from)?
        }
        SimModel::CoalLattice => {
            let starts = as_nonnegative(&a.starts)?;
            trajectories_of(&CoalWalk, &starts, a.steps, a.replicas, a.seed, |x| {
                x as f64
            })?
        }
        SimModel::SplitLattice => {
            let starts = as_half_integers(&a.starts)?;
            trajectories_of(&SplitWalk, &starts, a.steps, a.replicas, a.seed, |x| {
                x as f64 / 2.0
            })?
        }
        SimModel::StickyWalk => {
            let model = StickyWalk::new(a.lambda, a.dt)?;
            let starts = as_nonnegative(&a.starts)?;
            let dx = model.dx();
            trajectories_of(&model, &starts, a.steps, a.replicas, a.seed, |x| {
                x as f64 * dx
            })?
        }
        SimModel::ArratiaLattice => {
            let model = ArratiaLattice::new(a.m)?;
            let starts = as_sites(&a.starts, a.m)?;
            trajectories_of(&model, &starts, a.steps, a.replicas, a.seed, f64::from)?
        }
        SimModel::RotationLattice => {
            let model = RotationLattice::new(a.m)?;
            let starts = as_sites(&a.starts, a.m)?;
            trajectories_of(&model, &starts, a.steps, a.replicas, a.seed, f64::from)?
        }
        SimModel::StickyLattice => {
            let law = CoinLaw::beta(a.eps)?;
            let starts = as_sites(&a.starts, a.m)?;
            let runs = map_replicas(a.seed, a.replicas, |_, rng| {
                sticky_coin_motion(a.m, law, &starts, a.steps, rng).map(|ts| {
                    ts.into_iter()
                        .map(|t| Trajectory {
                            start: f64::from(t.start),
                            positions: t.positions.into_iter().map(f64::from).collect(),
                        })
                        .collect::<Vec<_>>()
                })
            });
            runs.into_iter().collect::<crate::Result<_>>()?
        }
    };
    let mut sink = Sink::open(&a.output, Format::Csv, stdout, stderr)?;
    match sink.format {
        Format::Csv => {
            writeln!(sink.machine, "{TRAJECTORY_CSV_HEADER}")?;
            for (r, trs) in runs.iter().enumerate() {
                write_trajectories_csv(&mut sink.machine, r, trs)?;
            }
        }
        Format::Json => {
            let records: Vec<TrajectoryRecord> = runs
                .iter()
                .enumerate()
                .flat_map(|(r, trs)| {
                    trs.iter().enumerate().map(move |(p, t)| TrajectoryRecord {
                        replica: r,
                        particle: p,
                        start: t.start,
                        positions: t.positions.clone(),
                    })
                })
                .collect();
            sink.json(&records)?;
        }
    }
    let model_name = format!("{:?}", a.model);
    sink.say(format_args!(
        "simulated {} replicas of {} steps, {} particles ({model_name})",
        a.replicas,
        a.steps,
        a.starts.len()
    ))?;
    sink.finish()
}

// ---------------------------------------------------------------------------
// sensitivity

fn character(m: u32, value: u32) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * value as f64 / m as f64)
}

fn sensitivity(
    a: SensitivityArgs,
    stdout: &mut (dyn Write + Send),
    stderr: &mut (dyn Write + Send),
) -> CliResult {
    if a.steps == 0 {
        return Err(usage("--steps must be positive"));
    }
    if a.replicas < MIN_REPLICAS {
        return Err(usage(format!("--replicas must be at least {MIN_REPLICAS}")));
    }
    if let Some(r) = a.rho_grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(usage(format!("rho {r} is outside [0, 1]")));
    }
    let (curve, exact): (Vec<CorrelationEstimate>, Option<Vec<f64>>) = match a.model {
        SensModel::ZmToy => {
            let model = ZmToy::new(a.m)?;
            let m = a.m;
            let f = move |flow: &FlowPath<ZmElem>| {
                character(m, flow.to_end(0).expect("full interval").value())
            };
            let curve = sensitivity_curve(f, &model, a.steps, &a.rho_grid, a.replicas, a.seed)?;
            let exact = a
                .rho_grid
                .iter()
                .map(|&r| zm_character_urho(m, a.steps, r))
                .collect();
            (curve, Some(exact))
        }
        SensModel::ArratiaLattice => {
            let model = ArratiaLattice::new(a.m)?;
            let m = a.m;
            let f = move |flow: &FlowPath<CircleMap>| {
                let x = flow.to_end(0).expect("full interval").table()[0];
                character(m, x)
            };
            let curve = sensitivity_curve(f, &model, a.steps, &a.rho_grid, a.replicas, a.seed)?;
            (curve, None)
        }
    };
    let mut sink = Sink::open(&a.output, Format::Csv, stdout, stderr)?;
    match sink.format {
        Format::Csv => write_curve_csv(&mut sink.machine, &curve)?,
        Format::Json => sink.json(&curve)?,
    }
    for (j, e) in curve.iter().enumerate() {
        match &exact {
            Some(x) => sink.say(format_args!(
                "rho {:<6} estimate {:.5} +- {:.5}   exact {:.5}",
                e.rho, e.value, e.std_error, x[j]
            ))?,
            None => sink.say(format_args!(
                "rho {:<6} estimate {:.5} +- {:.5}",
                e.rho, e.value, e.std_error
            ))?,
        }
    }
    sink.finish()
}

// ---------------------------------------------------------------------------
// spectral

fn spectral(
    a: SpectralArgs,
    stdout: &mut (dyn Write + Send),
    stderr: &mut (dyn Write + Send),
) -> CliResult {
    let SpecModel::ZmToy = a.model;
    if a.m < 2 {
        return Err(usage("--m must be at least 2"));
    }
    let f = zm_character(a.m, a.steps)?;
    let mu = spectral_measure(&f);
    let n = mu.n_factors();
    let inclusion: Vec<f64> = (0..n).map(|t| mu.point_probability(t)).collect();
    let mut sink = Sink::open(&a.output, Format::Json, stdout, stderr)?;
    match sink.format {
        Format::Json => sink.json(&json!({
            "model": "zm-toy",
            "m": a.m,
            "steps": a.steps,
            "total": mu.total(),
            "inclusion_probabilities": inclusion,
            "weights": mu.to_json(),
        }))?,
        Format::Csv => {
            writeln!(sink.machine, "subset,size,weight")?;
            for (&c, &w) in mu.weights() {
                let idx: Vec<String> = subset_indices(c)
                    .into_iter()
                    .map(|t| {
                        if t + 1 == n {
                            "tail".to_string()
                        } else {
                            t.to_string()
                        }
                    })
                    .collect();
                writeln!(sink.machine, "{},{},{}", idx.join(";"), idx.len(), w)?;
            }
        }
    }
    sink.say(format_args!(
        "zm-toy m={} steps={}: total mass {:.12}, {} subsets with positive weight",
        a.m,
        a.steps,
        mu.total(),
        mu.weights().len()
    ))?;
    let steps_only = &inclusion[..a.steps];
    if let (Some(lo), Some(hi)) = (
        steps_only.iter().copied().reduce(f64::min),
        steps_only.iter().copied().reduce(f64::max),
    ) {
        sink.say(format_args!(
            "per-step inclusion probability in [{lo:.12}, {hi:.12}]"
        ))?;
    }
    sink.say(format_args!(
        "tail inclusion probability {:.12}",
        inclusion[n - 1]
    ))?;
    sink.finish()
}

// ---------------------------------------------------------------------------
// sticky-verify

#[derive(Serialize)]
struct OccupancyComparison {
    m: usize,
    n: u32,
    eps: f64,
    steps: usize,
    total_variation: f64,
    threshold: f64,
    passed: bool,
}

#[derive(Serialize)]
struct StickyVerifyOutput {
    beta_max_rel_err: f64,
    reports: Vec<DetailedBalanceReport>,
    simulation: Option<OccupancyComparison>,
    passed: bool,
}

fn sticky_verify(
    a: StickyVerifyArgs,
    stdout: &mut (dyn Write + Send),
    stderr: &mut (dyn Write + Send),
) -> CliResult {
    if !(3..=12).contains(&a.m_max) {
        return Err(usage("--m-max must lie in 3..=12"));
    }
    if !(1..=8).contains(&a.n_max) {
        return Err(usage("--n-max must lie in 1..=8"));
    }
    if let Some(e) = a.eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(usage(format!("eps {e} is outside (0, 1)")));
    }
    let mut beta_err: f64 = 0.0;
    for &eps in &a.eps {
        for n in 0..=a.n_max.max(8) {
            for k in 0..=n {
                beta_err = beta_err.max(beta_moment_identity(n, k, eps)?.rel_err);
            }
        }
    }
    let mut reports = Vec::new();
    for &eps in &a.eps {
        for m in 3..=a.m_max {
            for n in 1..=a.n_max {
                reports.push(check_detailed_balance(m, n, eps)?);
            }
        }
    }
    let simulation = match a.seed {
        None => None,
        Some(seed) => Some(occupancy_comparison(seed, a.eps[0], a.mc_steps)?),
    };
    let passed = beta_err <= EXACT_TOL
        && reports.iter().all(|r| r.passes(EXACT_TOL))
        && simulation.as_ref().is_none_or(|s| s.passed);
    let out = StickyVerifyOutput {
        beta_max_rel_err: beta_err,
        reports,
        simulation,
        passed,
    };
    let mut sink = Sink::open(&a.output, Format::Json, stdout, stderr)?;
    match sink.format {
        Format::Json => sink.json(&out)?,
        Format::Csv => {
            writeln!(
                sink.machine,
                "m,n,eps,states,channels,max_violation,max_product_form_violation,max_row_sum_error,max_stationarity_violation,passed"
            )?;
            for r in &out.reports {
                writeln!(
                    sink.machine,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.m,
                    r.n,
                    r.eps,
                    r.states,
                    r.channels,
                    r.max_violation,
                    r.max_product_form_violation,
                    r.max_row_sum_error,
                    r.max_stationarity_violation,
                    r.passes(EXACT_TOL)
                )?;
            }
        }
    }
    sink.say(format_args!(
        "beta identity: max relative error {beta_err:.2e}"
    ))?;
    let worst = out
        .reports
        .iter()
        .map(|r| r.max_violation.max(r.max_stationarity_violation))
        .fold(0.0, f64::max);
    sink.say(format_args!(
        "detailed balance: {} cases, worst violation {worst:.2e}",
        out.reports.len()
    ))?;
    if let Some(s) = &out.simulation {
        sink.say(format_args!(
            "simulation m={} n={} eps={}: total variation {:.4} (threshold {})",
            s.m, s.n, s.eps, s.total_variation, s.threshold
        ))?;
    }
    sink.say(if passed { "PASS" } else { "FAIL" })?;
    sink.finish()?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Test)
    }
}

/// Long run on `Z_5` with three particles; odd `m` keeps the chain
/// aperiodic, and the conditioned measure is restricted to the reachable
/// states (same total parity is automatic on an odd circle).
fn occupancy_comparison(seed: u64, eps: f64, steps: usize) -> crate::Result<OccupancyComparison> {
    const M: usize = 5;
    const N: u32 = 3;
    if steps < 10_000 {
        return Err(invalid("--mc-steps must be at least 10000"));
    }
    let measure = invariant_measure(M, N, eps)?;
    let exact = measure.conditioned(|_: &OccupationConfig| true);
    let mut rng = replica_rng(seed, 0);
    let empirical = empirical_occupancy(
        M as u32,
        &[0, 1, 3],
        CoinLaw::beta(eps)?,
        1000,
        steps,
        &mut rng,
    )?;
    let tv = total_variation(&empirical, &exact);
    Ok(OccupancyComparison {
        m: M,
        n: N,
        eps,
        steps,
        total_variation: tv,
        threshold: MC_TV_TOL,
        passed: tv <= MC_TV_TOL,
    })
}

// ---------------------------------------------------------------------------
// blacknoise

#[derive(Serialize)]
struct BlacknoiseOutput {
    arratia: VarianceScanResult,
    control: VarianceScanResult,
    passed: bool,
}

fn write_scan_rows(out: &mut dyn Write, r: &VarianceScanResult) -> io::Result<()> {
    for j in 0..r.scales.len() {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.model,
            r.scales[j],
            r.steps[j],
            r.variances[j],
            r.std_errors[j],
            r.ratios[j],
            r.ratio_std_errors[j]
        )?;
    }
    Ok(())
}

fn blacknoise(
    a: BlacknoiseArgs,
    stdout: &mut (dyn Write + Send),
    stderr: &mut (dyn Write + Send),
) -> CliResult {
    let scales = a.scales.unwrap_or_else(|| dyadic_scales(6, 10));
    if scales.len() < 2 {
        return Err(usage("need at least two scales"));
    }
    if let Some(e) = scales.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        return Err(usage(format!("scale {e} is outside (0, 1]")));
    }
    if a.m < 4 || !a.m.is_multiple_of(2) {
        return Err(usage("--m must be even and at least 4"));
    }
    if a.replicas < 3 {
        return Err(usage("--replicas must be at least 3"));
    }
    let phi = Phi::DistanceTo(0.0);
    let nu = Nu::half_circle();
    let arratia = blacknoise_variance_scan(
        &ArratiaLattice::new(a.m)?,
        &phi,
        &nu,
        &scales,
        a.replicas,
        a.seed,
    )?;
    let control = blacknoise_variance_scan(
        &RotationLattice::new(a.m)?,
        &phi,
        &nu,
        &scales,
        a.replicas,
        a.seed,
    )?;
    let passed = arratia.shows_decay() && !control.shows_decay();
    let out = BlacknoiseOutput {
        arratia,
        control,
        passed,
    };
    let mut sink = Sink::open(&a.output, Format::Csv, stdout, stderr)?;
    match sink.format {
        Format::Json => sink.json(&out)?,
        Format::Csv => {
            writeln!(
                sink.machine,
                "model,eps,steps,variance,std_error,ratio,ratio_std_error"
            )?;
            write_scan_rows(&mut sink.machine, &out.arratia)?;
            write_scan_rows(&mut sink.machine, &out.control)?;
        }
    }
    for r in [&out.arratia, &out.control] {
        sink.say(format_args!(
            "{} (m = {}, {} replicas)",
            r.model, r.m, r.replicas
        ))?;
        for j in 0..r.scales.len() {
            sink.say(format_args!(
                "  eps {:.3e}  Var/eps {:.5} +- {:.5}",
                r.scales[j], r.ratios[j], r.ratio_std_errors[j]
            ))?;
        }
        sink.say(format_args!(
            "  slope {:.3} +- {:.3}, p = {:.3e}, strictly decreasing: {}",
            r.trend.slope,
            r.trend.slope_se,
            r.trend.p_value,
            r.strictly_decreasing()
        ))?;
    }
    sink.say(if passed { "PASS" } else { "FAIL" })?;
    sink.finish()?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Test)
    }
}

// ---------------------------------------------------------------------------
// check

fn check(
    a: CheckArgs,
    stdout: &mut (dyn Write + Send),
    stderr: &mut (dyn Write + Send),
) -> CliResult {
    let outcomes: Vec<CheckOutcome> = exact_suite(a.seed);
    let passed = outcomes.iter().all(|c| c.passed);
    let mut sink = Sink::open(&a.output, Format::Json, stdout, stderr)?;
    match sink.format {
        Format::Json => sink.json(&json!({ "passed": passed, "checks": outcomes }))?,
        Format::Csv => {
            writeln!(sink.machine, "name,passed,detail")?;
            for c in &outcomes {
                writeln!(
                    sink.machine,
                    "{},{},\"{}\"",
                    c.name,
                    c.passed,
                    c.detail.replace('"', "'")
                )?;
            }
        }
    }
    for c in &outcomes {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        sink.say(format_args!(
            "{tag} {:<26} {:>7.3}s  {}",
            c.name, c.seconds, c.detail
        ))?;
    }
    sink.finish()?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Test)
    }
}
