//! Command-line surface: argument types, CSV writers and run manifests.
//!
//! Every subcommand renders its result as a CSV string first, so the same
//! code backs the `dapq` binary, the replay path and the examples.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::{fcfs_zexp, npq_class1_zexp, zexp_from_mean};
use crate::error::Error;
use crate::kpi::{feasible_region, policy_sweep, PolicyPoint};
use crate::mean_wait::dapq_means;
use crate::model::{GridSpec, Kpi, KpiClass, QueueConfig, ServiceKind, ToleranceConfig};
use crate::numeric::format_sig;
use crate::simulate::{run_all, summarize, write_raw_csv, SimConfig};
use crate::transforms::{class2_cdf_dapq, invert_to_cdf, npq_class2_lst, CdfCurve};

pub const MEAN_HEADER: &str = "lambda1,lambda2,mu,service,b,d,mean_w1,mean_w2,conservation_residual";
pub const CDF_HEADER: &str = "kind,t,F";
pub const SIMULATE_HEADER: &str = "class,t,F,mean,std_error";
pub const POLICY_HEADER: &str = "d,b_star,mean_w1,mean_w2,feasible,constraint_value";
pub const REGION_HEADER: &str = "boundary,lambda1,lambda2";

const DIGITS: usize = 12;

const ENV_HELP: &str = "\
Environment:
  DAPQ_EPS_SERIES   truncation tolerance for infinite sums (default 1e-12)
  DAPQ_EPS_ROOT     root-finding and bisection tolerance (default 1e-10)
  DAPQ_EPS_INVERT   transform inversion accuracy target (default 1e-7)
  DAPQ_MAX_STATES   state-space truncation cap (default 20000)

CSV headers:
  mean       lambda1,lambda2,mu,service,b,d,mean_w1,mean_w2,conservation_residual
  cdf        kind,t,F
  simulate   class,t,F,mean,std_error   (raw dump: rep,class,arrival,wait)
  kpi        d,b_star,mean_w1,mean_w2,feasible,constraint_value
  kpi region boundary,lambda1,lambda2

Exit codes: 0 success, 2 invalid input, 3 infeasible KPI, 4 numerical failure.";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] Error),
    #[error("{0}")]
    Usage(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) => match e {
                Error::NumericalInstability(_)
                | Error::RootBracketFailure(_)
                | Error::NonConvergence { .. }
                | Error::AccuracyNotMet { .. }
                | Error::TruncationOverflow { .. }
                | Error::NonMonotone(_) => 4,
                _ => 2,
            },
            CliError::Usage(_) | CliError::Manifest(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// `value`, `start:stop` (unit step) or `start:stop:step`, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl RangeSpec {
    pub fn single(x: f64) -> Self {
        Self {
            start: x,
            stop: x,
            step: 1.0,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl FromStr for RangeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad number '{p}' in range '{s}'"))
            })
            .collect::<Result<_, _>>()?;
        let range = match parts[..] {
            [x] => Self::single(x),
            [a, b] => Self {
                start: a,
                stop: b,
                step: 1.0,
            },
            [a, b, c] => Self {
                start: a,
                stop: b,
                step: c,
            },
            _ => return Err(format!("range '{s}' must be value, start:stop or start:stop:step")),
        };
        if !(range.step > 0.0) || range.stop < range.start || !range.start.is_finite() || !range.stop.is_finite() {
            return Err(format!("range '{s}' needs finite start <= stop and step > 0"));
        }
        Ok(range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceArg {
    Exp,
    Det,
}

impl From<ServiceArg> for ServiceKind {
    fn from(s: ServiceArg) -> Self {
        match s {
            ServiceArg::Exp => ServiceKind::Exponential,
            ServiceArg::Det => ServiceKind::Deterministic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdfKind {
    Fcfs,
    Npq1,
    Npq2,
    Dapq2,
    Zexp1,
    Sim1,
    Sim2,
}

impl CdfKind {
    fn name(self) -> &'static str {
        match self {
            CdfKind::Fcfs => "fcfs",
            CdfKind::Npq1 => "npq1",
            CdfKind::Npq2 => "npq2",
            CdfKind::Dapq2 => "dapq2",
            CdfKind::Zexp1 => "zexp1",
            CdfKind::Sim1 => "sim1",
            CdfKind::Sim2 => "sim2",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct QueueArgs {
    #[arg(long)]
    pub lam1: f64,
    #[arg(long)]
    pub lam2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, value_enum, default_value_t = ServiceArg::Exp)]
    pub service: ServiceArg,
}

impl QueueArgs {
    fn config(&self, b: f64, d: f64) -> QueueConfig {
        QueueConfig::new(self.lam1, self.lam2, self.mu, b, d, self.service.into())
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GridArgs {
    /// Grid spacing in units of 1/mu.
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    /// Grid end; defaults to where the FCFS survival drops below 1e-6.
    #[arg(long)]
    pub t_max: Option<f64>,
}

impl GridArgs {
    fn abscissae(&self, config: &QueueConfig) -> CliResult<Vec<f64>> {
        if !(self.step > 0.0) || self.t_max.is_some_and(|t| !(t >= 0.0)) {
            return Err(CliError::Usage("--step must be > 0 and --t-max >= 0".into()));
        }
        let grid = GridSpec {
            step: self.step / config.mu,
            t_max: self.t_max,
        };
        Ok(grid.abscissae(config))
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Recorded customers per replication, after burn-in.
    #[arg(long, default_value_t = 4000)]
    pub n: usize,
    #[arg(long, default_value_t = 1500)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
}

impl SimArgs {
    fn config(&self, queue: QueueConfig) -> CliResult<SimConfig> {
        let seed = self
            .seed
            .ok_or_else(|| CliError::Usage("simulation needs --seed".into()))?;
        let sim = SimConfig {
            queue,
            n_customers: self.n,
            burn_in: self.burn_in,
            replications: self.reps,
            seed,
        };
        sim.validate()?;
        Ok(sim)
    }
}

/// Destination of the main output and its manifest. Not part of a manifest.
#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Manifest destination; defaults to `<out>.manifest.json` when `--out` is given.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MeanArgs {
    #[command(flatten)]
    pub queue: QueueArgs,
    /// Accumulation rate or range `start:stop:step`.
    #[arg(long, default_value = "0")]
    pub b: RangeSpec,
    /// Delay or range `start:stop:step`.
    #[arg(long, default_value = "0")]
    pub d: RangeSpec,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CdfArgs {
    #[command(flatten)]
    pub queue: QueueArgs,
    /// Curve kinds, repeatable or comma separated.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    pub kind: Vec<CdfKind>,
    #[arg(long, default_value_t = 0.0)]
    pub b: f64,
    #[arg(long, default_value_t = 0.0)]
    pub d: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub queue: QueueArgs,
    #[arg(long, default_value_t = 0.0)]
    pub b: f64,
    #[arg(long, default_value_t = 0.0)]
    pub d: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Also dump every recorded customer as `rep,class,arrival,wait`.
    #[arg(long)]
    #[serde(skip)]
    pub raw: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct KpiArgs {
    #[arg(long)]
    pub lam1: Option<f64>,
    #[arg(long)]
    pub lam2: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, value_enum, default_value_t = ServiceArg::Exp)]
    pub service: ServiceArg,
    /// KPI class, 1 or 2.
    #[arg(long = "class", value_parser = clap::value_parser!(u8).range(1..=2))]
    pub class: u8,
    /// Waiting-time target.
    #[arg(long)]
    pub w: f64,
    /// Compliance probability.
    #[arg(long)]
    pub p: f64,
    /// Delay for a single optimization.
    #[arg(long, default_value_t = 0.0, conflicts_with_all = ["sweep_d", "region"])]
    pub d: f64,
    /// Sweep `b*` over delays `start:stop[:step]`.
    #[arg(long, conflicts_with = "region")]
    pub sweep_d: Option<RangeSpec>,
    /// Compute the feasible region boundaries instead.
    #[arg(long)]
    pub region: bool,
    /// Grid step in lambda1 for `--region`.
    #[arg(long, default_value_t = 0.01)]
    pub resolution: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest_path: PathBuf,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Exact mean waiting times over b and d.
    Mean {
        #[command(flatten)]
        args: MeanArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Waiting-time CDF curves.
    Cdf {
        #[command(flatten)]
        args: CdfArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Replicated discrete-event simulation.
    Simulate {
        #[command(flatten)]
        args: SimulateArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// KPI optimization, delay sweeps and feasible regions.
    Kpi {
        #[command(flatten)]
        args: KpiArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Re-run a manifest.
    Replay {
        #[command(flatten)]
        args: ReplayArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Parser)]
#[command(name = "dapq", version, about = "Two-class delayed accumulating priority queues", after_help = ENV_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Resolved parameters of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", content = "args", rename_all = "snake_case")]
pub enum Job {
    Mean(MeanArgs),
    Cdf(CdfArgs),
    Simulate(SimulateArgs),
    Kpi(KpiArgs),
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Mean(_) => "mean",
            Job::Cdf(_) => "cdf",
            Job::Simulate(_) => "simulate",
            Job::Kpi(_) => "kpi",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: Job,
    pub tolerances: ToleranceConfig,
    pub version: String,
    pub wall_clock_seconds: f64,
}

/// CSV text of a job plus whether a KPI came out infeasible.
#[derive(Debug, Clone, PartialEq)]
pub struct JobOutput {
    pub csv: String,
    pub infeasible: Option<String>,
}

fn row(fields: &[f64]) -> String {
    fields
        .iter()
        .map(|&x| format_sig(x, DIGITS))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn mean_csv(args: &MeanArgs, tol: &ToleranceConfig) -> CliResult<String> {
    let cases: Vec<(f64, f64)> = args
        .b
        .values()
        .into_iter()
        .flat_map(|b| args.d.values().into_iter().map(move |d| (b, d)))
        .collect();
    for &(b, d) in &cases {
        args.queue.config(b, d).validate()?;
    }
    let rows: Vec<String> = cases
        .par_iter()
        .map(|&(b, d)| -> CliResult<String> {
            let cfg = args.queue.config(b, d);
            let m = dapq_means(&cfg, tol)?;
            Ok(format!(
                "{},{},{},{},{}",
                row(&[cfg.lambda1, cfg.lambda2, cfg.mu]),
                cfg.service.as_str(),
                row(&[b, d]),
                row(&[m.mean_w1, m.mean_w2]),
                format_sig(m.conservation_residual, DIGITS)
            ))
        })
        .collect::<CliResult<_>>()?;
    let mut out = String::from(MEAN_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    Ok(out)
}

fn require_exp(config: &QueueConfig, kind: CdfKind) -> CliResult<()> {
    if config.service != ServiceKind::Exponential {
        return Err(Error::Unsupported(format!("analytic '{}' curve needs --service exp", kind.name())).into());
    }
    Ok(())
}

pub fn cdf_csv(args: &CdfArgs, tol: &ToleranceConfig) -> CliResult<String> {
    let config = args.queue.config(args.b, args.d);
    config.validate()?;
    let grid = args.grid.abscissae(&config)?;
    let mut kinds = args.kind.clone();
    kinds.dedup();
    let needs_sim = kinds.iter().any(|k| matches!(k, CdfKind::Sim1 | CdfKind::Sim2));
    let sim = if needs_sim {
        let sim = args.sim.config(config)?;
        Some(summarize(&run_all(&sim)?, &grid, sim.replications))
    } else {
        None
    };
    let mut out = format!("{CDF_HEADER}\n");
    for kind in kinds {
        let curve: CdfCurve = match kind {
            CdfKind::Fcfs => {
                require_exp(&config, kind)?;
                fcfs_zexp(&config).curve(&grid)
            }
            CdfKind::Npq1 => {
                require_exp(&config, kind)?;
                npq_class1_zexp(&config).curve(&grid)
            }
            CdfKind::Npq2 => {
                require_exp(&config, kind)?;
                invert_to_cdf(&npq_class2_lst(&config, tol)?, &grid, tol)?
            }
            CdfKind::Dapq2 => {
                require_exp(&config, kind)?;
                class2_cdf_dapq(&config, &grid, tol)?
            }
            CdfKind::Zexp1 => {
                let means = dapq_means(&config, tol)?;
                zexp_from_mean(config.rho(), means.mean_w1)?.curve(&grid)
            }
            CdfKind::Sim1 | CdfKind::Sim2 => {
                let class = if kind == CdfKind::Sim1 { 1 } else { 2 };
                let stats = sim
                    .as_ref()
                    .and_then(|s| s.class(class))
                    .ok_or_else(|| CliError::Usage(format!("no class-{class} customers were recorded")))?;
                stats.curve.clone()
            }
        };
        for (t, f) in curve.t.iter().zip(&curve.f) {
            let _ = writeln!(out, "{},{}", kind.name(), row(&[*t, *f]));
        }
    }
    Ok(out)
}

pub fn simulate_csv(args: &SimulateArgs) -> CliResult<String> {
    let config = args.queue.config(args.b, args.d);
    let sim = args.sim.config(config)?;
    let grid = args.grid.abscissae(&config)?;
    let records = run_all(&sim)?;
    if let Some(path) = &args.raw {
        let file = std::fs::File::create(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        write_raw_csv(std::io::BufWriter::new(file), &records).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
    }
    let summary = summarize(&records, &grid, sim.replications);
    let mut out = format!("{SIMULATE_HEADER}\n");
    for class in [1u8, 2] {
        if let Some(stats) = summary.class(class) {
            for (t, f) in stats.curve.t.iter().zip(&stats.curve.f) {
                let _ = writeln!(out, "{class},{}", row(&[*t, *f, stats.mean, stats.std_error]));
            }
        }
    }
    Ok(out)
}

fn policy_row(p: &PolicyPoint) -> String {
    format!(
        "{},{},{}",
        row(&[p.d, p.b_star, p.mean_w1, p.mean_w2]),
        p.feasible,
        format_sig(p.constraint_value, DIGITS)
    )
}

pub fn kpi_output(args: &KpiArgs, tol: &ToleranceConfig) -> CliResult<JobOutput> {
    let kpi = Kpi::new(args.w, args.p, KpiClass::from_index(args.class)?)?;
    if args.region {
        if !(args.mu > 0.0) {
            return Err(Error::OutOfRange {
                name: "mu",
                value: args.mu,
                expected: "> 0",
            }
            .into());
        }
        let region = feasible_region(&kpi, args.mu, args.resolution, tol)?;
        let mut out = format!("{REGION_HEADER}\n");
        for (name, boundary) in [("lower", &region.lower_boundary), ("upper", &region.upper_boundary)] {
            for (l1, l2) in boundary.iter() {
                let _ = writeln!(out, "{name},{}", row(&[*l1, *l2]));
            }
        }
        let infeasible = region
            .upper_boundary
            .is_empty()
            .then(|| "the feasible region is empty".to_string());
        return Ok(JobOutput { csv: out, infeasible });
    }
    let (Some(lam1), Some(lam2)) = (args.lam1, args.lam2) else {
        return Err(CliError::Usage(
            "--lam1 and --lam2 are required unless --region is given".into(),
        ));
    };
    let base = QueueConfig::new(lam1, lam2, args.mu, 0.0, args.d, args.service.into());
    let d_values = match &args.sweep_d {
        Some(r) => r.values(),
        None => vec![args.d],
    };
    for &d in &d_values {
        base.with_d(d).validate()?;
    }
    let points = policy_sweep(&base, &kpi, &d_values, tol)?;
    let mut out = format!("{POLICY_HEADER}\n");
    for p in &points {
        out.push_str(&policy_row(p));
        out.push('\n');
    }
    let infeasible = (!points.iter().any(|p| p.feasible)).then(|| {
        format!(
            "KPI P(W{} <= {}) >= {} cannot be met at any requested delay",
            args.class, args.w, args.p
        )
    });
    Ok(JobOutput { csv: out, infeasible })
}

pub fn run_job(job: &Job, tol: &ToleranceConfig) -> CliResult<JobOutput> {
    let csv = match job {
        Job::Mean(a) => mean_csv(a, tol)?,
        Job::Cdf(a) => cdf_csv(a, tol)?,
        Job::Simulate(a) => simulate_csv(a)?,
        Job::Kpi(a) => return kpi_output(a, tol),
    };
    Ok(JobOutput { csv, infeasible: None })
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn manifest_path(output: &OutputArgs) -> Option<PathBuf> {
    output.manifest.clone().or_else(|| {
        output.out.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    })
}

/// Runs a job, writes the CSV and manifest, and maps infeasibility to an error
/// after the outputs are on disk.
pub fn execute(job: Job, tol: ToleranceConfig, output: &OutputArgs) -> CliResult<()> {
    let started = Instant::now();
    let result = run_job(&job, &tol)?;
    match &output.out {
        Some(path) => write_file(path, &result.csv)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(result.csv.as_bytes()).and_then(|_| stdout.flush()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                other => other.map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })?,
            }
        }
    }
    if let Some(path) = manifest_path(output) {
        let manifest = RunManifest {
            subcommand: job.name().to_string(),
            parameters: job,
            tolerances: tol,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        };
        write_file(&path, &serde_json::to_string_pretty(&manifest)?)?;
    }
    match result.infeasible {
        Some(msg) => Err(CliError::Infeasible(msg)),
        None => Ok(()),
    }
}

pub fn read_manifest(path: &Path) -> CliResult<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let env_tol = || ToleranceConfig::from_env().map_err(CliError::from);
    match cli.command {
        Command::Mean { args, output } => execute(Job::Mean(args), env_tol()?, &output),
        Command::Cdf { args, output } => execute(Job::Cdf(args), env_tol()?, &output),
        Command::Simulate { args, output } => execute(Job::Simulate(args), env_tol()?, &output),
        Command::Kpi { args, output } => execute(Job::Kpi(args), env_tol()?, &output),
        Command::Replay { args, output } => {
            let manifest = read_manifest(&args.manifest_path)?;
            manifest.tolerances.check()?;
            execute(manifest.parameters, manifest.tolerances, &output)
        }
    }
}
