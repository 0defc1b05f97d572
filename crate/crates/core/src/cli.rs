//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 on usage errors (bad flags, invalid parameter
//! values, bad config file), 1 on runtime failures. Output files are written
//! only after the whole computation has succeeded.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::density::InvariantDensity;
use crate::error::{Error, Result};
use crate::estimate::{nw, EstimatorType};
use crate::experiment::{self, ExperimentPlan, NormalityPlan};
use crate::io::{self, Metadata};
use crate::kernel::{bandwidth, delta_of_n, BuiltinKernel, KernelSpec};
use crate::model::{builtin_drift, midpoint_grid, BarrierConfig, BarrierMode};
use crate::simulate::{simulate_fine, simulate_path, SimConfig};

#[derive(Debug, Parser)]
#[command(
    name = "reflected-nw",
    version,
    about = "Simulate reflected diffusions and estimate their drift with Nadaraya-Watson estimators"
)]
pub struct Cli {
    /// Worker threads for Monte Carlo replications [default: number of CPUs]; results do not depend on it
    #[arg(long, global = true, value_name = "COUNT", value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,

    /// File of `key = value` lines (`#` starts a comment) supplying flag values; command-line flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one reflected path and write `t,x,l_reg,r_reg`
    Simulate(SimulateArgs),
    /// Tabulate the invariant density, F and the asymptotic variance: `x,pi,f,sigma_asym`
    Density(DensityArgs),
    /// Estimate the drift from a path CSV: `x,estimate,denominator,undefined,boundary`
    Estimate(EstimateArgs),
    /// Monte Carlo RASE table over n, beta and barrier modes, or one estimator curve with --curve
    Experiment(ExperimentArgs),
    /// Standardized estimation errors at one point: `case,x0,n,beta,mean_z,var_z,ks_stat,dropped`
    Normality(NormalityArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Builtin drift: 1 = sin(2πx) + 1.5x, 2 = sqrt(1 + x²), 3 = 2 sqrt(x)
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub case: u8,

    /// Diffusion coefficient σ (state units per sqrt(time unit))
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,

    /// Lower barrier l (state units)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lower: f64,

    /// Upper barrier u (state units); ignored by one-sided runs except as the grid end
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub upper: f64,
}

fn parse_mode(s: &str) -> std::result::Result<BarrierMode, String> {
    s.parse::<BarrierMode>().map_err(|e| e.to_string())
}

fn parse_estimator(s: &str) -> std::result::Result<EstimatorType, String> {
    s.parse::<EstimatorType>().map_err(|e| e.to_string())
}

fn parse_kernel(s: &str) -> std::result::Result<BuiltinKernel, String> {
    s.parse::<BuiltinKernel>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output CSV file [default: standard output]
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Barrier mode: two-sided or one-sided (lower barrier only)
    #[arg(long, default_value = "two-sided", value_parser = parse_mode)]
    pub mode: BarrierMode,

    /// Number of observation steps
    #[arg(long, default_value_t = 1000)]
    pub n: usize,

    /// Observation step Δ (time units) [default: n^(-2/3)]
    #[arg(long)]
    pub delta: Option<f64>,

    /// Initial state (state units) [default: (l+u)/2 two-sided, l+1 one-sided]
    #[arg(long, allow_negative_numbers = true)]
    pub x0: Option<f64>,

    /// Steps simulated and discarded before recording
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,

    /// Fine steps per observation step; the fine path is written when > 1
    #[arg(long, default_value_t = 1)]
    pub refine: usize,

    /// Random seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Random stream index within the seed
    #[arg(long, default_value_t = 0)]
    pub stream: u64,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Barrier mode: two-sided or one-sided (lower barrier only)
    #[arg(long, default_value = "two-sided", value_parser = parse_mode)]
    pub mode: BarrierMode,

    /// Number of grid points (cell midpoints of [grid-min, grid-max])
    #[arg(long, default_value_t = 300)]
    pub grid: usize,

    /// Grid start (state units) [default: lower]
    #[arg(long, allow_negative_numbers = true)]
    pub grid_min: Option<f64>,

    /// Grid end (state units) [default: upper]
    #[arg(long, allow_negative_numbers = true)]
    pub grid_max: Option<f64>,

    /// Bandwidth h used for F and sigma_asym (state units) [default: n^(-beta)]
    #[arg(long)]
    pub h: Option<f64>,

    /// Sample size defining the default bandwidth
    #[arg(long, default_value_t = 1600)]
    pub n: usize,

    /// Bandwidth exponent defining the default bandwidth
    #[arg(long, default_value_t = 0.3)]
    pub beta: f64,

    /// Initial Simpson panel count for the normalizer
    #[arg(long, default_value_t = 1024)]
    pub panels: usize,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// Path CSV with columns t,x,l_reg,r_reg
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    /// Bandwidth h (state units)
    #[arg(long)]
    pub h: f64,

    /// Kernel: epanechnikov, triangular, biweight or uniform
    #[arg(long, default_value = "epanechnikov", value_parser = parse_kernel)]
    pub kernel: BuiltinKernel,

    /// Grid start (state units) [default: lower barrier]
    #[arg(long, allow_negative_numbers = true)]
    pub grid_min: Option<f64>,

    /// Grid end (state units) [default: upper barrier, or 3 above a one-sided lower barrier]
    #[arg(long, allow_negative_numbers = true)]
    pub grid_max: Option<f64>,

    /// Number of grid points (cell midpoints)
    #[arg(long, default_value_t = 300)]
    pub grid_count: usize,

    /// Estimator: discrete or continuous (for fine paths)
    #[arg(long = "type", default_value = "discrete", value_parser = parse_estimator)]
    pub estimator: EstimatorType,

    /// Barrier mode override [default: from the path metadata]
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<BarrierMode>,

    /// Lower barrier override (state units) [default: from the path metadata]
    #[arg(long, allow_negative_numbers = true)]
    pub lower: Option<f64>,

    /// Upper barrier override (state units) [default: from the path metadata]
    #[arg(long, allow_negative_numbers = true)]
    pub upper: Option<f64>,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeChoice {
    TwoSided,
    OneSided,
    Both,
}

impl ModeChoice {
    fn modes(self) -> Vec<BarrierMode> {
        match self {
            ModeChoice::TwoSided => vec![BarrierMode::TwoSided],
            ModeChoice::OneSided => vec![BarrierMode::OneSidedLower],
            ModeChoice::Both => BarrierMode::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Barrier modes to run
    #[arg(long, value_enum, default_value_t = ModeChoice::Both)]
    pub mode: ModeChoice,

    /// Observation counts n (comma separated); Δ = n^(-2/3)
    #[arg(long, value_delimiter = ',', default_values_t = [400usize, 900, 1600])]
    pub n_list: Vec<usize>,

    /// Bandwidth exponents β (comma separated); h = n^(-β)
    #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.2, 0.15])]
    pub beta_list: Vec<f64>,

    /// Monte Carlo replications per cell
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,

    /// Number of estimation grid points (cell midpoints of [lower, upper])
    #[arg(long, default_value_t = 300)]
    pub grid: usize,

    /// Estimator: discrete or continuous
    #[arg(long = "type", default_value = "discrete", value_parser = parse_estimator)]
    pub estimator: EstimatorType,

    /// Fine steps per observation step for the continuous estimator
    #[arg(long, default_value_t = 10)]
    pub refine: usize,

    /// Initial state (state units) [default: (l+u)/2 two-sided, l+1 one-sided]
    #[arg(long, allow_negative_numbers = true)]
    pub x0: Option<f64>,

    /// Steps simulated and discarded before recording
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,

    /// Base random seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Write one replication's estimate and the true drift (`x,estimate,truth`)
    /// instead of the table; needs a single n, a single β and a single mode
    #[arg(long)]
    pub curve: bool,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct NormalityArgs {
    /// Builtin drift: 1 = sin(2πx) + 1.5x, 2 = sqrt(1 + x²), 3 = 2 sqrt(x)
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub case: u8,

    /// Diffusion coefficient σ (state units per sqrt(time unit))
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,

    /// Lower barrier l (state units)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lower: f64,

    /// Upper barrier u (state units)
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub upper: f64,

    /// Barrier mode: two-sided or one-sided (lower barrier only)
    #[arg(long, default_value = "two-sided", value_parser = parse_mode)]
    pub mode: BarrierMode,

    /// Evaluation point (state units), more than h from the barriers
    #[arg(long, default_value_t = 1.5, allow_negative_numbers = true)]
    pub x0: f64,

    /// Observation count; Δ = n^(-2/3)
    #[arg(long, default_value_t = 1600)]
    pub n: usize,

    /// Bandwidth exponent; h = n^(-β)
    #[arg(long, default_value_t = 0.3)]
    pub beta: f64,

    /// Monte Carlo replications
    #[arg(long, default_value_t = 500)]
    pub reps: usize,

    /// Estimator: discrete or continuous
    #[arg(long = "type", default_value = "discrete", value_parser = parse_estimator)]
    pub estimator: EstimatorType,

    /// Fine steps per observation step for the continuous estimator
    #[arg(long, default_value_t = 10)]
    pub refine: usize,

    /// Initial state of each path (state units) [default: (l+u)/2 two-sided, l+1 one-sided]
    #[arg(long, allow_negative_numbers = true)]
    pub start: Option<f64>,

    /// Steps simulated and discarded before recording
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,

    /// Base random seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    pub output: OutputArgs,
}

const GLOBAL_VALUE_FLAGS: [&str; 2] = ["--threads", "--config"];

fn flag_value(args: &[OsString], flag: &str) -> Option<OsString> {
    let eq = format!("{flag}=");
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == flag {
            return iter.next().cloned();
        }
        if let Some(v) = s.strip_prefix(&eq) {
            return Some(v.into());
        }
    }
    None
}

/// Parses `key = value` lines; keys use either `-` or `_` as separators.
pub fn parse_config_text(text: &str) -> std::result::Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected `key = value`, got '{line}'", i + 1))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("config line {}: empty key", i + 1));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Splices the values of a `--config` file into `args` right after the
/// subcommand name, skipping keys that are also given on the command line.
pub fn expand_config(args: Vec<OsString>) -> std::result::Result<Vec<OsString>, String> {
    let Some(path) = flag_value(&args, "--config") else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config file {}: {e}", path.to_string_lossy()))?;
    let entries = parse_config_text(&text)?;

    let mut pos = 1;
    while pos < args.len() {
        let s = args[pos].to_string_lossy();
        if GLOBAL_VALUE_FLAGS.contains(&s.as_ref()) {
            pos += 2;
        } else if GLOBAL_VALUE_FLAGS.iter().any(|f| s.starts_with(&format!("{f}="))) {
            pos += 1;
        } else {
            break;
        }
    }
    let cmd = Cli::command();
    let sub_name = args.get(pos).map(|a| a.to_string_lossy().into_owned()).unwrap_or_default();
    let Some(sub) = cmd.find_subcommand(&sub_name) else {
        // let clap report the missing or unknown subcommand
        return Ok(args);
    };

    let given = |key: &str| {
        let flag = format!("--{key}");
        let eq = format!("{flag}=");
        args.iter()
            .map(|a| a.to_string_lossy())
            .any(|a| a == flag || a.starts_with(&eq))
    };
    let mut spliced = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            return Err("config files cannot include other config files".into());
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .or_else(|| cmd.get_arguments().find(|a| a.get_long() == Some(key.as_str())))
            .ok_or_else(|| format!("unknown config key '{key}' for subcommand '{sub_name}'"))?;
        if given(&key) {
            continue;
        }
        if arg.get_action().takes_values() {
            spliced.push(OsString::from(format!("--{key}")));
            spliced.push(OsString::from(value));
        } else {
            match value.as_str() {
                "true" | "1" | "yes" => spliced.push(OsString::from(format!("--{key}"))),
                "false" | "0" | "no" => {}
                other => return Err(format!("config key '{key}' expects true or false, got '{other}'")),
            }
        }
    }
    let mut out = args[..=pos].to_vec();
    out.extend(spliced);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

/// Parses the command line, applying any `--config` file. The error carries
/// the exit code clap would use (0 for `--help`/`--version`).
pub fn parse<I, T>(args: I) -> std::result::Result<Cli, (i32, String)>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args = args.into_iter().map(Into::into).collect::<Vec<_>>();
    let args = expand_config(args).map_err(|m| (2, format!("error: {m}\n")))?;
    Cli::try_parse_from(args).map_err(|e| {
        let code = if e.use_stderr() { 2 } else { 0 };
        (code, e.render().to_string())
    })
}

/// A validated job ready to run.
#[derive(Debug)]
enum Job {
    Simulate { cfg: SimConfig, refine: usize, case: u8 },
    Density { density_args: DensityArgs, barrier: BarrierConfig, kernel: KernelSpec, grid: Vec<f64> },
    Estimate { args: EstimateArgs, kernel: KernelSpec },
    Table { plan: ExperimentPlan, modes: Vec<BarrierMode> },
    Curve { plan: ExperimentPlan, n: usize, beta: f64 },
    Normality { plan: NormalityPlan },
}

/// Bytes to write plus the run summary.
struct Output {
    bytes: Vec<u8>,
    cells: usize,
    seed: u64,
    notes: Vec<String>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("--{name} must be positive, got {v}")))
    }
}

fn grid_bounds(lo: Option<f64>, hi: Option<f64>, default_lo: f64, default_hi: f64, count: usize) -> Result<Vec<f64>> {
    let (lo, hi) = (lo.unwrap_or(default_lo), hi.unwrap_or(default_hi));
    if count == 0 || lo >= hi || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("grid needs a positive count and min < max, got [{lo}, {hi}] x {count}")));
    }
    Ok(midpoint_grid(lo, hi, count))
}

fn prepare(command: &Command) -> Result<Job> {
    match command {
        Command::Simulate(a) => {
            if a.n == 0 || a.refine == 0 {
                return Err(Error::invalid("--n and --refine must be positive"));
            }
            let delta = match a.delta {
                Some(d) => d,
                None => delta_of_n(a.n)?,
            };
            positive("delta", delta)?;
            let barrier = BarrierConfig::for_mode(a.mode, a.model.lower, a.model.upper)?;
            let mut cfg = SimConfig::new(builtin_drift(a.model.case)?, a.model.sigma, barrier, a.n, delta)
                .with_seed(a.seed)
                .with_stream(a.stream)
                .with_burn_in(a.burn_in);
            if let Some(x0) = a.x0 {
                cfg = cfg.with_x0(x0);
            }
            cfg.validate()?;
            Ok(Job::Simulate { cfg, refine: a.refine, case: a.model.case })
        }
        Command::Density(a) => {
            positive("sigma", a.model.sigma)?;
            if a.panels < 2 {
                return Err(Error::invalid("--panels must be at least 2"));
            }
            let barrier = BarrierConfig::for_mode(a.mode, a.model.lower, a.model.upper)?;
            let h = match a.h {
                Some(h) => h,
                None => bandwidth(a.n, a.beta)?,
            };
            let kernel = KernelSpec::epanechnikov(h)?;
            let grid = grid_bounds(a.grid_min, a.grid_max, a.model.lower, a.model.upper, a.grid)?;
            if let Some(x) = grid.iter().find(|x| !barrier.contains(**x)) {
                return Err(Error::invalid(format!("grid point {x} lies outside the barrier domain")));
            }
            Ok(Job::Density { density_args: a.clone(), barrier, kernel, grid })
        }
        Command::Estimate(a) => {
            let kernel = KernelSpec::new(a.kernel, a.h)?;
            if a.grid_count == 0 {
                return Err(Error::invalid("--grid-count must be positive"));
            }
            Ok(Job::Estimate { args: a.clone(), kernel })
        }
        Command::Experiment(a) => {
            let mut plan = ExperimentPlan::for_case(a.model.case)?;
            plan.sigma = a.model.sigma;
            plan.lower = a.model.lower;
            plan.upper = a.model.upper;
            plan.n_list = a.n_list.clone();
            plan.beta_list = a.beta_list.clone();
            plan.n_replications = a.reps;
            plan.grid_count = a.grid;
            plan.estimator = a.estimator;
            plan.refine = a.refine;
            plan.x0 = a.x0;
            plan.burn_in = a.burn_in;
            plan.base_seed = a.seed;
            let modes = a.mode.modes();
            for &mode in &modes {
                ExperimentPlan { barrier_mode: mode, ..plan.clone() }.validate()?;
            }
            if a.curve {
                if plan.n_list.len() != 1 || plan.beta_list.len() != 1 || modes.len() != 1 {
                    return Err(Error::invalid(
                        "--curve needs a single --n-list value, a single --beta-list value and --mode two-sided or one-sided",
                    ));
                }
                plan.barrier_mode = modes[0];
                let (n, beta) = (plan.n_list[0], plan.beta_list[0]);
                return Ok(Job::Curve { plan, n, beta });
            }
            Ok(Job::Table { plan, modes })
        }
        Command::Normality(a) => {
            let mut plan = NormalityPlan::for_case(a.case, a.x0, a.n, a.beta, a.reps, a.seed)?;
            plan.sigma = a.sigma;
            plan.lower = a.lower;
            plan.upper = a.upper;
            plan.barrier_mode = a.mode;
            plan.estimator = a.estimator;
            plan.refine = a.refine;
            plan.start = a.start;
            plan.burn_in = a.burn_in;
            plan.validate()?;
            Ok(Job::Normality { plan })
        }
    }
}

fn plan_metadata(plan: &ExperimentPlan) -> Metadata {
    let mut meta = Metadata::with_seed(plan.base_seed)
        .push("case", plan.case_id)
        .push("sigma", plan.sigma)
        .push("lower", plan.lower)
        .push("upper", plan.upper)
        .push("reps", plan.n_replications)
        .push("grid", plan.grid_count)
        .push("estimator", plan.estimator)
        .push("refine", plan.refine)
        .push("burn_in", plan.burn_in);
    if let Some(x0) = plan.x0 {
        meta = meta.push("x0", x0);
    }
    meta
}

fn execute(job: Job) -> Result<Output> {
    let mut bytes = Vec::new();
    match job {
        Job::Simulate { cfg, refine, case } => {
            let path = if refine > 1 { simulate_fine(&cfg, refine)? } else { simulate_path(&cfg)? };
            io::write_path_csv(
                &mut bytes,
                &path,
                &[("case", case.to_string()), ("x0", cfg.x0.to_string()), ("refine", refine.to_string())],
            )?;
            Ok(Output { bytes, cells: 1, seed: cfg.seed, notes: Vec::new() })
        }
        Job::Density { density_args: a, barrier, kernel, grid } => {
            let density = InvariantDensity::with_panels(builtin_drift(a.model.case)?, a.model.sigma, barrier, a.panels)?;
            let meta = Metadata::with_seed(0)
                .push("case", a.model.case)
                .push("mode", a.mode)
                .push("sigma", a.model.sigma)
                .push("lower", a.model.lower)
                .push("upper", a.model.upper)
                .push("h", kernel.bandwidth())
                .push("log_normalizer", density.log_normalizer());
            io::write_density_csv(&mut bytes, &meta, &density, &kernel, &grid)?;
            Ok(Output { bytes, cells: 1, seed: 0, notes: Vec::new() })
        }
        Job::Estimate { args: a, kernel } => {
            let override_barrier = if a.mode.is_some() || a.lower.is_some() || a.upper.is_some() {
                Some(BarrierConfig::for_mode(
                    a.mode.unwrap_or(BarrierMode::TwoSided),
                    a.lower.unwrap_or(0.0),
                    a.upper.unwrap_or(3.0),
                )?)
            } else {
                None
            };
            let file = fs::File::open(&a.input)?;
            let path = io::read_path_csv(std::io::BufReader::new(file), override_barrier)?;
            let lower = path.barrier.lower();
            let upper = path.barrier.upper().unwrap_or(lower + 3.0);
            let grid = grid_bounds(a.grid_min, a.grid_max, lower, upper, a.grid_count)?;
            let est = nw(&path, &kernel, &grid, a.estimator)?;
            let seed = path.seed.unwrap_or(0);
            let meta = Metadata::with_seed(seed)
                .push("stream", path.stream)
                .push("input", a.input.display())
                .push("kernel", kernel.name())
                .push("h", kernel.bandwidth())
                .push("estimator", a.estimator)
                .push("mode", path.barrier.mode())
                .push("increments", est.meta.n);
            io::write_estimate_csv(&mut bytes, &meta, &est)?;
            Ok(Output { bytes, cells: 1, seed, notes: Vec::new() })
        }
        Job::Table { plan, modes } => {
            let results = experiment::run_table_modes(&plan, &modes);
            let mut cells = Vec::new();
            let mut notes = plan.warnings();
            for r in results {
                match r {
                    Ok(c) => cells.push(c),
                    Err(f) => notes.push(format!("cell mode={} n={} beta={} failed: {}", f.mode, f.n, f.beta, f.error)),
                }
            }
            if cells.is_empty() {
                return Err(Error::invalid(format!("every cell failed:\n{}", notes.join("\n"))));
            }
            io::write_results_csv(&mut bytes, &plan_metadata(&plan), &cells)?;
            Ok(Output { bytes, cells: cells.len(), seed: plan.base_seed, notes })
        }
        Job::Curve { plan, n, beta } => {
            let rows = experiment::curve(&plan, n, beta, plan.base_seed)?;
            let meta = plan_metadata(&plan).push("mode", plan.barrier_mode).push("n", n).push("beta", beta);
            io::write_curve_csv(&mut bytes, &meta, &rows)?;
            Ok(Output { bytes, cells: 1, seed: plan.base_seed, notes: plan.warnings() })
        }
        Job::Normality { plan } => {
            let report = experiment::normality_check(&plan)?;
            let meta = Metadata::with_seed(plan.base_seed)
                .push("mode", plan.barrier_mode)
                .push("sigma", plan.sigma)
                .push("lower", plan.lower)
                .push("upper", plan.upper)
                .push("reps", plan.n_replications)
                .push("estimator", plan.estimator)
                .push("refine", plan.refine)
                .push("sigma_asym", report.sigma_asym);
            let notes = report
                .schedule_warnings
                .iter()
                .map(|w| format!("schedule warning: {w}"))
                .collect();
            io::write_normality_csv(&mut bytes, &meta, std::slice::from_ref(&report))?;
            Ok(Output { bytes, cells: 1, seed: plan.base_seed, notes })
        }
    }
}

fn output_path(command: &Command) -> Option<&PathBuf> {
    match command {
        Command::Simulate(a) => a.output.out.as_ref(),
        Command::Density(a) => a.output.out.as_ref(),
        Command::Estimate(a) => a.output.out.as_ref(),
        Command::Experiment(a) => a.output.out.as_ref(),
        Command::Normality(a) => a.output.out.as_ref(),
    }
}

fn write_output(target: Option<&PathBuf>, bytes: &[u8]) -> Result<()> {
    match target {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
        Some(path) => fs::write(path, bytes).map_err(|e| {
            let _ = fs::remove_file(path);
            Error::Io(e)
        }),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let started = Instant::now();
    let job = match prepare(&cli.command) {
        Ok(job) => job,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0) as usize)
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return 1;
        }
    };
    let output = match pool.install(|| execute(job)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Err(e) = write_output(output_path(&cli.command), &output.bytes) {
        eprintln!("error: {e}");
        return 1;
    }
    for note in &output.notes {
        eprintln!("warning: {note}");
    }
    eprintln!(
        "cells={} wall={:.3}s seed={}",
        output.cells,
        started.elapsed().as_secs_f64(),
        output.seed
    );
    0
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    match parse(args) {
        Ok(cli) => run(cli),
        Err((code, message)) => {
            if code == 0 {
                print!("{message}");
            } else {
                eprint!("{message}");
            }
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        std::iter::once("reflected-nw".to_string())
            .chain(s.split_whitespace().map(String::from))
            .collect()
    }

    #[test]
    fn experiment_flags() {
        let cli = parse(argv("experiment --case 1 --mode two-sided --reps 200 --seed 42 --out t1.csv")).unwrap();
        let Command::Experiment(a) = cli.command else { panic!("wrong subcommand") };
        assert_eq!(a.reps, 200);
        assert_eq!(a.seed, 42);
        assert_eq!(a.mode, ModeChoice::TwoSided);
        assert_eq!(a.n_list, vec![400, 900, 1600]);
        assert_eq!(a.output.out, Some(PathBuf::from("t1.csv")));
    }

    #[test]
    fn unknown_case_is_a_usage_error() {
        let (code, msg) = parse(argv("experiment --case 4")).unwrap_err();
        assert_eq!(code, 2);
        assert!(msg.contains("--case"));
        assert_eq!(main_with_args(argv("simulate --case 0")), 2);
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        assert_eq!(main_with_args(argv("simulate --sigma -1 --n 5")), 2);
        assert_eq!(main_with_args(argv("normality --x0 0.01 --reps 3")), 2);
        assert_eq!(main_with_args(argv("experiment --beta-list 1.5")), 2);
        assert_eq!(main_with_args(argv("experiment --curve")), 2);
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("plan.cfg");
        fs::write(&cfg, "# plan\nreps = 80\nseed = 9\nbeta_list = 0.3,0.2\ncurve = false\n").unwrap();
        let args = argv(&format!("--config {} experiment --reps 50", cfg.display()));
        let Command::Experiment(a) = parse(args).unwrap().command else { panic!() };
        assert_eq!(a.reps, 50);
        assert_eq!(a.seed, 9);
        assert_eq!(a.beta_list, vec![0.3, 0.2]);
        assert!(!a.curve);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.cfg");
        fs::write(&cfg, "replications = 3\n").unwrap();
        let (code, msg) = parse(argv(&format!("simulate --config {}", cfg.display()))).unwrap_err();
        assert_eq!(code, 2);
        assert!(msg.contains("replications"));
        fs::write(&cfg, "just text\n").unwrap();
        assert_eq!(parse(argv(&format!("simulate --config {}", cfg.display()))).unwrap_err().0, 2);
    }

    #[test]
    fn config_text_parsing() {
        let entries = parse_config_text("a_b = 1 # trailing\n\n  # only comment\nc=x\n").unwrap();
        assert_eq!(entries, vec![("a-b".into(), "1".into()), ("c".into(), "x".into())]);
        assert!(parse_config_text("novalue\n").is_err());
    }

    #[test]
    fn help_lists_defaults_and_units() {
        let mut cmd = Cli::command();
        for name in ["simulate", "density", "estimate", "experiment", "normality"] {
            let help = cmd.find_subcommand_mut(name).unwrap().render_long_help().to_string();
            assert!(help.contains("--out"), "{name}");
            if name != "estimate" {
                assert!(help.contains("[default:"), "{name}");
            }
        }
        let sim = cmd.find_subcommand_mut("simulate").unwrap().render_long_help().to_string();
        assert!(sim.contains("time units"));
        assert!(sim.contains("state units"));
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(parse(argv("simulate --help")).unwrap_err().0, 0);
    }
}
