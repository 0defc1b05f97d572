//! Monte Carlo driver: RASE tables, estimator-vs-truth curves and empirical
//! checks of the asymptotic normality of the estimators.
//!
//! Every replication draws from its own ChaCha stream: the seed is derived
//! from `(base_seed, case, mode, n, β)` and the stream index is the
//! replication number. Results therefore do not depend on scheduling or on the
//! number of worker threads. The estimator type and the refinement factor do
//! not enter the seed, so discrete and continuous cells share their drivers.

use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::density::InvariantDensity;
use crate::error::{Error, Result};
use crate::estimate::{nw, EstimateResult, EstimatorType};
use crate::kernel::{bandwidth, delta_of_n, KernelSpec};
use crate::model::{
    builtin_drift, midpoint_grid, validate_schedule, BarrierConfig, BarrierMode, DriftSpec, Regime, Schedule,
    ScheduleWarning,
};
use crate::simulate::{simulate_fine, simulate_path, SimConfig};

/// `ε` used when checking schedules for the normality study.
pub const SCHEDULE_EPSILON: f64 = 0.01;

#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    /// Label written to result files; 0 for user-supplied drifts.
    pub case_id: u8,
    pub drift: DriftSpec,
    pub barrier_mode: BarrierMode,
    pub sigma: f64,
    pub lower: f64,
    pub upper: f64,
    pub n_list: Vec<usize>,
    pub beta_list: Vec<f64>,
    pub n_replications: usize,
    pub grid_count: usize,
    pub estimator: EstimatorType,
    pub base_seed: u64,
    /// Fine steps per observation step for the continuous-type estimator.
    pub refine: usize,
    /// Initial state; the barrier default when `None`.
    pub x0: Option<f64>,
    pub burn_in: usize,
}

impl ExperimentPlan {
    /// Reference design for a builtin case: σ = 0.2 on `[0, 3]`,
    /// n ∈ {400, 900, 1600}, β ∈ {0.3, 0.2, 0.15}, 1000 replications,
    /// 300 grid points.
    pub fn for_case(case_id: u8) -> Result<Self> {
        Ok(ExperimentPlan {
            case_id,
            drift: builtin_drift(case_id)?,
            barrier_mode: BarrierMode::TwoSided,
            sigma: 0.2,
            lower: 0.0,
            upper: 3.0,
            n_list: vec![400, 900, 1600],
            beta_list: vec![0.3, 0.2, 0.15],
            n_replications: 1000,
            grid_count: 300,
            estimator: EstimatorType::Discrete,
            base_seed: 0,
            refine: 10,
            x0: None,
            burn_in: 0,
        })
    }

    pub fn with_drift(mut self, drift: DriftSpec) -> Self {
        self.case_id = 0;
        self.drift = drift;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.n_list.iter().any(|&n| n < 2) {
            return Err(Error::invalid("n_list must be non-empty with every n >= 2"));
        }
        if self.beta_list.is_empty() || self.beta_list.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::invalid("beta_list must be non-empty with every beta in (0, 1)"));
        }
        if self.n_replications == 0 || self.grid_count == 0 || self.refine == 0 {
            return Err(Error::invalid("replications, grid count and refine must be positive"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        BarrierConfig::two_sided(self.lower, self.upper)?;
        if let Some(x0) = self.x0 {
            if !self.barrier(self.barrier_mode)?.contains(x0) {
                return Err(Error::invalid(format!("x0 = {x0} lies outside the barrier domain")));
            }
        }
        Ok(())
    }

    /// Non-fatal issues with the plan.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.drift.is_numerically_zero(self.lower, self.upper, 1000) {
            out.push(format!("drift '{}' is numerically zero on [{}, {}]", self.drift.name(), self.lower, self.upper));
        }
        out
    }

    fn barrier(&self, mode: BarrierMode) -> Result<BarrierConfig> {
        BarrierConfig::for_mode(mode, self.lower, self.upper)
    }

    /// Estimation grid: midpoints of 300 (by default) cells on `[l, u]`, for
    /// both barrier modes.
    pub fn grid(&self) -> Vec<f64> {
        midpoint_grid(self.lower, self.upper, self.grid_count)
    }

    fn sim_config(&self, barrier: BarrierConfig, n: usize, delta: f64, seed: u64, stream: u64) -> SimConfig {
        let cfg = SimConfig::new(self.drift.clone(), self.sigma, barrier, n, delta)
            .with_seed(seed)
            .with_stream(stream)
            .with_burn_in(self.burn_in);
        match self.x0 {
            Some(x0) => cfg.with_x0(x0),
            None => cfg,
        }
    }

    fn simulate(&self, cfg: &SimConfig) -> Result<crate::model::SamplePath> {
        match self.estimator {
            EstimatorType::Discrete => simulate_path(cfg),
            EstimatorType::Continuous => simulate_fine(cfg, self.refine),
        }
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the replication streams of one cell.
pub fn cell_seed(base_seed: u64, case_id: u8, mode: BarrierMode, n: usize, beta: f64) -> u64 {
    let mode_tag = match mode {
        BarrierMode::TwoSided => 1,
        BarrierMode::OneSidedLower => 2,
    };
    [case_id as u64, mode_tag, n as u64, beta.to_bits()]
        .into_iter()
        .fold(mix(base_seed), |acc, v| mix(acc ^ v))
}

/// `sqrt(mean((b̂ - b)²))` over the defined grid points.
pub fn rase(estimates: &EstimateResult, truth: &DriftSpec) -> Result<f64> {
    let (sum, m) = estimates
        .defined()
        .fold((0.0, 0usize), |(s, m), (x, v)| {
            let e = v - truth.eval(x);
            (s + e * e, m + 1)
        });
    if m == 0 {
        return Err(Error::NoData);
    }
    Ok((sum / m as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct McSummary {
    pub case_id: u8,
    pub mode: BarrierMode,
    pub n: usize,
    pub beta: f64,
    pub h: f64,
    pub delta: f64,
    pub rase_mean: f64,
    /// Sample standard deviation of the replication RASEs.
    pub rase_std: f64,
    pub rase_median: f64,
    /// Mean number of undefined grid points per replication.
    pub excluded_points_mean: f64,
    pub n_replications: usize,
}

impl McSummary {
    /// Standard error of `rase_mean`.
    pub fn rase_se(&self) -> f64 {
        self.rase_std / (self.n_replications as f64).sqrt()
    }
}

/// Mean, sample standard deviation and median. Sums run over the sorted
/// values, so the result is exactly invariant under reordering.
pub fn summary_stats(values: &[f64]) -> (f64, f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / m as f64;
    let std = if m > 1 {
        (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
    } else {
        0.0
    };
    let median = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    };
    (mean, std, median)
}

/// RASE and excluded-point count of every replication of one cell, in
/// replication order.
pub fn cell_replications(plan: &ExperimentPlan, n: usize, beta: f64) -> Result<Vec<(f64, usize)>> {
    plan.validate()?;
    let delta = delta_of_n(n)?;
    let kernel = KernelSpec::epanechnikov(bandwidth(n, beta)?)?;
    let barrier = plan.barrier(plan.barrier_mode)?;
    let grid = plan.grid();
    let seed = cell_seed(plan.base_seed, plan.case_id, plan.barrier_mode, n, beta);

    (0..plan.n_replications as u64)
        .into_par_iter()
        .map(|r| {
            let run = || -> Result<(f64, usize)> {
                let cfg = plan.sim_config(barrier, n, delta, seed, r);
                let path = plan.simulate(&cfg)?;
                let est = nw(&path, &kernel, &grid, plan.estimator)?;
                Ok((rase(&est, &plan.drift)?, est.excluded_count()))
            };
            run().map_err(|e| e.in_replication(r))
        })
        .collect()
}

/// Monte Carlo summary of one `(n, β)` cell in `plan.barrier_mode`.
pub fn run_cell(plan: &ExperimentPlan, n: usize, beta: f64) -> Result<McSummary> {
    let reps = cell_replications(plan, n, beta)?;
    let rases = reps.iter().map(|r| r.0).collect::<Vec<_>>();
    let (rase_mean, rase_std, rase_median) = summary_stats(&rases);
    let excluded_points_mean = reps.iter().map(|r| r.1 as f64).sum::<f64>() / reps.len() as f64;
    Ok(McSummary {
        case_id: plan.case_id,
        mode: plan.barrier_mode,
        n,
        beta,
        h: bandwidth(n, beta)?,
        delta: delta_of_n(n)?,
        rase_mean,
        rase_std,
        rase_median,
        excluded_points_mean,
        n_replications: reps.len(),
    })
}

/// Identifies a table cell whose run failed.
#[derive(Debug)]
pub struct CellFailure {
    pub mode: BarrierMode,
    pub n: usize,
    pub beta: f64,
    pub error: Error,
}

/// Runs every cell of `n_list × beta_list × modes`; failing cells are
/// reported without stopping the others.
pub fn run_table_modes(plan: &ExperimentPlan, modes: &[BarrierMode]) -> Vec<Result<McSummary, CellFailure>> {
    let mut out = Vec::new();
    for &n in &plan.n_list {
        for &beta in &plan.beta_list {
            for &mode in modes {
                let cell_plan = ExperimentPlan {
                    barrier_mode: mode,
                    ..plan.clone()
                };
                out.push(run_cell(&cell_plan, n, beta).map_err(|error| CellFailure { mode, n, beta, error }));
            }
        }
    }
    out
}

/// [`run_table_modes`] over both barrier modes.
pub fn run_table(plan: &ExperimentPlan) -> Vec<Result<McSummary, CellFailure>> {
    run_table_modes(plan, &BarrierMode::ALL)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub x: f64,
    pub estimate: Option<f64>,
    pub truth: f64,
}

/// Estimator and true drift on the grid for one replication.
pub fn curve(plan: &ExperimentPlan, n: usize, beta: f64, seed: u64) -> Result<Vec<CurveRow>> {
    plan.validate()?;
    let delta = delta_of_n(n)?;
    let kernel = KernelSpec::epanechnikov(bandwidth(n, beta)?)?;
    let barrier = plan.barrier(plan.barrier_mode)?;
    let cfg = plan.sim_config(barrier, n, delta, seed, 0);
    let path = plan.simulate(&cfg)?;
    let est = nw(&path, &kernel, &plan.grid(), plan.estimator)?;
    Ok((0..est.grid.len())
        .map(|i| CurveRow {
            x: est.grid[i],
            estimate: est.value(i),
            truth: plan.drift.eval(est.grid[i]),
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct NormalityPlan {
    pub case_id: u8,
    pub drift: DriftSpec,
    pub barrier_mode: BarrierMode,
    pub sigma: f64,
    pub lower: f64,
    pub upper: f64,
    pub x0: f64,
    pub n: usize,
    pub beta: f64,
    pub n_replications: usize,
    pub base_seed: u64,
    pub estimator: EstimatorType,
    pub refine: usize,
    pub start: Option<f64>,
    pub burn_in: usize,
}

impl NormalityPlan {
    /// Two-sided discrete-type study for a builtin case on `[0, 3]`, σ = 0.2.
    pub fn for_case(case_id: u8, x0: f64, n: usize, beta: f64, n_replications: usize, base_seed: u64) -> Result<Self> {
        Ok(NormalityPlan {
            case_id,
            drift: builtin_drift(case_id)?,
            barrier_mode: BarrierMode::TwoSided,
            sigma: 0.2,
            lower: 0.0,
            upper: 3.0,
            x0,
            n,
            beta,
            n_replications,
            base_seed,
            estimator: EstimatorType::Discrete,
            refine: 10,
            start: None,
            burn_in: 0,
        })
    }
}

impl NormalityPlan {
    /// Checks the preconditions and returns the barrier configuration.
    pub fn validate(&self) -> Result<BarrierConfig> {
        if self.n_replications < 2 {
            return Err(Error::invalid("normality check needs at least 2 replications"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.refine == 0 {
            return Err(Error::invalid("refine must be positive"));
        }
        let h = bandwidth(self.n, self.beta)?;
        let barrier = BarrierConfig::for_mode(self.barrier_mode, self.lower, self.upper)?;
        if !barrier.contains(self.x0) || barrier.distance_to_boundary(self.x0) <= h {
            return Err(Error::invalid(format!(
                "x0 = {} must be further than h = {h} from the barriers",
                self.x0
            )));
        }
        if let Some(start) = self.start {
            if !barrier.contains(start) {
                return Err(Error::invalid(format!("start = {start} lies outside the barrier domain")));
            }
        }
        Ok(barrier)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalityReport {
    pub case_id: u8,
    pub x0: f64,
    pub n: usize,
    pub beta: f64,
    pub estimator: EstimatorType,
    /// `Σ(x0) = σ²/F(x0)` from the invariant density.
    pub sigma_asym: f64,
    pub mean_z: f64,
    pub var_z: f64,
    pub ks_stat: f64,
    /// Replications whose estimate at `x0` was undefined.
    pub dropped: usize,
    pub z: Vec<f64>,
    pub schedule_warnings: Vec<ScheduleWarning>,
}

fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Kolmogorov-Smirnov distance between the sample and `N(0, 1)`.
pub fn ks_standard_normal(sample: &[f64]) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let cdf = standard_normal_cdf(z);
            ((i + 1) as f64 / m - cdf).max(cdf - i as f64 / m)
        })
        .fold(0.0, f64::max)
}

/// Standardized errors `z = sqrt(nhΔ)(b̂(x0) - b(x0)) / sqrt(Σ(x0))` over
/// independent replications. For the continuous-type estimator the scaling
/// is `sqrt(Th)` with `T = nΔ`, which is the same number.
pub fn normality_check(plan: &NormalityPlan) -> Result<NormalityReport> {
    let barrier = plan.validate()?;
    let delta = delta_of_n(plan.n)?;
    let h = bandwidth(plan.n, plan.beta)?;
    let kernel = KernelSpec::epanechnikov(h)?;
    let schedule = Schedule::new(plan.n, delta, h, SCHEDULE_EPSILON)?;
    let schedule_warnings = validate_schedule(&schedule, Regime::DiscreteNormality);

    let density = InvariantDensity::new(plan.drift.clone(), plan.sigma, barrier)?;
    let sigma_asym = density.sigma_eval(&kernel, plan.x0)?;
    let scale = (plan.n as f64 * h * delta).sqrt() / sigma_asym.sqrt();
    let truth = plan.drift.eval(plan.x0);
    let seed = cell_seed(plan.base_seed, plan.case_id, plan.barrier_mode, plan.n, plan.beta);

    let estimates = (0..plan.n_replications as u64)
        .into_par_iter()
        .map(|r| {
            let run = || -> Result<Option<f64>> {
                let mut cfg = SimConfig::new(plan.drift.clone(), plan.sigma, barrier, plan.n, delta)
                    .with_seed(seed)
                    .with_stream(r)
                    .with_burn_in(plan.burn_in);
                if let Some(start) = plan.start {
                    cfg = cfg.with_x0(start);
                }
                let path = match plan.estimator {
                    EstimatorType::Discrete => simulate_path(&cfg)?,
                    EstimatorType::Continuous => simulate_fine(&cfg, plan.refine)?,
                };
                Ok(nw(&path, &kernel, &[plan.x0], plan.estimator)?.value(0))
            };
            run().map_err(|e| e.in_replication(r))
        })
        .collect::<Result<Vec<_>>>()?;

    let z = estimates
        .iter()
        .flatten()
        .map(|b| scale * (b - truth))
        .collect::<Vec<_>>();
    let dropped = estimates.len() - z.len();
    if z.len() < 2 {
        return Err(Error::NoData);
    }
    let (mean_z, std_z, _) = summary_stats(&z);
    Ok(NormalityReport {
        case_id: plan.case_id,
        x0: plan.x0,
        n: plan.n,
        beta: plan.beta,
        estimator: plan.estimator,
        sigma_asym,
        mean_z,
        var_z: std_z * std_z,
        ks_stat: ks_standard_normal(&z),
        dropped,
        z,
        schedule_warnings,
    })
}
