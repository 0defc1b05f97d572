//! Domain types shared across simulation, density evaluation and estimation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

type DriftFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A named scalar drift `b(x)`.
#[derive(Clone)]
pub struct DriftSpec {
    name: String,
    eval: Arc<DriftFn>,
    lipschitz_bound: Option<f64>,
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftSpec")
            .field("name", &self.name)
            .field("lipschitz_bound", &self.lipschitz_bound)
            .finish_non_exhaustive()
    }
}

impl DriftSpec {
    pub fn new(name: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        DriftSpec {
            name: name.into(),
            eval: Arc::new(eval),
            lipschitz_bound: None,
        }
    }

    /// Attaches a Lipschitz constant. Advisory metadata only.
    pub fn with_lipschitz_bound(mut self, bound: f64) -> Self {
        self.lipschitz_bound = Some(bound);
        self
    }

    pub fn constant(c: f64) -> Self {
        DriftSpec::new(format!("const({c})"), move |_| c)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.lipschitz_bound
    }

    /// Largest difference quotient between consecutive points of a uniform
    /// grid with `points` nodes on `[lo, hi]`.
    pub fn max_difference_quotient(&self, lo: f64, hi: f64, points: usize) -> f64 {
        let grid = uniform_nodes(lo, hi, points.max(2));
        grid.windows(2)
            .map(|w| ((self.eval(w[1]) - self.eval(w[0])) / (w[1] - w[0])).abs())
            .fold(0.0, f64::max)
    }

    /// True when `|b| <= 1e-12` on every node of a uniform grid.
    pub fn is_numerically_zero(&self, lo: f64, hi: f64, points: usize) -> bool {
        uniform_nodes(lo, hi, points.max(2))
            .into_iter()
            .all(|x| self.eval(x).abs() <= 1e-12)
    }
}

/// One of the three drifts of the reference experiments.
///
/// 1. `sin(2πx) + 1.5x`
/// 2. `sqrt(1 + x²)`
/// 3. `2 sqrt(x)` (not Lipschitz at 0, so carries no bound)
pub fn builtin_drift(case_id: u8) -> Result<DriftSpec> {
    use std::f64::consts::PI;
    match case_id {
        1 => Ok(DriftSpec::new("1", |x: f64| (2.0 * PI * x).sin() + 1.5 * x)
            .with_lipschitz_bound(2.0 * PI + 1.5)),
        2 => Ok(DriftSpec::new("2", |x: f64| (1.0 + x * x).sqrt()).with_lipschitz_bound(1.0)),
        3 => Ok(DriftSpec::new("3", |x: f64| 2.0 * x.sqrt())),
        other => Err(Error::invalid(format!("unknown drift case {other}; expected 1, 2 or 3"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BarrierMode {
    TwoSided,
    OneSidedLower,
}

impl BarrierMode {
    pub const ALL: [BarrierMode; 2] = [BarrierMode::TwoSided, BarrierMode::OneSidedLower];

    pub fn as_str(self) -> &'static str {
        match self {
            BarrierMode::TwoSided => "two-sided",
            BarrierMode::OneSidedLower => "one-sided",
        }
    }
}

impl fmt::Display for BarrierMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BarrierMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-sided" | "two_sided" => Ok(BarrierMode::TwoSided),
            "one-sided" | "one_sided" | "one_sided_lower" => Ok(BarrierMode::OneSidedLower),
            other => Err(Error::invalid(format!("unknown barrier mode '{other}'"))),
        }
    }
}

/// Reflecting barriers: `[lower, upper]`, or `[lower, ∞)` without an upper one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierConfig {
    lower: f64,
    upper: Option<f64>,
}

impl BarrierConfig {
    pub fn two_sided(lower: f64, upper: f64) -> Result<Self> {
        if !(lower >= 0.0 && lower < upper && upper.is_finite()) {
            return Err(Error::invalid(format!(
                "two-sided barriers need 0 <= l < u < inf, got l={lower}, u={upper}"
            )));
        }
        Ok(BarrierConfig {
            lower,
            upper: Some(upper),
        })
    }

    pub fn one_sided(lower: f64) -> Result<Self> {
        if !(lower >= 0.0 && lower.is_finite()) {
            return Err(Error::invalid(format!("lower barrier must be finite and >= 0, got {lower}")));
        }
        Ok(BarrierConfig { lower, upper: None })
    }

    /// Builds the barrier for `mode`; `upper` is ignored for one-sided mode.
    pub fn for_mode(mode: BarrierMode, lower: f64, upper: f64) -> Result<Self> {
        match mode {
            BarrierMode::TwoSided => BarrierConfig::two_sided(lower, upper),
            BarrierMode::OneSidedLower => BarrierConfig::one_sided(lower),
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> Option<f64> {
        self.upper
    }

    pub fn mode(&self) -> BarrierMode {
        match self.upper {
            Some(_) => BarrierMode::TwoSided,
            None => BarrierMode::OneSidedLower,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && self.upper.map_or(x.is_finite(), |u| x <= u)
    }

    /// Default initial state: the midpoint, or `l + 1` without an upper barrier.
    pub fn default_start(&self) -> f64 {
        match self.upper {
            Some(u) => 0.5 * (self.lower + u),
            None => self.lower + 1.0,
        }
    }

    /// Distance from `x` to the nearest barrier.
    pub fn distance_to_boundary(&self, x: f64) -> f64 {
        let below = (x - self.lower).abs();
        self.upper.map_or(below, |u| below.min((u - x).abs()))
    }
}

/// A simulated or observed path on the regular grid `t_k = kΔ`.
///
/// `l_reg` and `r_reg` are the cumulative regulators; `r_reg` is identically
/// zero for one-sided paths.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath {
    pub delta: f64,
    pub sigma: Option<f64>,
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub l_reg: Vec<f64>,
    pub r_reg: Vec<f64>,
    pub seed: Option<u64>,
    pub stream: u64,
    pub barrier: BarrierConfig,
}

/// One forward step `[t_k, t_{k+1}]` of a path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Increment {
    pub x: f64,
    pub dx: f64,
    pub dl: f64,
    pub dr: f64,
}

impl SamplePath {
    /// Number of grid points, `n + 1`.
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Forward increments for `k = 0..n-1`.
    pub fn increments(&self) -> impl Iterator<Item = Increment> + '_ {
        (0..self.x.len().saturating_sub(1)).map(move |k| Increment {
            x: self.x[k],
            dx: self.x[k + 1] - self.x[k],
            dl: self.l_reg[k + 1] - self.l_reg[k],
            dr: self.r_reg[k + 1] - self.r_reg[k],
        })
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Grid points sampled every `every` steps, as a coarse observation of a
    /// fine path.
    pub fn subsample(&self, every: usize) -> Result<SamplePath> {
        if every == 0 {
            return Err(Error::invalid("subsampling factor must be >= 1"));
        }
        let pick = |v: &[f64]| v.iter().copied().step_by(every).collect::<Vec<_>>();
        Ok(SamplePath {
            delta: self.delta * every as f64,
            sigma: self.sigma,
            times: pick(&self.times),
            x: pick(&self.x),
            l_reg: pick(&self.l_reg),
            r_reg: pick(&self.r_reg),
            seed: self.seed,
            stream: self.stream,
            barrier: self.barrier,
        })
    }
}

/// Observation count, step and bandwidth of one design point of a schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub n: usize,
    pub delta: f64,
    pub h: f64,
    pub epsilon: f64,
}

impl Schedule {
    pub fn new(n: usize, delta: f64, h: f64, epsilon: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("schedule needs n >= 2, got {n}")));
        }
        for (name, v) in [("delta", delta), ("h", h), ("epsilon", epsilon)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("schedule {name} must be positive, got {v}")));
            }
        }
        if epsilon >= 0.5 {
            return Err(Error::invalid(format!("schedule epsilon must be < 1/2, got {epsilon}")));
        }
        Ok(Schedule { n, delta, h, epsilon })
    }

    /// The schedule `Δ = n^(-2/3)`, `h = n^(-beta)` at `n`.
    pub fn power_law(n: usize, beta: f64, epsilon: f64) -> Result<Self> {
        let nf = n as f64;
        Schedule::new(n, nf.powf(-2.0 / 3.0), nf.powf(-beta), epsilon)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    DiscreteConsistency,
    DiscreteNormality,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tendency {
    ToZero,
    ToInfinity,
}

/// Products of `(n, Δ, h)` whose limits the estimator theory constrains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleProduct {
    Delta,
    Bandwidth,
    NDelta,
    HolderRatio,
    NhDelta,
    Nh3Delta,
    NDeltaSquaredOverH,
}

impl ScheduleProduct {
    /// Exponents `(a, b, c, ε-coefficient)` of `n^a h^b Δ^(c + k ε)`.
    fn exponents(self) -> (f64, f64, f64, f64) {
        match self {
            ScheduleProduct::Delta => (0.0, 0.0, 1.0, 0.0),
            ScheduleProduct::Bandwidth => (0.0, 1.0, 0.0, 0.0),
            ScheduleProduct::NDelta => (1.0, 0.0, 1.0, 0.0),
            ScheduleProduct::HolderRatio => (0.0, -1.0, 0.5, -1.0),
            ScheduleProduct::NhDelta => (1.0, 1.0, 1.0, 0.0),
            ScheduleProduct::Nh3Delta => (1.0, 3.0, 1.0, 0.0),
            ScheduleProduct::NDeltaSquaredOverH => (1.0, -1.0, 2.0, -1.0),
        }
    }

    fn label(self) -> &'static str {
        match self {
            ScheduleProduct::Delta => "Δ",
            ScheduleProduct::Bandwidth => "h",
            ScheduleProduct::NDelta => "nΔ",
            ScheduleProduct::HolderRatio => "Δ^(1/2-ε)h^-1",
            ScheduleProduct::NhDelta => "nhΔ",
            ScheduleProduct::Nh3Delta => "nh³Δ",
            ScheduleProduct::NDeltaSquaredOverH => "nh^-1Δ^(2-ε)",
        }
    }

    fn value(self, n: f64, delta: f64, h: f64, epsilon: f64) -> f64 {
        let (a, b, c, k) = self.exponents();
        n.powf(a) * h.powf(b) * delta.powf(c + k * epsilon)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleWarning {
    pub product: ScheduleProduct,
    pub required: Tendency,
}

impl fmt::Display for ScheduleWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let target = match self.required {
            Tendency::ToZero => "→0",
            Tendency::ToInfinity => "→∞",
        };
        write!(f, "{} not {}", self.product.label(), target)
    }
}

fn requirements(regime: Regime) -> Vec<(ScheduleProduct, Tendency)> {
    use ScheduleProduct::*;
    use Tendency::*;
    let mut out = vec![
        (Delta, ToZero),
        (Bandwidth, ToZero),
        (NDelta, ToInfinity),
        (HolderRatio, ToZero),
    ];
    if regime == Regime::DiscreteNormality {
        out.extend([(NhDelta, ToInfinity), (Nh3Delta, ToZero), (NDeltaSquaredOverH, ToZero)]);
    }
    out
}

/// Checks the direction of each asymptotic product along the power-law family
/// through `s`.
///
/// The family is recovered from the design point as `Δ = n^(-a)`, `h = n^(-b)`
/// with `a = -ln Δ / ln n`, `b = -ln h / ln n`, then every product is compared
/// at `n` and `4n`. A product that does not strictly move the required way
/// produces a warning. Diagnostic only.
pub fn validate_schedule(s: &Schedule, regime: Regime) -> Vec<ScheduleWarning> {
    let n = s.n as f64;
    let log_n = n.ln();
    let delta_exp = -s.delta.ln() / log_n;
    let h_exp = -s.h.ln() / log_n;
    let at = |m: f64| (m.powf(-delta_exp), m.powf(-h_exp));
    let (d1, h1) = at(n);
    let (d4, h4) = at(4.0 * n);

    requirements(regime)
        .into_iter()
        .filter_map(|(product, required)| {
            let v1 = product.value(n, d1, h1, s.epsilon);
            let v4 = product.value(4.0 * n, d4, h4, s.epsilon);
            let ratio = v4 / v1;
            let ok = match required {
                Tendency::ToInfinity => ratio > 1.0 + 1e-9,
                Tendency::ToZero => ratio < 1.0 - 1e-9,
            };
            (!ok).then_some(ScheduleWarning { product, required })
        })
        .collect()
}

/// `points` equally spaced nodes including both ends.
pub fn uniform_nodes(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            (0..points).map(|i| lo + step * i as f64).collect()
        }
    }
}

/// Cell midpoints `lo + (i - 1/2)(hi - lo)/count`, `i = 1..=count`.
pub fn midpoint_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let width = (hi - lo) / count as f64;
    (0..count).map(|i| lo + (i as f64 + 0.5) * width).collect()
}
