//! Sample paths of reflected diffusions with explicit regulator increments.
//!
//! Each step is an Euler step of `dX = b(X)dt + σdW` followed by reflection.
//! The reflection amount at the lower barrier is `max(0, A - (X - l))`, where
//! `A` is the running supremum over the step of `-(b(X)s + σW_s)`; at the upper
//! barrier it is `max(0, B - (u - X))` with `B` the supremum of `b(X)s + σW_s`.
//! Both suprema are sampled conditionally on the Gaussian endpoint through the
//! inverse CDF of the Brownian-bridge maximum,
//!
//! ```text
//! M = (y + sqrt(y² - 2σ²Δ ln U)) / 2,   U ~ Uniform(0, 1]
//! ```
//!
//! The lower barrier is treated first; when it reflects, the upper barrier is
//! skipped for that step. With both barriers far apart relative to `σ√Δ` a
//! single step essentially never touches both.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{BarrierConfig, DriftSpec, SamplePath};

/// Post-step states may be projected onto the domain by at most this much.
pub const CLAMP_EPS: f64 = 1e-12;

/// Seeded generator for replication `stream` of `seed`.
///
/// Streams of one seed are independent ChaCha streams, so replications can be
/// generated in any order or in parallel with identical results.
pub fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Random inputs consumed by one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepNoise {
    /// Standard normal; the Brownian increment is `z √dt`.
    pub z: f64,
    /// Uniform on `(0, 1]` for the lower-barrier supremum.
    pub u_lower: f64,
    /// Uniform on `(0, 1]` for the upper-barrier supremum.
    pub u_upper: f64,
}

/// Source of per-step noise. Every step consumes exactly one draw regardless
/// of barrier mode, so one- and two-sided runs of a seed share their driver.
pub trait Driver {
    fn draw(&mut self) -> StepNoise;
}

impl<R: Rng> Driver for R {
    fn draw(&mut self) -> StepNoise {
        let z: f64 = self.sample(StandardNormal);
        // random::<f64>() is on [0, 1)
        let u_lower = 1.0 - self.random::<f64>();
        let u_upper = 1.0 - self.random::<f64>();
        StepNoise { z, u_lower, u_upper }
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub drift: DriftSpec,
    pub sigma: f64,
    pub barrier: BarrierConfig,
    pub n_steps: usize,
    pub delta: f64,
    pub x0: f64,
    pub seed: u64,
    pub stream: u64,
    pub burn_in: usize,
}

impl SimConfig {
    /// Configuration starting from the barrier's default state with seed 0.
    pub fn new(drift: DriftSpec, sigma: f64, barrier: BarrierConfig, n_steps: usize, delta: f64) -> Self {
        SimConfig {
            drift,
            sigma,
            x0: barrier.default_start(),
            barrier,
            n_steps,
            delta,
            seed: 0,
            stream: 0,
            burn_in: 0,
        }
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// `σ = 0` is accepted for deterministic runs.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid(format!("delta must be positive, got {}", self.delta)));
        }
        if !self.barrier.contains(self.x0) {
            return Err(Error::invalid(format!("x0 = {} lies outside the barrier domain", self.x0)));
        }
        Ok(())
    }
}

/// Samples the supremum over `[0, delta]` of `drift_rate·s + sigma·W_s`
/// given the endpoint `W_delta = w_increment`.
pub fn sample_sup_with_drift(drift_rate: f64, sigma: f64, delta: f64, w_increment: f64, uniform: f64) -> Result<f64> {
    if ![drift_rate, sigma, delta, w_increment, uniform].iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("supremum sampler needs finite inputs"));
    }
    if delta <= 0.0 || sigma < 0.0 || !(uniform > 0.0 && uniform <= 1.0) {
        return Err(Error::invalid(format!(
            "supremum sampler needs delta > 0, sigma >= 0, uniform in (0, 1]; got delta={delta}, sigma={sigma}, uniform={uniform}"
        )));
    }
    Ok(bridge_max(drift_rate * delta + sigma * w_increment, sigma * sigma * delta, uniform))
}

#[inline]
fn bridge_max(endpoint: f64, variance: f64, uniform: f64) -> f64 {
    0.5 * (endpoint + (endpoint * endpoint - 2.0 * variance * uniform.ln()).sqrt())
}

/// Result of one reflected step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: f64,
    pub dl: f64,
    pub dr: f64,
}

/// One reflected Euler step of size `cfg.delta` from `state`.
pub fn step<R: Rng>(state: f64, cfg: &SimConfig, rng: &mut R) -> Result<StepOutcome> {
    if !cfg.barrier.contains(state) {
        return Err(Error::invalid(format!("state {state} lies outside the barrier domain")));
    }
    let noise = rng.draw();
    advance(state, &cfg.drift, cfg.sigma, &cfg.barrier, cfg.delta, noise, 0)
}

/// Reflected step with explicit noise; `index` tags errors.
pub fn advance(
    state: f64,
    drift: &DriftSpec,
    sigma: f64,
    barrier: &BarrierConfig,
    dt: f64,
    noise: StepNoise,
    index: usize,
) -> Result<StepOutcome> {
    let w = noise.z * dt.sqrt();
    let displacement = drift.eval(state) * dt + sigma * w;
    let variance = sigma * sigma * dt;
    let l = barrier.lower();

    let a = bridge_max(-displacement, variance, noise.u_lower);
    let dl = (a - (state - l)).max(0.0);
    let dr = match barrier.upper() {
        Some(u) if dl == 0.0 => {
            let b = bridge_max(displacement, variance, noise.u_upper);
            (b - (u - state)).max(0.0)
        }
        _ => 0.0,
    };

    let mut next_state = state + displacement + dl - dr;
    if !next_state.is_finite() || !dl.is_finite() || !dr.is_finite() {
        return Err(Error::SimulationDiverged { step: index });
    }
    if next_state < l {
        let overshoot = l - next_state;
        if overshoot > CLAMP_EPS {
            return Err(Error::DomainOvershoot { step: index, overshoot });
        }
        next_state = l;
    }
    if let Some(u) = barrier.upper() {
        if next_state > u {
            let overshoot = next_state - u;
            if overshoot > CLAMP_EPS {
                return Err(Error::DomainOvershoot { step: index, overshoot });
            }
            next_state = u;
        }
    }
    Ok(StepOutcome { next_state, dl, dr })
}

/// Runs `burn_in + steps` steps of size `dt` from `cfg.x0` with noise from
/// `driver`, discarding the first `burn_in`. Times and regulators of the
/// returned path restart at zero after burn-in.
pub fn simulate_with_driver<D: Driver + ?Sized>(
    cfg: &SimConfig,
    dt: f64,
    steps: usize,
    burn_in: usize,
    driver: &mut D,
) -> Result<SamplePath> {
    cfg.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("step size must be positive, got {dt}")));
    }
    let mut state = cfg.x0;
    for k in 0..burn_in {
        state = advance(state, &cfg.drift, cfg.sigma, &cfg.barrier, dt, driver.draw(), k)?.next_state;
    }

    let mut x = Vec::with_capacity(steps + 1);
    let mut l_reg = Vec::with_capacity(steps + 1);
    let mut r_reg = Vec::with_capacity(steps + 1);
    x.push(state);
    l_reg.push(0.0);
    r_reg.push(0.0);
    let (mut cum_l, mut cum_r) = (0.0, 0.0);
    for k in 0..steps {
        let out = advance(state, &cfg.drift, cfg.sigma, &cfg.barrier, dt, driver.draw(), burn_in + k)?;
        state = out.next_state;
        cum_l += out.dl;
        cum_r += out.dr;
        x.push(state);
        l_reg.push(cum_l);
        r_reg.push(cum_r);
    }

    Ok(SamplePath {
        delta: dt,
        sigma: Some(cfg.sigma),
        times: (0..=steps).map(|k| k as f64 * dt).collect(),
        x,
        l_reg,
        r_reg,
        seed: Some(cfg.seed),
        stream: cfg.stream,
        barrier: cfg.barrier,
    })
}

/// Simulates `cfg.n_steps` steps of size `cfg.delta` on stream
/// `(cfg.seed, cfg.stream)`.
pub fn simulate_path(cfg: &SimConfig) -> Result<SamplePath> {
    let mut rng = replication_rng(cfg.seed, cfg.stream);
    simulate_with_driver(cfg, cfg.delta, cfg.n_steps, cfg.burn_in, &mut rng)
}

/// Simulates on the refined step `cfg.delta / refine` over the same horizon,
/// as a stand-in for a continuously observed path.
pub fn simulate_fine(cfg: &SimConfig, refine: usize) -> Result<SamplePath> {
    if refine == 0 {
        return Err(Error::invalid("refine must be >= 1"));
    }
    let mut rng = replication_rng(cfg.seed, cfg.stream);
    let steps = cfg
        .n_steps
        .checked_mul(refine)
        .ok_or_else(|| Error::invalid("n_steps * refine overflows"))?;
    simulate_with_driver(cfg, cfg.delta / refine as f64, steps, cfg.burn_in * refine, &mut rng)
}
