//! Nadaraya-Watson drift estimators for reflected paths.
//!
//! Both estimators weight the regulator-corrected increments
//! `δX - δL + δR` by `K_h(X - x)`:
//!
//! ```text
//! b̂(x) = Σ_k K_h(X_k - x)(δX_k - δL_k + δR_k) / (Δ Σ_k K_h(X_k - x))
//! ```
//!
//! The discrete-type estimator runs over the observation grid; the
//! continuous-type estimator is the left-endpoint Riemann-Stieltjes sum of the
//! same ratio on a fine grid. One-sided paths drop the `δR` term.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::model::{BarrierMode, SamplePath};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EstimatorType {
    Discrete,
    Continuous,
}

impl EstimatorType {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorType::Discrete => "discrete",
            EstimatorType::Continuous => "continuous",
        }
    }
}

impl fmt::Display for EstimatorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discrete" => Ok(EstimatorType::Discrete),
            "continuous" => Ok(EstimatorType::Continuous),
            other => Err(Error::invalid(format!("unknown estimator type '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateMeta {
    /// Number of increments used.
    pub n: usize,
    pub delta: f64,
    pub h: f64,
    pub kernel: String,
    pub estimator: EstimatorType,
}

/// Per-grid-point estimates. `values[i]` is NaN exactly where
/// `undefined_mask[i]` is set.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateResult {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub denominators: Vec<f64>,
    pub undefined_mask: Vec<bool>,
    /// Grid points within one bandwidth of a barrier.
    pub boundary_mask: Vec<bool>,
    pub meta: EstimateMeta,
}

impl EstimateResult {
    pub fn value(&self, i: usize) -> Option<f64> {
        (!self.undefined_mask[i]).then_some(self.values[i])
    }

    pub fn defined_count(&self) -> usize {
        self.undefined_mask.iter().filter(|u| !**u).count()
    }

    pub fn excluded_count(&self) -> usize {
        self.grid.len() - self.defined_count()
    }

    /// `(x, b̂(x))` over the defined points.
    pub fn defined(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.grid.len()).filter_map(move |i| self.value(i).map(|v| (self.grid[i], v)))
    }
}

/// A state and the increment attributed to it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub x: f64,
    /// `δX - δL + δR` over the following step.
    pub response: f64,
}

/// Regulator-corrected observations of a path.
pub fn observations(path: &SamplePath) -> Vec<Observation> {
    let two_sided = path.barrier.mode() == BarrierMode::TwoSided;
    path.increments()
        .map(|inc| Observation {
            x: inc.x,
            response: if two_sided { inc.dx - inc.dl + inc.dr } else { inc.dx - inc.dl },
        })
        .collect()
}

/// Numerator and kernel mass `(Σ K_h r, Σ K_h)` at `x`.
pub fn kernel_sums(obs: &[Observation], kernel: &KernelSpec, x: f64) -> (f64, f64) {
    let h = kernel.bandwidth();
    let (mut num, mut mass) = (0.0, 0.0);
    for o in obs {
        let t = (o.x - x) / h;
        if t.abs() <= 1.0 {
            let w = kernel.k_eval(t) / h;
            num += w * o.response;
            mass += w;
        }
    }
    (num, mass)
}

fn estimate(path: &SamplePath, kernel: &KernelSpec, grid: &[f64], estimator: EstimatorType) -> Result<EstimateResult> {
    if path.len() < 2 {
        return Err(Error::invalid(format!("estimation needs at least 2 path points, got {}", path.len())));
    }
    if let Some(x) = grid.iter().find(|x| !path.barrier.contains(**x)) {
        return Err(Error::invalid(format!("grid point {x} lies outside the barrier domain")));
    }
    let obs = observations(path);
    let h = kernel.bandwidth();
    let mut out = EstimateResult {
        grid: grid.to_vec(),
        values: Vec::with_capacity(grid.len()),
        denominators: Vec::with_capacity(grid.len()),
        undefined_mask: Vec::with_capacity(grid.len()),
        boundary_mask: Vec::with_capacity(grid.len()),
        meta: EstimateMeta {
            n: obs.len(),
            delta: path.delta,
            h,
            kernel: kernel.name().to_string(),
            estimator,
        },
    };
    for &x in grid {
        let (num, mass) = kernel_sums(&obs, kernel, x);
        let den = path.delta * mass;
        let undefined = den.is_nan() || den <= 0.0;
        out.values.push(if undefined { f64::NAN } else { num / den });
        out.denominators.push(den);
        out.undefined_mask.push(undefined);
        out.boundary_mask.push(path.barrier.distance_to_boundary(x) < h);
    }
    Ok(out)
}

/// Discrete-type estimator from the observations `(X, L, R)` at `t_k = kΔ`.
pub fn nw_discrete(path: &SamplePath, kernel: &KernelSpec, grid: &[f64]) -> Result<EstimateResult> {
    estimate(path, kernel, grid, EstimatorType::Discrete)
}

/// Continuous-type estimator approximated on a fine path from
/// [`crate::simulate::simulate_fine`]; the time integral uses the fine step.
pub fn nw_continuous(fine_path: &SamplePath, kernel: &KernelSpec, grid: &[f64]) -> Result<EstimateResult> {
    estimate(fine_path, kernel, grid, EstimatorType::Continuous)
}

pub fn nw(path: &SamplePath, kernel: &KernelSpec, grid: &[f64], estimator: EstimatorType) -> Result<EstimateResult> {
    estimate(path, kernel, grid, estimator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{midpoint_grid, BarrierConfig, DriftSpec};
    use crate::simulate::{simulate_path, SimConfig};

    fn hand_path(x: Vec<f64>, l: Vec<f64>, r: Vec<f64>, delta: f64) -> SamplePath {
        SamplePath {
            delta,
            sigma: None,
            times: (0..x.len()).map(|k| k as f64 * delta).collect(),
            x,
            l_reg: l,
            r_reg: r,
            seed: None,
            stream: 0,
            barrier: BarrierConfig::two_sided(0.0, 3.0).unwrap(),
        }
    }

    #[test]
    fn single_term_cancels_kernel_height() {
        // only X_0 = 1.0 falls in the window around 1.05
        let p = hand_path(vec![1.0, 2.0, 2.5], vec![0.0, 0.1, 0.1], vec![0.0, 0.0, 0.3], 0.5);
        let k = KernelSpec::epanechnikov(0.2).unwrap();
        let est = nw_discrete(&p, &k, &[1.05]).unwrap();
        assert!((est.values[0] - (1.0 - 0.1) / 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_window_is_undefined() {
        let p = hand_path(vec![1.0, 1.1, 1.2], vec![0.0; 3], vec![0.0; 3], 0.1);
        let k = KernelSpec::epanechnikov(0.1).unwrap();
        let est = nw_discrete(&p, &k, &[2.5, 1.05]).unwrap();
        assert!(est.undefined_mask[0]);
        assert!(est.values[0].is_nan());
        assert_eq!(est.denominators[0], 0.0);
        assert_eq!(est.value(0), None);
        assert!(!est.undefined_mask[1]);
        assert_eq!(est.excluded_count(), 1);
    }

    #[test]
    fn too_short_path_is_rejected() {
        let p = hand_path(vec![1.0], vec![0.0], vec![0.0], 0.1);
        let k = KernelSpec::epanechnikov(0.1).unwrap();
        assert!(matches!(nw_discrete(&p, &k, &[1.0]), Err(Error::InvalidArgument(_))));
        let p2 = hand_path(vec![1.0, 1.1], vec![0.0; 2], vec![0.0; 2], 0.1);
        assert!(nw_discrete(&p2, &k, &[3.5]).is_err());
    }

    #[test]
    fn deterministic_unit_drift_is_recovered() {
        let cfg = SimConfig::new(DriftSpec::constant(1.0), 0.0, BarrierConfig::two_sided(0.0, 3.0).unwrap(), 200, 0.01)
            .with_x0(0.2);
        let p = simulate_path(&cfg).unwrap();
        assert_eq!(p.r_reg.last(), Some(&0.0));
        let k = KernelSpec::epanechnikov(0.1).unwrap();
        let grid = midpoint_grid(0.0, 3.0, 60);
        for est in [nw_discrete(&p, &k, &grid).unwrap(), nw_continuous(&p, &k, &grid).unwrap()] {
            for (_, v) in est.defined() {
                assert!((v - 1.0).abs() < 1e-12);
            }
            assert!(est.defined_count() > 0);
        }
    }

    #[test]
    fn regulator_is_removed_at_barrier() {
        // deterministic climb into u = 3: δX shrinks but δX + δR stays bΔ
        let cfg = SimConfig::new(DriftSpec::constant(1.0), 0.0, BarrierConfig::two_sided(0.0, 3.0).unwrap(), 100, 0.05)
            .with_x0(2.0);
        let p = simulate_path(&cfg).unwrap();
        let k = KernelSpec::epanechnikov(0.3).unwrap();
        let est = nw_discrete(&p, &k, &[2.9, 2.99]).unwrap();
        for v in est.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_sided_ignores_upper_channel() {
        let mut p = hand_path(vec![1.0, 1.2, 1.3], vec![0.0; 3], vec![0.0, 0.5, 0.5], 0.1);
        p.barrier = BarrierConfig::one_sided(0.0).unwrap();
        let k = KernelSpec::epanechnikov(0.5).unwrap();
        let est = nw_discrete(&p, &k, &[1.1]).unwrap();
        let w0 = k.scaled(1.0 - 1.1);
        let w1 = k.scaled(1.2 - 1.1);
        let want = (w0 * 0.2 + w1 * 0.1) / (0.1 * (w0 + w1));
        assert!((est.values[0] - want).abs() < 1e-12);
    }

    #[test]
    fn boundary_flags() {
        let p = hand_path(vec![1.0, 1.1], vec![0.0; 2], vec![0.0; 2], 0.1);
        let k = KernelSpec::epanechnikov(0.2).unwrap();
        let est = nw_discrete(&p, &k, &[0.1, 1.5, 2.9]).unwrap();
        assert_eq!(est.boundary_mask, vec![true, false, true]);
    }

    #[test]
    fn type_names_round_trip() {
        for t in [EstimatorType::Discrete, EstimatorType::Continuous] {
            assert_eq!(t.as_str().parse::<EstimatorType>().unwrap(), t);
        }
    }
}
