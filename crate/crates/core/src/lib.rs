//! Drift estimation for reflected diffusions.
//!
//! A diffusion `dX = b(X) dt + σ dW + dL − dR` lives on `[l, u]` (or
//! `[l, ∞)`), with `L` and `R` the regulators that keep it inside. The crate
//! simulates such paths exactly at the barriers by sampling the running
//! extremum of each Brownian step, evaluates the invariant density, and fits
//! Nadaraya–Watson drift estimators from discrete or finely refined
//! observations. Monte Carlo drivers report integrated squared error tables
//! and standardized-error normality checks; a CLI wraps all of it.
//!
//! ```
//! use reflected_nw::estimate::nw_discrete;
//! use reflected_nw::kernel::KernelSpec;
//! use reflected_nw::model::{builtin_drift, midpoint_grid, BarrierConfig};
//! use reflected_nw::simulate::{simulate_path, SimConfig};
//!
//! let barrier = BarrierConfig::two_sided(0.0, 3.0).unwrap();
//! let cfg = SimConfig::new(builtin_drift(3).unwrap(), 0.2, barrier, 2_000, 0.01).with_seed(1);
//! let path = simulate_path(&cfg).unwrap();
//! let fit = nw_discrete(&path, &KernelSpec::epanechnikov(0.2).unwrap(), &midpoint_grid(0.0, 3.0, 30)).unwrap();
//! assert_eq!(fit.grid.len(), 30);
//! ```

pub mod error;
pub mod model;
pub mod kernel;
pub mod quad;
pub mod simulate;
pub mod density;
pub mod estimate;
pub mod experiment;
pub mod io;
pub mod cli;
