//! Fit discrete and continuous-record estimators to one path.

use reflected_nw::estimate::{nw_continuous, nw_discrete};
use reflected_nw::kernel::KernelSpec;
use reflected_nw::model::{midpoint_grid, BarrierConfig, DriftSpec};
use reflected_nw::simulate::{simulate_fine, simulate_path, SimConfig};

fn main() -> reflected_nw::error::Result<()> {
    let drift = DriftSpec::new("1.5 - x", |x| 1.5 - x);
    let barrier = BarrierConfig::two_sided(0.0, 3.0)?;
    let cfg = SimConfig::new(drift.clone(), 0.5, barrier, 20_000, 0.05).with_seed(7);
    let kernel = KernelSpec::epanechnikov(0.15)?;
    let grid = midpoint_grid(0.0, 3.0, 12);

    let discrete = nw_discrete(&simulate_path(&cfg)?, &kernel, &grid)?;
    let continuous = nw_continuous(&simulate_fine(&cfg, 10)?, &kernel, &grid)?;

    println!("{:>6} {:>9} {:>10} {:>10}", "x", "truth", "discrete", "continuous");
    let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
    for (i, &x) in grid.iter().enumerate() {
        println!(
            "{x:>6.3} {:>9.4} {:>10} {:>10}",
            drift.eval(x),
            show(discrete.value(i)),
            show(continuous.value(i))
        );
    }
    Ok(())
}
