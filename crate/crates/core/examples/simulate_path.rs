//! Simulate a two-sided and a one-sided path and print regulator totals.
//! The builtin drifts push upward without bound, so the one-sided run uses a
//! mean-reverting drift that keeps the lower regulator busy.

use reflected_nw::model::{builtin_drift, BarrierConfig, DriftSpec};
use reflected_nw::simulate::{simulate_path, SimConfig};

fn main() -> reflected_nw::error::Result<()> {
    let runs = [
        (builtin_drift(2)?, BarrierConfig::two_sided(0.0, 3.0)?),
        (DriftSpec::new("0.1 - x", |x| 0.1 - x), BarrierConfig::one_sided(0.0)?),
    ];
    for (drift, barrier) in runs {
        let cfg = SimConfig::new(drift, 0.2, barrier, 10_000, 0.01).with_seed(42);
        let path = simulate_path(&cfg)?;
        let (min, max) = path.x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        println!(
            "{}: T={:.1} range=[{min:.4}, {max:.4}] L_T={:.4} R_T={:.4}",
            barrier.mode(),
            path.horizon(),
            path.l_reg.last().unwrap(),
            path.r_reg.last().unwrap()
        );
    }
    Ok(())
}
