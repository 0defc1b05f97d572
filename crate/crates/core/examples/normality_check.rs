//! Standardized pointwise errors for a mean-reverting drift.

use reflected_nw::experiment::{normality_check, NormalityPlan};
use reflected_nw::kernel::KernelSpec;
use reflected_nw::model::DriftSpec;

fn main() -> reflected_nw::error::Result<()> {
    let mut plan = NormalityPlan::for_case(2, 1.5, 1600, 0.3, 200, 42)?;
    plan.case_id = 0;
    plan.drift = DriftSpec::new("1.5 - x", |x| 1.5 - x);
    let report = normality_check(&plan)?;
    let roughness = KernelSpec::epanechnikov(1.0)?.roughness();
    println!(
        "Sigma={:.4} mean z={:.4} var z={:.4} (kernel roughness {roughness:.2}) KS={:.4} dropped={}",
        report.sigma_asym, report.mean_z, report.var_z, report.ks_stat, report.dropped
    );
    for w in &report.schedule_warnings {
        println!("warning: {w}");
    }
    Ok(())
}
