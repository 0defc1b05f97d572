//! One replication's fitted curve against the true drift.

use reflected_nw::experiment::{curve, ExperimentPlan};

fn main() -> reflected_nw::error::Result<()> {
    let mut plan = ExperimentPlan::for_case(1)?;
    plan.grid_count = 15;
    for row in curve(&plan, 1600, 0.3, 42)? {
        let est = row.estimate.map_or("undefined".into(), |v| format!("{v:+.4}"));
        println!("x={:.2} truth={:+.4} estimate={est}", row.x, row.truth);
    }
    Ok(())
}
