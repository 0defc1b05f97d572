//! Tabulate the invariant density of a case and check its total mass.

use reflected_nw::density::InvariantDensity;
use reflected_nw::kernel::KernelSpec;
use reflected_nw::model::{builtin_drift, uniform_nodes, BarrierConfig, DriftSpec};

fn main() -> reflected_nw::error::Result<()> {
    let barrier = BarrierConfig::two_sided(0.0, 3.0)?;
    let kernel = KernelSpec::epanechnikov(0.11)?;

    let pull = InvariantDensity::new(DriftSpec::new("1.5 - x", |x| 1.5 - x), 0.2, barrier)?;
    println!("{:>6} {:>12} {:>12}", "x", "pi", "f");
    for x in uniform_nodes(0.0, 3.0, 13) {
        println!("{x:>6.3} {:>12.5e} {:>12.5e}", pull.pi_eval(x), pull.f_eval(&kernel, x));
    }

    for case in 1..=3 {
        let d = InvariantDensity::new(builtin_drift(case)?, 0.2, barrier)?;
        let edges = uniform_nodes(0.0, 3.0, 301);
        let mass: f64 = d.bin_probabilities(&edges).iter().sum();
        println!("case {case}: mass {mass:.12}, mean {:.6}", d.expectation(|x| x));
    }
    Ok(())
}
