//! Write a path to CSV, read it back and refit the estimator.

use reflected_nw::estimate::nw_discrete;
use reflected_nw::io::{read_path_csv, write_path_csv};
use reflected_nw::kernel::KernelSpec;
use reflected_nw::model::{builtin_drift, midpoint_grid, BarrierConfig};
use reflected_nw::simulate::{simulate_path, SimConfig};

fn main() -> reflected_nw::error::Result<()> {
    let barrier = BarrierConfig::two_sided(0.0, 3.0)?;
    let path = simulate_path(&SimConfig::new(builtin_drift(3)?, 0.2, barrier, 500, 0.02).with_seed(5))?;
    let mut buf = Vec::new();
    write_path_csv(&mut buf, &path, &[])?;
    let text = String::from_utf8(buf).unwrap();
    for line in text.lines().take(4) {
        println!("{line}");
    }
    let back = read_path_csv(text.as_bytes(), None)?;
    println!("round trip exact: {}", back.x == path.x && back.l_reg == path.l_reg && back.r_reg == path.r_reg);

    let k = KernelSpec::epanechnikov(0.2)?;
    let grid = midpoint_grid(0.0, 3.0, 30);
    let (a, b) = (nw_discrete(&path, &k, &grid)?, nw_discrete(&back, &k, &grid)?);
    let same = a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits());
    println!("refit identical: {same}");
    Ok(())
}
