//! Small Monte Carlo table of root average squared errors.

use reflected_nw::experiment::{run_table, ExperimentPlan};

fn main() {
    let mut plan = ExperimentPlan::for_case(3).unwrap();
    plan.n_replications = 20;
    plan.n_list = vec![400, 900];
    plan.beta_list = vec![0.3, 0.2];
    plan.base_seed = 42;
    println!("{:>11} {:>5} {:>5} {:>8} {:>8}", "mode", "n", "beta", "rase", "se");
    for cell in run_table(&plan) {
        match cell {
            Ok(c) => println!("{:>11} {:>5} {:>5} {:>8.4} {:>8.4}", c.mode, c.n, c.beta, c.rase_mean, c.rase_se()),
            Err(f) => println!("{:>11} {:>5} {:>5} failed: {}", f.mode, f.n, f.beta, f.error),
        }
    }
}
