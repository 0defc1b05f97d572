use reflected_nw::estimate::EstimatorType;
use reflected_nw::experiment::{
    cell_replications, ks_standard_normal, normality_check, run_cell, summary_stats, ExperimentPlan, NormalityPlan,
};
use reflected_nw::kernel::KernelSpec;
use reflected_nw::model::{BarrierMode, DriftSpec};

fn small_plan(case: u8, reps: usize) -> ExperimentPlan {
    let mut plan = ExperimentPlan::for_case(case).unwrap();
    plan.n_replications = reps;
    plan.base_seed = 17;
    plan
}

#[test]
fn statistics_ignore_replication_order() {
    let reps = cell_replications(&small_plan(1, 40), 400, 0.3).unwrap();
    let mut rases = reps.iter().map(|r| r.0).collect::<Vec<_>>();
    let forward = summary_stats(&rases);
    rases.reverse();
    rases.rotate_left(7);
    assert_eq!(forward, summary_stats(&rases));
}

#[test]
fn doubling_replications_stays_within_three_standard_errors() {
    for (case, mode) in [(3, BarrierMode::TwoSided), (1, BarrierMode::OneSidedLower)] {
        let mut plan = small_plan(case, 200);
        plan.barrier_mode = mode;
        let half = run_cell(&small_plan_with(&plan, 100), 400, 0.3).unwrap();
        let full = run_cell(&plan, 400, 0.3).unwrap();
        let bound = 3.0 * full.rase_std / (full.n_replications as f64).sqrt();
        assert!((full.rase_mean - half.rase_mean).abs() < bound, "case {case}: {} vs {}", full.rase_mean, half.rase_mean);
    }
}

fn small_plan_with(plan: &ExperimentPlan, reps: usize) -> ExperimentPlan {
    ExperimentPlan {
        n_replications: reps,
        ..plan.clone()
    }
}

#[test]
fn continuous_cells_with_unit_refinement_equal_discrete_cells() {
    for mode in BarrierMode::ALL {
        let mut plan = small_plan(2, 30);
        plan.barrier_mode = mode;
        let discrete = run_cell(&plan, 900, 0.2).unwrap();
        plan.estimator = EstimatorType::Continuous;
        plan.refine = 1;
        assert_eq!(run_cell(&plan, 900, 0.2).unwrap(), discrete);
    }
}

#[test]
fn cells_do_not_depend_on_the_thread_count() {
    let plan = small_plan(1, 24);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_cell(&plan, 400, 0.2).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

fn interior_plan(estimator: EstimatorType) -> NormalityPlan {
    let mut plan = NormalityPlan::for_case(2, 1.5, 1600, 0.3, 500, 42).unwrap();
    plan.case_id = 0;
    plan.drift = DriftSpec::new("1.5 - x", |x| 1.5 - x);
    plan.estimator = estimator;
    plan
}

/// For a model with interior invariant mass the standardized errors have
/// variance close to ∫K² rather than 1, and dividing by sqrt(∫K²) yields a
/// standard normal sample.
#[test]
fn standardized_errors_scale_with_kernel_roughness() {
    let roughness = KernelSpec::epanechnikov(1.0).unwrap().roughness();
    for estimator in [EstimatorType::Discrete, EstimatorType::Continuous] {
        let report = normality_check(&interior_plan(estimator)).unwrap();
        assert_eq!(report.dropped, 0);
        assert!(report.schedule_warnings.is_empty());
        let scaled = report.z.iter().map(|z| z / roughness.sqrt()).collect::<Vec<_>>();
        let (mean, std, _) = summary_stats(&scaled);
        let ks = ks_standard_normal(&scaled);
        println!(
            "{estimator}: var z {:.3}; rescaled mean {mean:.3}, var {:.3}, KS {ks:.3}",
            report.var_z,
            std * std
        );
        assert!((report.var_z - roughness).abs() < 0.15);
        assert!(mean.abs() < 0.15);
        assert!((0.75..=1.25).contains(&(std * std)));
        assert!(ks < 0.073);
    }
}

#[test]
fn normality_runs_are_reproducible() {
    let mut plan = interior_plan(EstimatorType::Discrete);
    plan.n_replications = 40;
    assert_eq!(normality_check(&plan).unwrap(), normality_check(&plan).unwrap());
}
