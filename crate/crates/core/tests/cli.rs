use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reflected-nw"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = run(dir, args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

#[test]
fn simulate_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--case", "2", "--n", "100", "--delta", "0.01", "--seed", "7", "--out", "p.csv"];
    run_ok(dir.path(), &args);
    let first = fs::read(dir.path().join("p.csv")).unwrap();
    run_ok(dir.path(), &args);
    assert_eq!(first, fs::read(dir.path().join("p.csv")).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("# seed=7 "));
    assert_eq!(text.lines().nth(1), Some("t,x,l_reg,r_reg"));
    assert_eq!(text.lines().count(), 103);
}

#[test]
fn summary_goes_to_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["simulate", "--n", "10", "--seed", "3"]);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("cells=1"));
    assert!(stderr.contains("seed=3"));
    assert!(stderr.contains("wall="));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("# seed=3"));
}

#[test]
fn density_schema() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(dir.path(), &["density", "--case", "1", "--grid", "300", "--out", "d.csv"]);
    let text = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# seed="));
    assert_eq!(lines.next(), Some("x,pi,f,sigma_asym"));
    assert_eq!(lines.count(), 300);
}

#[test]
fn estimate_reads_a_simulated_path() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(dir.path(), &["simulate", "--case", "3", "--n", "2000", "--delta", "0.01", "--seed", "1", "--out", "p.csv"]);
    for ty in ["discrete", "continuous"] {
        let out = run_ok(
            dir.path(),
            &["estimate", "--input", "p.csv", "--h", "0.2", "--grid-count", "30", "--type", ty],
        );
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().nth(1), Some("x,estimate,denominator,undefined,boundary"));
        assert_eq!(text.lines().count(), 32);
        // undefined rows have an empty estimate field
        for line in text.lines().skip(2) {
            let fields = line.split(',').collect::<Vec<_>>();
            assert_eq!(fields[1].is_empty(), fields[3] == "1");
        }
    }
}

#[test]
fn experiment_output_does_not_depend_on_threads() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["experiment", "--case", "1", "--reps", "12", "--seed", "42", "--n-list", "400,900", "--beta-list", "0.3,0.2"];
    let mut outputs = Vec::new();
    for threads in ["1", "2", "7"] {
        let mut args = base.to_vec();
        args.extend(["--threads", threads]);
        outputs.push(run_ok(dir.path(), &args));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert!(text.starts_with("# seed=42 "));
    assert_eq!(
        text.lines().nth(1),
        Some("case,mode,n,beta,h,delta,rase_mean,rase_std,rase_median,excluded_mean,n_reps,rase_se")
    );
    assert_eq!(text.lines().count(), 2 + 8);
}

#[test]
fn curve_output() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "experiment", "--curve", "--case", "1", "--mode", "two-sided", "--n-list", "1600", "--beta-list", "0.3", "--seed", "5",
    ];
    let a = run_ok(dir.path(), &args);
    assert_eq!(a, run_ok(dir.path(), &args));
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().nth(1), Some("x,estimate,truth"));
    assert_eq!(text.lines().count(), 302);
    assert!(text.lines().skip(2).any(|l| l.split(',').nth(1) == Some("")));
}

#[test]
fn normality_dispatch_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["normality", "--case", "2", "--x0", "1.5", "--n", "1600", "--beta", "0.3", "--reps", "60"];
    let mut one = args.to_vec();
    one.extend(["--threads", "1"]);
    let mut four = args.to_vec();
    four.extend(["--threads", "4"]);
    let a = run_ok(dir.path(), &one);
    assert_eq!(a, run_ok(dir.path(), &four));
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().nth(1), Some("case,x0,n,beta,mean_z,var_z,ks_stat,dropped"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn config_file_with_override() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("plan.cfg"), "# small run\nreps = 3\nseed = 4\nn_list = 400\nbeta_list = 0.3\n").unwrap();
    let via_config = run_ok(dir.path(), &["--config", "plan.cfg", "experiment", "--reps", "5"]);
    let direct = run_ok(dir.path(), &["experiment", "--reps", "5", "--seed", "4", "--n-list", "400", "--beta-list", "0.3"]);
    assert_eq!(via_config, direct);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["experiment", "--case", "4"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["simulate", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["estimate", "--h", "0.1"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["simulate", "--x0", "5", "--n", "10"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["simulate", "--help"]).status.code(), Some(0));
    let missing = run(dir.path(), &["estimate", "--input", "missing.csv", "--h", "0.1"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn failed_runs_leave_no_output() {
    let dir = tempfile::tempdir().unwrap();
    // builtin drifts are not ergodic with a single barrier
    let out = run(dir.path(), &["density", "--case", "1", "--mode", "one-sided", "--out", "d.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("d.csv").exists());
    let out = run(dir.path(), &["simulate", "--n", "10", "--out", "no/such/dir/p.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("no").exists());
}

#[test]
fn every_subcommand_documents_its_flags() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["simulate", "density", "estimate", "experiment", "normality"] {
        let help = String::from_utf8(run_ok(dir.path(), &[sub, "--help"])).unwrap();
        assert!(help.contains("--threads") && help.contains("--config") && help.contains("--out"), "{sub}");
    }
}
