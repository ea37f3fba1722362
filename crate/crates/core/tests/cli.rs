//! End-to-end runs of the `natex` binary.

use std::path::Path;
use std::process::{Command, Output};

fn natex(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_natex"))
        .args(args)
        .current_dir(dir)
        .env_remove("NATEX_SEED")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) {
    let text = format!(
        "[dataset]\nn = 1500\nd = 4\n\n[learner]\nkind = \"ridge\"\n\n[benchmark]\nruns = 3\nsubsample = 600\ntiming = false\n{extra}"
    );
    std::fs::write(dir.join("c.toml"), text).unwrap();
}

#[test]
fn generate_then_attributes() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    let out = natex(&["generate", "--config", "c.toml", "--out", "d.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = natex(&["attributes", "--data", "d.csv"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "Size,Variables,Treated %,BCE,Corr(y1 p),Corr(y0 p)");
    assert!(lines[1].starts_with("1500,4,"));
}

#[test]
fn benchmark_csv_is_reproducible_and_seed_env_applies() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "estimators = [\"direct-difference\", \"double-double\"]\n");
    let args = ["benchmark", "--config", "c.toml", "--format", "csv"];
    let a = natex(&args, dir.path());
    let b = natex(&args, dir.path());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(String::from_utf8_lossy(&a.stderr).contains("master seed 0"));

    let seeded = Command::new(env!("CARGO_BIN_EXE_natex"))
        .args(args)
        .current_dir(dir.path())
        .env("NATEX_SEED", "9")
        .output()
        .unwrap();
    assert!(seeded.status.success());
    assert!(String::from_utf8_lossy(&seeded.stderr).contains("master seed 9"));
    assert_ne!(seeded.stdout, a.stdout);
}

#[test]
fn benchmark_writes_table_and_log_files() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "estimators = [\"horvitz-thompson\"]\n");
    let out = natex(
        &["benchmark", "--config", "c.toml", "--out", "t.md", "--log", "log.csv"],
        dir.path(),
    );
    assert!(out.status.success());
    let table = std::fs::read_to_string(dir.path().join("t.md")).unwrap();
    assert!(table.starts_with("| Method | Mean | 1st Quartile | 2nd Quartile | 3rd Quartile | Time (s) |"));
    let log = natex::bench::parse_run_log(&std::fs::read_to_string(dir.path().join("log.csv")).unwrap()).unwrap();
    assert_eq!(log.len(), 3);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[benchmark]\nruns = 0\n").unwrap();
    assert_eq!(natex(&["benchmark", "--config", "c.toml"], dir.path()).status.code(), Some(2));
    std::fs::write(dir.path().join("c.toml"), "[benchmark]\nestimators = [\"nope\"]\n").unwrap();
    assert_eq!(natex(&["benchmark", "--config", "c.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(natex(&["attributes", "--data", "missing.csv"], dir.path()).status.code(), Some(2));
}

#[test]
fn failure_threshold_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "estimators = [\"regression-discontinuity\"]\nrd_window = 1e-9\n",
    );
    let out = natex(&["benchmark", "--config", "c.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("regression-discontinuity"));
}

#[test]
fn sweep_writes_long_format_csv() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    let out = natex(
        &["sweep", "--axis", "entropy", "--config", "c.toml", "--levels", "0,2", "--out", "s.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let sweep = natex::bench::parse_sweep_csv(&text, "entropy").unwrap();
    assert_eq!(sweep.series.len(), natex::bench::ENTROPY_SWEEP_ESTIMATORS.len());
    assert_eq!(text.lines().count(), 1 + 2 * sweep.series.len());
}

#[test]
fn verify_variance_matches_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let out = natex(&["verify-variance", "--n", "8", "--scheme", "single", "--seed", "3"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').take(5).map(|v| v.parse().unwrap()).collect();
    assert!((row[2] - row[4]).abs() < 1e-9);
    assert!(row[3].abs() < 1e-10);
}

#[test]
fn calibration_curve_from_observed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let full = natex::dataset::generate(&natex::dataset::GenerationConfig {
        n: 800,
        d: 3,
        seed: 4,
        ..Default::default()
    })
    .unwrap();
    let z = natex::dataset::sample_treatment(full.propensity(), 5);
    let obs = natex::dataset::observe(&full, &z).unwrap();
    let mut file = std::fs::File::create(dir.path().join("obs.csv")).unwrap();
    natex::dataset::write_observed_csv(&obs, &mut file).unwrap();
    let out = natex(
        &["calibration", "--data", "obs.csv", "--bins", "4", "--learner", "ridge"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("mean_predicted_p,mean_treated_rate,count"));
    let total: usize = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 800);
}
