use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nild_core::scenario::synth;

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn nild(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nild")).args(args).output().unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_string_lossy().into_owned()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn run_writes_three_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = nild(&["run", "--scenario", &scenario("four_dc.json"), "--solver", "nild", "--days", "1", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "epochs.csv", "summary.txt"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let (header, rows) = csv_rows(&dir.path().join("epochs.csv"));
    assert_eq!(header, nild_core::simulator::EPOCH_COLUMNS);
    assert_eq!(rows.len(), 24 * 4);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["solver"], "nild");
    assert_eq!(report["epochs"].as_array().unwrap().len(), 24);
}

#[test]
fn missing_scenario_is_input_error() {
    let o = nild(&["run", "--scenario", "/nonexistent/x.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scenario not found"));
}

#[test]
fn oracle_on_large_scenario_hits_size_cap() {
    let dir = tempfile::tempdir().unwrap();
    let o = nild(&["run", "--scenario", &scenario("four_dc.json"), "--solver", "oracle", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("size cap"));
    let o = nild(&["oracle", "--scenario", &scenario("four_dc.json"), "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unknown_solver_is_usage_error() {
    let o = nild(&["run", "--scenario", &scenario("tiny.json"), "--solver", "fdld"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_rows_and_repeated_solver() {
    let dir = tempfile::tempdir().unwrap();
    let o = nild(&[
        "compare",
        "--scenario",
        &scenario("four_dc.json"),
        "--solvers",
        "nild,uniform,greedy_cf,uniform",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&dir.path().join("compare.csv"));
    assert_eq!(header, nild_cli::COMPARE_COLUMNS);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1], rows[3]);
    let totals: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(totals.iter().all(|&t| totals[0] <= t));
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("nild best: yes"));
}

#[test]
fn compare_nsld_matches_nild_without_extras() {
    let dir = tempfile::tempdir().unwrap();
    let o = nild(&[
        "compare",
        "--scenario",
        &scenario("no_extras.json"),
        "--solvers",
        "nild,nsld_simplified",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let (_, rows) = csv_rows(&dir.path().join("compare.csv"));
    assert_eq!(rows[0][1..], rows[1][1..]);
}

#[test]
fn compare_needs_two_solvers() {
    let o = nild(&["compare", "--scenario", &scenario("tiny.json"), "--solvers", "nild"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_data_size_raises_cost() {
    let dir = tempfile::tempdir().unwrap();
    let o = nild(&[
        "sweep",
        "--scenario",
        &scenario("tiny.json"),
        "--param",
        "data-size-multiplier",
        "--values",
        "1,2,4",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(header, nild_cli::SWEEP_COLUMNS);
    let totals: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(totals[0] < totals[1] && totals[1] < totals[2], "{totals:?}");
}

#[test]
fn sweep_reports_spread_over_noisy_repetitions() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = synth::tiny();
    s.workload.noise_stddev_fraction = 0.2;
    let path = dir.path().join("noisy.json");
    fs::write(&path, s.to_json()).unwrap();
    let out = dir.path().join("out");
    let o = nild(&[
        "sweep",
        "--scenario",
        &path.to_string_lossy(),
        "--param",
        "beta",
        "--values",
        "0.1",
        "--reps",
        "10",
        "--seed-base",
        "100",
        "--out",
        &out_arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = csv_rows(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 10);
    let totals: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    let (_, sd) = nild_cli::mean_std(&totals);
    assert!(sd > 0.0);
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("stddev"));
}

#[test]
fn sweep_names_the_failing_value() {
    let o = nild(&["sweep", "--scenario", &scenario("tiny.json"), "--param", "beta", "--values", "0.1,-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("beta = -1"));
}

#[test]
fn validate_outcomes() {
    let o = nild(&["validate", "--scenario", &scenario("eight_dc.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS feasibility"));

    let dir = tempfile::tempdir().unwrap();
    let mut s = synth::tiny();
    s.data_centers[0].net_metering_factor = 1.3;
    let bad = dir.path().join("bad.json");
    fs::write(&bad, s.to_json()).unwrap();
    let o = nild(&["validate", "--scenario", &bad.to_string_lossy()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("net_metering_factor ∈ [0,1]"));

    let o = nild(&["validate", "--scenario", &scenario("infeasible_epoch13.json")]);
    assert_eq!(o.status.code(), Some(3));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("`lda` at epoch 13"), "{stdout}");
}

#[test]
fn oracle_command_on_tiny() {
    let dir = tempfile::tempdir().unwrap();
    let o = nild(&["oracle", "--scenario", &scenario("tiny.json"), "--grid-steps", "50", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&dir.path().join("oracle.csv"));
    assert_eq!(header, nild_cli::ORACLE_COLUMNS);
    assert_eq!(rows.len(), 24);
}

#[test]
fn repeated_invocations_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = nild(&["run", "--scenario", &scenario("tiny.json"), "--days", "2", "--seed", "5", "--out", &out_arg(d.path())]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["report.json", "epochs.csv", "summary.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}
