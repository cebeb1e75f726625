use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qspace_lab::{RunReport, OUTPUT_ROOT_ENV};

fn qspace(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qspace"))
        .args(args)
        .env(OUTPUT_ROOT_ENV, root)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: serde_json::Value) -> String {
    let path = dir.join(name);
    fs::write(&path, body.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

fn typicality_config() -> serde_json::Value {
    serde_json::json!({
        "schema_version": 1,
        "experiment": "typicality-histograms",
        "seed": 1,
        "grid": { "points": 128 },
        "state": { "kind": "sin-squared" },
        "walkers": 2000,
        "time": { "total": 0.0 },
        "params": { "intervals": [[0.0, 1.0]] }
    })
}

#[test]
fn validate_reports_field_findings_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = typicality_config();
    cfg.as_object_mut().unwrap().remove("seed");
    cfg["time"]["dt"] = serde_json::json!(-1.0);
    let path = write_config(dir.path(), "bad.json", cfg);
    let out = qspace(&["validate", &path], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("seed required"), "{err}");

    let out = qspace(&["validate", "does-not-exist.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_report_under_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "typ.json", typicality_config());
    let out = qspace(&["validate", &path], dir.path());
    assert_eq!(out.status.code(), Some(0));

    let out = qspace(&["run", &path], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let run_dir = dir.path().join("typicality-histograms");
    let report = RunReport::read(&run_dir).unwrap();
    assert!(report.passed);
    assert_eq!(
        report.metrics["typicality_full"].map(|v| (v - 1.0).abs() < 1e-12),
        Some(true)
    );
    for a in &report.artifacts {
        assert!(run_dir.join(a).is_file(), "{a}");
    }
    assert_eq!(report.config["seed"], 1);

    let out = qspace(&["report", run_dir.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("typicality_equals_q_volume"));
}

#[test]
fn criterion_failure_exits_one_and_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    // A tolerance no integrator can meet.
    let cfg = serde_json::json!({
        "schema_version": 1,
        "experiment": "zero-noise-bohm",
        "seed": 1,
        "output_dir": "strict",
        "grid": { "points": 64 },
        "state": { "kind": "superposition", "modes": [{ "mode": 1, "re": 1.0 }, { "mode": 2, "re": 1.0 }] },
        "kernel": { "kind": "zero" },
        "time": { "total": 0.05, "dt": 1e-3 },
        "params": { "starts": [0.3], "tolerance": 1e-30 }
    });
    let path = write_config(dir.path(), "strict.json", cfg);
    let out = qspace(&["run", &path], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let report = RunReport::read(&dir.path().join("strict")).unwrap();
    assert!(!report.passed);
    assert!(report.metrics.contains_key("max_traj_deviation"));
    let out = qspace(&["report", dir.path().join("strict").to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_error_is_recorded_in_report() {
    let dir = tempfile::tempdir().unwrap();
    // Starting exactly on a node of a real standing wave is refused by the guidance field.
    let cfg = serde_json::json!({
        "schema_version": 1,
        "experiment": "zero-noise-bohm",
        "seed": 1,
        "grid": { "points": 64 },
        "state": { "kind": "standing-wave", "mode": 1 },
        "time": { "total": 0.01, "dt": 1e-3 },
        "params": { "starts": [0.25] }
    });
    let path = write_config(dir.path(), "node.json", cfg);
    let out = qspace(&["run", &path], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let report = RunReport::read(&dir.path().join("zero-noise-bohm")).unwrap();
    assert!(report.error.is_some());
    assert!(!report.passed);
}

#[test]
fn report_on_missing_run_dir_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = qspace(&["report", dir.path().join("nothing").to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
