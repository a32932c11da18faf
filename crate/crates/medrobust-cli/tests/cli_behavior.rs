//! End-to-end command behavior: outputs, determinism, and the exit-code
//! contract, driven through the compiled binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .ancestors()
        .nth(2)
        .expect("workspace root")
        .to_path_buf()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_medrobust"))
}

fn run(args: &[String]) -> Output {
    bin().args(args).output().expect("spawn medrobust")
}

fn root_path(rel: &str) -> String {
    workspace_root().join(rel).to_string_lossy().into_owned()
}

fn analyze_args(out_dir: &Path) -> Vec<String> {
    vec![
        "analyze".into(),
        "--csv".into(),
        root_path("data/example_s3_n500.csv"),
        "--x-cols".into(),
        "x1,x2,x3".into(),
        "--outcome-spec".into(),
        root_path("configs/s3_outcome_spec.json"),
        "--mediator-spec".into(),
        root_path("configs/s3_mediator_spec.json"),
        "--propensity-spec".into(),
        root_path("configs/s3_propensity_spec.json"),
        "--out".into(),
        out_dir.to_string_lossy().into_owned(),
    ]
}

fn stderr_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).trim_end().to_string()
}

#[test]
fn simulate_smoke_run_produces_labeled_outputs() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run(&[
        "simulate".into(),
        "--config".into(),
        root_path("configs/smoke.json"),
        "--out".into(),
        dir.path().to_string_lossy().into_owned(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_line(&out));

    let table = std::fs::read_to_string(dir.path().join("simulate_table.csv")).expect("table");
    let mut lines = table.lines();
    assert!(lines.next().expect("header").starts_with("row,estimand,n,"));
    let row = lines.next().expect("one data row");
    assert!(row.starts_with("all correct,"), "row: {row}");
    assert!(row.contains(",triply,"), "row: {row}");

    let report: serde_json::Value = serde_json::from_slice(
        &std::fs::read(dir.path().join("simulate_report.json")).expect("report"),
    )
    .expect("json");
    assert_eq!(report["tables"][0]["rows"][0]["estimator"], "triply");
    assert_eq!(report["tables"][0]["n"], 150);

    let manifest: serde_json::Value = serde_json::from_slice(
        &std::fs::read(dir.path().join("simulate_manifest.json")).expect("manifest"),
    )
    .expect("json");
    let outputs: Vec<&str> = manifest["outputs"]
        .as_array()
        .expect("outputs")
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(outputs.contains(&"simulate_report.json"));
    assert!(outputs.contains(&"simulate_table.csv"));
}

#[test]
fn simulate_is_deterministic_across_thread_counts() {
    let mut artifacts = Vec::new();
    for threads in ["1", "3"] {
        let dir = tempfile::tempdir().expect("tempdir");
        let out = run(&[
            "simulate".into(),
            "--config".into(),
            root_path("configs/smoke.json"),
            "--threads".into(),
            threads.into(),
            "--out".into(),
            dir.path().to_string_lossy().into_owned(),
        ]);
        assert!(out.status.success(), "stderr: {}", stderr_line(&out));
        artifacts.push((
            std::fs::read(dir.path().join("simulate_report.json")).expect("report"),
            std::fs::read(dir.path().join("simulate_table.csv")).expect("table"),
        ));
    }
    assert_eq!(artifacts[0].0, artifacts[1].0, "reports differ across thread counts");
    assert_eq!(artifacts[0].1, artifacts[1].1, "tables differ across thread counts");
}

#[test]
fn sensitivity_curve_is_affine_and_anchored() {
    let dir = tempfile::tempdir().expect("tempdir");
    let grid = dir.path().join("grid.json");
    std::fs::write(&grid, r#"{"family":"constant","lambdas":[-1.0,0.0,1.0]}"#).expect("grid");
    let mut args = analyze_args(dir.path());
    args[0] = "sensitivity".into();
    args.extend([
        "--grid".into(),
        grid.to_string_lossy().into_owned(),
        "--boot-reps".into(),
        "0".into(),
    ]);
    let out = run(&args);
    assert!(out.status.success(), "stderr: {}", stderr_line(&out));

    let report: serde_json::Value = serde_json::from_slice(
        &std::fs::read(dir.path().join("sensitivity_report.json")).expect("report"),
    )
    .expect("json");
    let points = report["curve"]["points"].as_array().expect("points");
    assert_eq!(points.len(), 3);
    let nde: Vec<f64> = points
        .iter()
        .map(|p| p["nde"].as_f64().expect("nde"))
        .collect();
    let lambdas: Vec<f64> = points
        .iter()
        .map(|p| p["lambda"].as_f64().expect("lambda"))
        .collect();
    assert_eq!(lambdas, vec![-1.0, 0.0, 1.0]);
    let curvature = (nde[0] + nde[2] - 2.0 * nde[1]).abs();
    assert!(curvature <= 1e-10, "curve not affine: {curvature:e}");

    let csv = std::fs::read_to_string(dir.path().join("sensitivity_curve.csv")).expect("csv");
    assert!(csv.lines().next().expect("header").starts_with("lambda,"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn sensitivity_grid_without_zero_is_a_config_error() {
    let dir = tempfile::tempdir().expect("tempdir");
    let grid = dir.path().join("grid.json");
    std::fs::write(&grid, r#"{"family":"constant","lambdas":[0.5,1.0]}"#).expect("grid");
    let mut args = analyze_args(dir.path());
    args[0] = "sensitivity".into();
    args.extend(["--grid".into(), grid.to_string_lossy().into_owned()]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(9), "stderr: {}", stderr_line(&out));
    assert!(stderr_line(&out).starts_with("error[config]:"));
}

#[test]
fn analyze_rejects_malformed_csv_with_schema_error() {
    let dir = tempfile::tempdir().expect("tempdir");
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "y,e,m,x1\n1.0,2,0,0.5\n").expect("csv");
    let out = run(&[
        "analyze".into(),
        "--csv".into(),
        csv.to_string_lossy().into_owned(),
        "--x-cols".into(),
        "x1".into(),
        "--out".into(),
        dir.path().to_string_lossy().into_owned(),
    ]);
    assert_eq!(out.status.code(), Some(4), "stderr: {}", stderr_line(&out));
    let msg = stderr_line(&out);
    assert!(msg.starts_with("error[schema]:"), "stderr: {msg}");
    assert!(msg.contains("exposure"), "stderr: {msg}");
}

#[test]
fn analyze_rejects_spec_target_mismatch() {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut args = analyze_args(dir.path());
    // Hand the mediator spec to the outcome slot.
    let pos = args.iter().position(|a| a == "--outcome-spec").unwrap();
    args[pos + 1] = root_path("configs/s3_mediator_spec.json");
    let out = run(&args);
    assert_eq!(out.status.code(), Some(9), "stderr: {}", stderr_line(&out));
    assert!(stderr_line(&out).starts_with("error[config]:"));
}

#[test]
fn analyze_sandwich_requires_the_triply_estimator() {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut args = analyze_args(dir.path());
    args.extend([
        "--estimator".into(),
        "em".into(),
        "--inference".into(),
        "sandwich".into(),
    ]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(9), "stderr: {}", stderr_line(&out));
    let msg = stderr_line(&out);
    assert!(msg.contains("bootstrap"), "stderr should point at bootstrap: {msg}");
}

#[test]
fn unknown_estimator_is_a_usage_error() {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut args = analyze_args(dir.path());
    args.extend(["--estimator".into(), "bogus".into()]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_line(&out));
}
