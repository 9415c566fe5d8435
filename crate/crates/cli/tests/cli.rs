//! End-to-end checks of the binary: exit codes, validate diagnostics, and
//! recipe output layout.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_calibag"))
}

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn list_names_all_recipes() {
    let out = bin().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "recalibration-curves",
        "univariate-calibration",
        "covariance-metrics",
        "jackknife-vs-rmse",
        "imbalanced",
        "noise-sweep",
        "bag-sweep",
        "sl-study",
    ] {
        assert!(text.contains(name), "missing {name} in list output");
    }
    assert_eq!(text.lines().count(), 8);
}

#[test]
fn usage_errors_exit_one() {
    let out = bin().args(["run", "--recipe", "bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bogus"));

    let out = bin().args(["run"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "run",
            "--recipe",
            "imbalanced",
            "--fixture-dir",
            "/nonexistent-fixtures",
            "--output-dir",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(
        err.contains("mechanical-properties.csv"),
        "error must name the expected file: {err}"
    );
}

#[test]
fn validate_reports_unknown_keys_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "first = 1\n").unwrap();
    let out = bin().args(["validate", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("first") && err.contains("line 1"), "{err}");
}

#[test]
fn validate_echoes_defaults_for_empty_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.toml");
    std::fs::write(&path, "").unwrap();
    let out = bin().args(["validate", "--config"]).arg(&path).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("0.683"));
    assert!(text.contains("recipe default"));
}

#[test]
fn run_writes_only_inside_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("results");
    let out = bin()
        .args([
            "run",
            "--recipe",
            "bag-sweep",
            "--trials",
            "1",
            "--bags",
            "16",
            "--seed",
            "3",
            "--output-dir",
        ])
        .arg(&out_dir)
        .arg("--fixture-dir")
        .arg(fixture_dir())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("bag_sweep.csv").exists());
    assert!(out_dir.join("summary.json").exists());
    // nothing else lands next to the requested directory
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1);
}

#[test]
fn custom_objectives_study_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("study.toml");
    std::fs::write(
        &config_path,
        r#"
recipe = "sl-study"
seed = 4
trials = 2
methods = ["random"]
n_initial = 8

[[objective]]
output = "y0"
direction = "greater-than"
threshold = 20.0
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["run", "--config"])
        .arg(&config_path)
        .arg("--output-dir")
        .arg(&out_dir)
        .arg("--fixture-dir")
        .arg(fixture_dir())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["metadata"]["format_version"], 1);
    let studies = summary["results"]["studies"].as_array().unwrap();
    assert!(studies.iter().any(|s| s["problem"] == "custom"));
    let table = std::fs::read_to_string(out_dir.join("sl_trials.csv")).unwrap();
    assert!(table.lines().count() >= 3);
}
