//! End-to-end tests of the installed binary: flag handling, exit codes,
//! file outputs and determinism of the reporting layer.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_volterra"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(output: &Output) -> Value {
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is a JSON document")
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
        .display()
        .to_string()
}

#[test]
fn fit_reports_near_perfect_reconstruction_of_the_death_series() {
    let out = run(&[
        "fit",
        "-i",
        &data("death.csv"),
        "-m",
        "10",
        "-p",
        "5",
        "--lambda",
        "1e-8",
        "--prescale",
    ]);
    let json = stdout_json(&out);
    assert_eq!(json["schema_version"], "1");
    assert_eq!(json["command"], "fit");
    assert_eq!(json["observations"], 72);
    assert_eq!(json["rows"], 62);
    assert!(json["training_rmse"].as_f64().unwrap() < 1e-4);
    assert_eq!(json["reconstruction"].as_array().unwrap().len(), 62);
}

#[test]
fn fit_writes_report_files_into_the_out_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "fit",
        "-i",
        &data("nile.csv"),
        "-m",
        "3",
        "-p",
        "2",
        "--lambda",
        "1e-6",
        "--prescale",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let json: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit.json")).unwrap())
            .unwrap();
    assert_eq!(json["schema_version"], "1");
    let reconstruction = std::fs::read_to_string(dir.path().join("reconstruction.csv")).unwrap();
    assert!(reconstruction.starts_with("row,target,prediction,error\n"));
    assert_eq!(reconstruction.lines().count(), 1 + 97);
    let operators = std::fs::read_to_string(dir.path().join("operators.csv")).unwrap();
    assert!(operators.starts_with("row,h0,h1,h2\n"));
    // No leftover temporaries from the atomic writes.
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .ends_with(".tmp")
        })
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn kspa_on_identical_samples_is_a_perfect_tie() {
    let out = run(&[
        "kspa",
        &data("nile.csv"),
        &data("nile.csv"),
        "--family-size",
        "4",
    ]);
    let json = stdout_json(&out);
    assert_eq!(json["two_sided"]["statistic"], 0.0);
    assert_eq!(json["two_sided"]["p_value"], 1.0);
    assert_eq!(json["two_sided"]["adjusted_p"], 1.0);
    assert_eq!(json["one_sided"]["statistic"], 0.0);
    assert_eq!(json["one_sided"]["p_value"], 1.0);
}

#[test]
fn kspa_separates_well_separated_samples() {
    let dir = tempfile::tempdir().unwrap();
    let small = dir.path().join("small.csv");
    let large = dir.path().join("large.csv");
    write(&small, "err\n0.1\n-0.2\n0.15\n");
    write(&large, "err\n5.0\n-6.0\n7.0\n");
    let out = run(&[
        "kspa",
        small.to_str().unwrap(),
        large.to_str().unwrap(),
    ]);
    let json = stdout_json(&out);
    assert_eq!(json["two_sided"]["statistic"], 1.0);
    assert_eq!(json["two_sided"]["method"], "exact");
    assert!((json["two_sided"]["p_value"].as_f64().unwrap() - 0.1).abs() < 1e-12);
    assert!((json["one_sided"]["p_value"].as_f64().unwrap() - 0.05).abs() < 1e-12);
    assert!(json.get("family_size").is_none());
    assert!(json["two_sided"].get("adjusted_p").is_none());
}

#[test]
fn kspa_squared_transform_is_reported() {
    let out = run(&[
        "kspa",
        &data("nile.csv"),
        &data("nile.csv"),
        "--transform",
        "sq",
    ]);
    let json = stdout_json(&out);
    assert_eq!(json["transform"], "squared");
}

#[test]
fn kspa_writes_report_and_ecdf_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("report");
    let out = run(&[
        "kspa",
        &data("death.csv"),
        &data("nile.csv"),
        "-o",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out_dir.join("kspa.json").is_file());
    let ecdf = std::fs::read_to_string(out_dir.join("ecdf.csv")).unwrap();
    assert!(ecdf.starts_with("method,error,fraction\n"));
    assert!(ecdf.contains("death,"));
    assert!(ecdf.contains("nile,"));
}

#[test]
fn simulate_output_is_deterministic() {
    let args = [
        "simulate", "--runs", "3", "--length", "50", "-m", "2", "-p", "1", "--lambda", "0.01",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let json = stdout_json(&first);
    // three processes, one config, three methods
    assert_eq!(json["summary"]["cells"].as_array().unwrap().len(), 9);
}

#[test]
fn select_reports_the_singleton_candidate() {
    let out = run(&[
        "select",
        "-i",
        &data("nile.csv"),
        "-m",
        "4",
        "-p",
        "2",
        "--lambda",
        "1e-4",
        "--folds",
        "3",
        "--prescale",
    ]);
    let json = stdout_json(&out);
    assert_eq!(json["cv"]["candidates"].as_array().unwrap().len(), 1);
    assert_eq!(json["cv"]["selected"]["config"]["memory"], 4);
    assert_eq!(json["cv"]["selected"]["config"]["order"], 2);
    assert!(json["cv"]["test_rmse"].as_f64().unwrap().is_finite());
}

#[test]
fn missing_input_file_is_a_data_error() {
    let out = run(&["fit", "-i", "/nonexistent/series.csv", "-m", "2", "-p", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_data_rows_are_data_errors_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    write(&path, "value\n1.0\nnot-a-number\n3.0\n");
    let out = run(&["fit", "-i", path.to_str().unwrap(), "-m", "1", "-p", "1"]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(":3:"), "stderr: {stderr}");
}

#[test]
fn incomplete_flag_sets_are_config_errors() {
    // fit without an input
    assert_eq!(run(&["fit", "-m", "2", "-p", "1"]).status.code(), Some(2));
    // sum kernel without an order
    assert_eq!(
        run(&["fit", "-i", &data("nile.csv"), "-m", "2"]).status.code(),
        Some(2)
    );
    // unknown kernel name
    assert_eq!(
        run(&["fit", "-i", &data("nile.csv"), "-m", "2", "--kernel", "bogus"])
            .status
            .code(),
        Some(2)
    );
    // simulate with only half a configuration
    assert_eq!(run(&["simulate", "-m", "4"]).status.code(), Some(2));
    // reproduce without an output directory
    assert_eq!(run(&["reproduce"]).status.code(), Some(2));
    // reproduce with an unknown target
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&[
            "reproduce",
            "-o",
            dir.path().to_str().unwrap(),
            "--target",
            "table9"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn numerical_failures_exit_with_their_own_code() {
    // The exponential kernel overflows on unscaled thousand-level values,
    // which surfaces as a numerical error rather than a crash.
    let out = run(&["fit", "-i", &data("nile.csv"), "-m", "2", "--kernel", "exponential"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn config_file_presets_lose_to_explicit_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    write(
        &cfg,
        "# defaults for this experiment\nmemory=2\norder=1\nlambda=0.5\nprescale=true\n",
    );
    let out = run(&[
        "fit",
        "--config",
        cfg.to_str().unwrap(),
        "-i",
        &data("nile.csv"),
        "-m",
        "3",
    ]);
    let json = stdout_json(&out);
    // memory came from the flag, order and lambda from the file
    assert_eq!(json["memory"], 3);
    assert_eq!(json["kernel"]["order"], 1);
    assert_eq!(json["lambda"], 0.5);
    assert_eq!(json["prescale"], true);
}

#[test]
fn unknown_config_keys_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    write(&cfg, "memroy=2\n");
    let out = run(&[
        "fit",
        "--config",
        cfg.to_str().unwrap(),
        "-i",
        &data("nile.csv"),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_cap_env_is_validated() {
    let out = bin()
        .args(["simulate", "--runs", "1", "--length", "40", "-m", "1", "-p", "1", "--lambda", "0.1"])
        .env("VOLTERRA_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let ok = bin()
        .args(["simulate", "--runs", "1", "--length", "40", "-m", "1", "-p", "1", "--lambda", "0.1"])
        .env("VOLTERRA_THREADS", "1")
        .output()
        .unwrap();
    assert!(ok.status.success());
}

#[test]
fn single_target_reproduce_writes_only_its_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "reproduce",
        "-o",
        dir.path().to_str().unwrap(),
        "--target",
        "figure1",
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["figure1.csv", "figure1.json", "figure1_cv.csv", "manifest.json"]
    );
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["target"], "figure1");
    assert_eq!(
        manifest["files"],
        serde_json::json!(["figure1.json", "figure1.csv", "figure1_cv.csv"])
    );
}
