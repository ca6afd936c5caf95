use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qtrack_cli::sha256_hex;

fn workspace_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn qtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtrack"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

const BASE: &str = r#"{
  "theta": [4, 1],
  "quantizer": "standard",
  "reference": {"kind": "alternating"},
  "horizon": 400,
  "trials": 8
"#;

fn with(extra: &str) -> String {
    format!("{BASE}{extra}}}")
}

#[test]
fn simulate_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = workspace_config("example.json");
    let o = qtrack(&["simulate", cfg.to_str().unwrap(), "--horizon", "100", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("trial.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("k,u,y,S,S_bar,theta1_hat,theta2_hat,err_sq,track_sq")
    );
    assert_eq!(lines.clone().count(), 100);
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "1");
    assert_eq!(first[1].parse::<f64>().unwrap(), 0.2);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"], sha256_hex(&fs::read(&cfg).unwrap()));
    assert_eq!(manifest["master_seed"], 20240601);
}

#[test]
fn invalid_quantizer_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &BASE.replace("\"standard\"", r#"{"thresholds": [0, 0], "weights": [1, 0, -1]}"#).replace("\"trials\": 8\n", "\"trials\": 8}"),
    );
    let o = qtrack(&["simulate", cfg.to_str().unwrap(), "-o", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("NonAscendingThresholds"));
}

#[test]
fn quantizer_preset_flag_replaces_file_quantizer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &BASE.replace("\"standard\"", r#"{"thresholds": [0, 0], "weights": [1, 0, -1]}"#).replace("\"trials\": 8\n", "\"trials\": 8}"),
    );
    let o = qtrack(&[
        "simulate",
        cfg.to_str().unwrap(),
        "--quantizer-preset",
        "standard",
        "-o",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn missing_or_malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = qtrack(&["simulate", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config(dir.path(), "{ not json");
    let o = qtrack(&["check", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergence_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &with(
            r#", "omega": {"kind": "box", "lo1": 0, "hi1": 0, "lo2": -2, "hi2": 2},
  "theta_hat0": [0, 0], "epsilon_guard": null"#,
        ),
    );
    let out = dir.path().join("o");
    let o = qtrack(&["simulate", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("NearZeroLeadingEstimate"));
    let o = qtrack(&["montecarlo", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn synthetic_power_fits_exact_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = workspace_config("example.json");
    let o = qtrack(&[
        "montecarlo",
        cfg.to_str().unwrap(),
        "--synthetic-power",
        "1",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "slope,slope_se,tail_tracking_mean,tail_tracking_se,rate_class,zeta,empirical_K0,delta_y_hat"
    );
    let slope: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
    assert!((slope + 1.0).abs() < 1e-12);
}

#[test]
fn montecarlo_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(dir.path(), &with(""));
    let o = qtrack(&["montecarlo", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mse = fs::read_to_string(out.join("mse_curve.csv")).unwrap();
    assert_eq!(mse.lines().next(), Some("k,mse,mse_se,k_times_mse"));
    let tracking = fs::read_to_string(out.join("tracking_curve.csv")).unwrap();
    assert_eq!(tracking.lines().next(), Some("k,track,track_se"));
    assert_eq!(mse.lines().count(), tracking.lines().count());
    assert_eq!(mse.lines().last().unwrap().split(',').next(), Some("400"));
    assert_eq!(fs::read_to_string(out.join("summary.csv")).unwrap().lines().count(), 2);
}

#[test]
fn check_example_flags_parameter_set() {
    let cfg = workspace_config("example.json");
    let o = qtrack(&["check", cfg.to_str().unwrap(), "--horizon", "500"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("margin = 3 vs mu"));
    assert!(text.contains("contains theta(1) = 0"));
    assert!(text.contains("not-certifiable"));
}

#[test]
fn check_signed_box_passes_everything() {
    let cfg = workspace_config("signed_box.json");
    let o = qtrack(&["check", cfg.to_str().unwrap(), "--horizon", "500"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(!text.contains("FAIL") && !text.contains("warn") && !text.contains("not-certifiable"));
    assert!(text.contains("2.9698484809835"));
}

#[test]
fn check_short_window_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &with(r#", "window": 2"#));
    let o = qtrack(&["check", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("WindowTooShort"));
}

#[test]
fn check_hard_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &with(r#", "mu": 5"#));
    let o = qtrack(&["check", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("AssumptionFailed: minimum phase"));
}
