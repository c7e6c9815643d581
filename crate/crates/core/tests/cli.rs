use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hcma(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcma"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn unknown_key_is_a_config_error_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), r#"{"ivp": {"order": 6, "velocityy": {"kind": "zero"}}}"#);
    let out = hcma(&["ivp", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("velocityy"));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn problem_mismatch_and_bad_flags_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), r#"{"problem": "divisor"}"#);
    assert_eq!(hcma(&["ivp", "--config", &cfg], tmp.path()).status.code(), Some(3));
    assert_eq!(hcma(&["ivp", "--tolerance-scale", "-1"], tmp.path()).status.code(), Some(3));
    assert_eq!(hcma(&["frobnicate"], tmp.path()).status.code(), Some(3));
    let radial = config(tmp.path(), r#"{"surface": {"kind": "torus", "resolution": 16}}"#);
    assert_eq!(hcma(&["ray", "--config", &radial], tmp.path()).status.code(), Some(3));
}

#[test]
fn ivp_scenario_records_the_residual_order() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        r#"{"problem": "ivp", "ivp": {"order": 6, "velocity": {"kind": "cosine", "amplitude": 0.1}}}"#,
    );
    let out = hcma(&["ivp", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("o");
    let s = summary(&dir);
    assert!(s["fitted_residual_order"].as_f64().unwrap() >= 4.8);
    let residuals = fs::read_to_string(dir.join("residuals.csv")).unwrap();
    assert!(residuals.starts_with("t,hcma,geodesic,wzw\n"));
    assert_eq!(residuals.lines().count(), 10);
    let series = fs::read_to_string(dir.join("series.csv")).unwrap();
    assert!(series.starts_with("k,sup_norm,mean\n"));
    assert_eq!(series.lines().count(), 7);
    assert!(fs::read_to_string(dir.join("ray.csv")).unwrap().starts_with("x,energy,c0,length\n"));
}

#[test]
fn rotation_ray_report_shows_constant_speed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hcma(&["ray", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text.lines().find(|l| l.starts_with("speed_drift")).unwrap();
    let drift: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
    assert!(drift < 1e-6, "{line}");
    let s = summary(&tmp.path().join("o"));
    assert!(s["c0_ratio"].as_f64().unwrap() > 10.0);
    assert_eq!(s["c0_strictly_increasing"], Value::Bool(true));
}

#[test]
fn divisor_report_lists_residual_and_equivariance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        r#"{"divisor": {"twist": {"weight": 1, "field": {"kind": "cosine", "amplitude": 0.2}}}}"#,
    );
    let out = hcma(&["divisor", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("max_residual_mod_sk")));
    assert!(text.lines().any(|l| l.starts_with("equivariance_defect")));
    let length = text.lines().find(|l| l.starts_with("length")).unwrap();
    assert!(length.ends_with("0.000000e0"), "{length}");
    let s = summary(&tmp.path().join("o"));
    assert!(s["max_residual_mod_sk"].as_f64().unwrap() < 1e-10);
    assert!(s["equivariance_defect"].as_f64().unwrap() > 1e-3);
    let ray = fs::read_to_string(tmp.path().join("o/ray.csv")).unwrap();
    assert_eq!(ray, "x,energy,c0,length\n");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for scenario in ["ivp", "divisor", "ray"] {
        let a = format!("{scenario}-a");
        let b = format!("{scenario}-b");
        assert_eq!(hcma(&[scenario, "--out", &a], tmp.path()).status.code(), Some(0));
        assert_eq!(hcma(&[scenario, "--out", &b], tmp.path()).status.code(), Some(0));
        for file in ["series.csv", "residuals.csv", "ray.csv", "summary.json"] {
            let (pa, pb) = (tmp.path().join(&a).join(file), tmp.path().join(&b).join(file));
            if pa.exists() || pb.exists() {
                assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap(), "{scenario}/{file}");
            }
        }
    }
}

#[test]
fn tight_tolerances_fail_validation_with_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hcma(&["validate", "--tolerance-scale", "1e-9", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let s = summary(&tmp.path().join("o"));
    assert_eq!(s["passed"], Value::Bool(false));
}
