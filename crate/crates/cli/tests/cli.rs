use std::path::Path;
use std::process::{Command, Output};

fn mfqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfqkd")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn rate_prints_csv_with_expected_header() {
    let out = mfqkd(&["rate", "--transmitter", "oil", "--distance-km", "50", "--att-db", "120"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("transmitter,distance_km,att_db,analysis,R,Y1L,eph_U,eX_U,F_prime,Q_key,E_key,p_omega,"));
    assert!(lines.next().unwrap().starts_with("oil,5.000000000000e1,1.200000000000e2,baseline,"));
    assert!(lines.next().is_none());
}

#[test]
fn sweep_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"transmitter": "passive", "distances_km": [20, 60], "attenuations_db": [40, 120],
            "quadrature": {"nodes": 8, "convergence_check": false, "tolerance": 1e-6}}"#,
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = mfqkd(&["sweep", "--config", &cfg, "--seed", "5", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 5);
}

#[test]
fn json_output_and_flag_overrides() {
    let out = mfqkd(&[
        "sweep", "--transmitter", "oil", "--distance-km", "10,30", "--att-db", "90", "--ncut", "3", "--format", "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["distance_km"], 30.0);
    assert_eq!(rows[0]["att_db"], 90.0);
}

#[test]
fn optimize_reports_optimized_intensities() {
    let out = mfqkd(&["optimize", "--transmitter", "oil", "--distance-km", "50", "--att-db", "120", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v[0]["r"].as_f64().unwrap() > 0.0);
    assert_ne!(v[0]["source"]["intensities"][0], 0.5);
}

#[test]
fn invalid_configuration_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"p_zb": 2.0}"#);
    assert_eq!(mfqkd(&["rate", "--config", &bad]).status.code(), Some(3));
    let unknown = write(dir.path(), "unknown.json", r#"{"colour": "red"}"#);
    assert_eq!(mfqkd(&["sweep", "--config", &unknown]).status.code(), Some(3));
    assert_eq!(mfqkd(&["rate", "--config", "/nonexistent/cfg.json"]).status.code(), Some(3));
    assert_eq!(mfqkd(&["rate", "--distance-km", "-5"]).status.code(), Some(3));
    assert_eq!(mfqkd(&["rate", "--transmitter", "laser"]).status.code(), Some(3));
    assert_eq!(mfqkd(&["rate", "--distance-km", "10,20"]).status.code(), Some(3));
}

#[test]
fn infeasible_program_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // Two quadrature nodes are too coarse for consistent statistics at 0 km.
    let cfg = write(
        dir.path(),
        "coarse.json",
        r#"{"quadrature": {"nodes": 2, "convergence_check": false, "tolerance": 1e-6}}"#,
    );
    let out = mfqkd(&["rate", "--config", &cfg, "--distance-km", "0", "--att-db", "30"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn validate_runs_selected_checks() {
    let out = mfqkd(&["validate", "--check", "4,9"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 2);
    assert_eq!(mfqkd(&["validate", "--check", "11"]).status.code(), Some(3));
}
