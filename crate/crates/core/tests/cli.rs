use std::process::{Command, Output};

use serde_json::Value;

const FIG1: &[&str] = &["--atoms", "100", "--rabi", "10000", "--detuning", "50", "--dipole", "-10"];

fn sfloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfloc")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn with<S: AsRef<str>>(base: &[&str], extra: &[S]) -> Vec<String> {
    base.iter().map(|s| s.to_string()).chain(extra.iter().map(|s| s.as_ref().to_string())).collect()
}

fn run(args: &[String]) -> Output {
    sfloc(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn single_atom_profile_csv() {
    let o = sfloc(&["profile", "--atoms", "1", "--rabi", "1", "--detuning", "0", "--dipole", "0", "--grid", "5"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        let om = r[0].cos();
        let expect = om * om / (2.0 * om * om + 1.0);
        assert!((r[1] - expect).abs() < 1e-15, "{r:?}");
    }
}

#[test]
fn missing_flag_is_config_error() {
    let o = sfloc(&["profile", "--atoms", "1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--rabi"));
}

#[test]
fn fig1_profile_json_reports_dip() {
    let o = run(&with(&["profile"], &with(FIG1, &["--format", "json"])));
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let width = v["dip"]["width"].as_f64().unwrap();
    assert!(width > 0.01 * std::f64::consts::PI && width < 0.03 * std::f64::consts::PI);
    assert_eq!(v["profile"]["values"].as_array().unwrap().len(), 2001);
}

#[test]
fn sweep_outputs() {
    let base = ["profile", "--atoms", "2", "--rabi", "100", "--detuning", "0", "--dipole", "-5", "--grid", "101"];
    let o = run(&with(&base, &["--sweep", "detuning", "--samples", "0,2.5,5"]));
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "kx,detuning_per_n_gamma,intensity_per_n2");
    assert_eq!(text.lines().count(), 1 + 3 * 101);

    let o = run(&with(&base, &["--sweep", "atoms", "--samples", "2,4,8", "--widths"]));
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "atoms,width");
    assert_eq!(text.lines().count(), 4);

    assert_eq!(code(&run(&with(&base, &["--sweep", "detuning"]))), 2);
    assert_eq!(code(&run(&with(&base, &["--sweep", "colour", "--samples", "1"]))), 2);
}

#[test]
fn oracle_default_suite_passes() {
    let o = sfloc(&["oracle"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 7);
    for line in text.lines().skip(1) {
        let dev: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(dev <= 1e-8);
    }
}

#[test]
fn oracle_table_and_cap() {
    let o = sfloc(&["oracle", "--atoms", "2", "--rabi", "100", "--detuning", "10", "--dipole", "-5", "--grid", "101"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "kx,analytic,oracle,rel_deviation");
    assert_eq!(text.lines().count(), 102);
    assert_eq!(code(&sfloc(&["oracle", "--atoms", "25"])), 2);
}

#[test]
fn scan_round_trip() {
    let o = run(&with(&["scan"], &with(FIG1, &["--true-pos", "0.3", "--noise", "0", "--seed", "1"])));
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let kx = v["estimate"]["kx_hat"].as_f64().unwrap();
    assert!((kx - 0.3 * std::f64::consts::PI).abs() <= 2.0 * std::f64::consts::PI / 2000.0);
}

#[test]
fn scan_two_ensembles() {
    let o = run(&with(&["scan"], &with(FIG1, &["--true-pos", "0.25", "--second-pos", "0.6", "--format", "csv"])));
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let over_pi: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((over_pi - 0.35).abs() <= 1.0 / 1000.0);
}

#[test]
fn flat_scan_is_estimator_failure() {
    let o = sfloc(&["scan", "--atoms", "100", "--rabi", "0", "--detuning", "50", "--dipole", "-10", "--true-pos", "0.3"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn locate_node_only() {
    let o = sfloc(&["locate", "--atoms", "4", "--rabi", "100", "--detuning", "10", "--dipole", "-5", "--intensity", "0", "--sigma", "0"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let iv = v["candidates"]["intervals"].as_array().unwrap();
    assert_eq!(iv.len(), 1);
    assert_eq!(iv[0]["kx_low"].as_f64().unwrap(), std::f64::consts::FRAC_PI_2);
    assert_eq!(iv[0]["kx_high"].as_f64().unwrap(), std::f64::consts::FRAC_PI_2);
}

#[test]
fn locate_with_timescale() {
    let o = sfloc(&[
        "locate", "--atoms", "10", "--rabi", "100", "--detuning", "10", "--dipole", "-5", "--intensity", "1", "--sigma", "0.1",
        "--flight-time", "3e-6", "--gamma-si", "1e7",
    ]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["timescale"]["pass"], Value::Bool(true));
    assert!((v["timescale"]["tau_steady"].as_f64().unwrap() - 1e-8).abs() < 1e-20);
    let o = sfloc(&["locate", "--atoms", "10", "--rabi", "1", "--detuning", "0", "--dipole", "0", "--intensity", "1", "--sigma", "0", "--flight-time", "1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn coeffs_examples() {
    let o = sfloc(&["coeffs", "--kr", "0.3141", "--xi", "0"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let avg: f64 = text.lines().find(|l| l.starts_with("averaged_dd,")).unwrap()[12..].parse().unwrap();
    assert!((avg + 1.0 / (2.0 * 0.3141)).abs() < 1e-12);

    let o = sfloc(&["coeffs", "--kr", "1e-6", "--xi", "1.0", "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["chi"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    assert_eq!(code(&sfloc(&["coeffs", "--kr", "-1"])), 2);
}

#[test]
fn out_file_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let args = with(&["scan"], &with(FIG1, &["--true-pos", "0.3", "--noise", "0.02", "--seed", "7", "--out", path.to_str().unwrap()]));
        let o = run(&args);
        assert_eq!(code(&o), 0);
        assert!(o.stdout.is_empty());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn every_subcommand_honors_format() {
    let cases: [&[&str]; 5] = [
        &["profile", "--atoms", "2", "--rabi", "10", "--detuning", "0", "--dipole", "0", "--grid", "9"],
        &["oracle", "--atoms", "2", "--rabi", "10", "--detuning", "0", "--dipole", "0", "--grid", "9"],
        &["scan", "--atoms", "100", "--rabi", "10000", "--detuning", "50", "--dipole", "-10", "--true-pos", "0.3", "--grid", "801"],
        &["locate", "--atoms", "2", "--rabi", "10", "--detuning", "0", "--dipole", "0", "--intensity", "0.5", "--sigma", "0.1"],
        &["coeffs", "--kr", "1"],
    ];
    for args in cases {
        let json = run(&with(args, &["--format", "json"]));
        assert_eq!(code(&json), 0, "{args:?}");
        serde_json::from_str::<Value>(&stdout(&json)).unwrap();
        let csv = run(&with(args, &["--format", "csv"]));
        assert_eq!(code(&csv), 0, "{args:?}");
        assert!(stdout(&csv).lines().next().unwrap().contains(','));
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"subcommand": "profile", "atoms": 1, "rabi": 1.0, "detuning": 5.0, "dipole": 0.0, "grid": 5}"#).unwrap();
    let o = sfloc(&["profile", "--config", cfg.to_str().unwrap(), "--detuning", "0"]);
    assert_eq!(code(&o), 0);
    let first: Vec<f64> = stdout(&o).lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[1], 1.0 / 3.0);

    std::fs::write(&cfg, r#"{"atoms": 1, "unknown": true}"#).unwrap();
    assert_eq!(code(&sfloc(&["profile", "--config", cfg.to_str().unwrap()])), 2);
    assert_eq!(code(&sfloc(&["profile", "--config", "/nonexistent/run.json"])), 2);
}
