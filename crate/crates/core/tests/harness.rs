use std::path::Path;
use std::process::Command;

use gge_bounds::harness::sweep::{csv_rows, run_sweep, ModelRef, PointOutcome, SweepConfig, SweepEnsemble};
use gge_bounds::harness::verify::{verify_suite, Check, VerifyOptions};
use gge_bounds::harness::models::IntKind;
use gge_bounds::Error;

fn xx() -> ModelRef {
    ModelRef::TwoQubit {
        omega_s: 1.0,
        omega_e: 1.0,
        int_kind: IntKind::Xx,
    }
}

fn config(beta: Vec<f64>, g: Vec<f64>) -> SweepConfig {
    SweepConfig {
        model: xx(),
        ensemble: SweepEnsemble::Canonical,
        beta,
        g,
        mu: vec![],
        out: None,
        tol_scale: None,
    }
}

#[test]
fn single_point_sweep() {
    let r = run_sweep(&config(vec![1.0], vec![0.5]), 1).unwrap();
    assert_eq!(r.records.len(), 1);
    assert!(r.clean());
    assert_eq!(r.config_hash.len(), 64);
    assert!(r.wall_time_s.is_none());
}

#[test]
fn two_qubit_xx_grid_is_master_inequality_clean() {
    let betas: Vec<f64> = (0..25).map(|i| 0.1 + i as f64 * 4.9 / 24.0).collect();
    let r = run_sweep(&config(betas.clone(), vec![0.0, 0.5, 1.0]), 0).unwrap();
    assert_eq!(r.records.len(), 75);
    assert_eq!(r.summary.ok, 75);
    assert!(r.clean());
    // grid order: β outer, g inner
    for (i, rec) in r.records.iter().enumerate() {
        assert_eq!(rec.point.index, i);
        assert_eq!(rec.point.beta, betas[i / 3]);
        let PointOutcome::Ok { bounds, residuals, .. } = &rec.outcome else { panic!("point {i} failed") };
        let rep = &bounds[0].report;
        assert!(rep.fisher <= rep.var - rep.q + 1e-8);
        assert!(rep.metadata.model_hash.is_some());
        assert!(residuals.hmf_round_trip <= 1e-9);
        assert!(residuals.qfi_fidelity_oracle <= 1e-4_f64.max(1e-3 * rep.fisher));
    }
}

#[test]
fn zero_beta_point_is_isolated() {
    let r = run_sweep(&config(vec![0.0, 1.0], vec![0.5]), 2).unwrap();
    assert_eq!(r.summary.errors, 1);
    assert_eq!(r.summary.ok, 1);
    assert!(matches!(&r.records[0].outcome, PointOutcome::Error { error } if error.contains("positive")));
    assert!(!r.clean());
    let rows = csv_rows(&r);
    assert_eq!(rows.len(), 2);
    assert!(!rows[0].error.is_empty());
}

#[test]
fn invalid_grids_are_config_errors() {
    assert!(matches!(run_sweep(&config(vec![], vec![0.5]), 1), Err(Error::Config(_))));
    assert!(matches!(run_sweep(&config(vec![1.0], vec![f64::NAN]), 1), Err(Error::Config(_))));
    let mut gc = config(vec![1.0], vec![0.5]);
    gc.ensemble = SweepEnsemble::GrandCanonical;
    gc.mu = vec![0.5];
    assert!(matches!(run_sweep(&gc, 1), Err(Error::Config(_))));
}

#[test]
fn sweep_output_is_independent_of_thread_count() {
    let cfg = config(vec![0.5, 1.0, 2.0], vec![0.0, 1.0]);
    let a = serde_json::to_string(&run_sweep(&cfg, 1).unwrap()).unwrap();
    let b = serde_json::to_string(&run_sweep(&cfg, 3).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn grand_canonical_sweep() {
    let cfg = SweepConfig {
        model: ModelRef::NumberConserving,
        ensemble: SweepEnsemble::GrandCanonical,
        beta: vec![1.0],
        g: vec![0.3],
        mu: vec![0.1, 2.0],
        out: None,
        tol_scale: None,
    };
    let r = run_sweep(&cfg, 0).unwrap();
    assert!(r.clean());
    let PointOutcome::Ok { bounds, .. } = &r.records[1].outcome else { panic!() };
    assert_eq!(bounds.len(), 2);
    assert!((bounds[1].report.bound_tight - 2.564367670038742).abs() < 1e-6);
}

#[test]
fn sweep_config_json() {
    let cfg: SweepConfig = serde_json::from_str(
        r#"{"model": {"type": "spin_chain", "n": 3, "J": 1.0, "h": 0.5}, "beta": [1.0], "g": [0.2, 0.7]}"#,
    )
    .unwrap();
    assert_eq!(cfg.ensemble, SweepEnsemble::Canonical);
    assert_eq!(cfg.points().len(), 2);
    assert!(run_sweep(&cfg, 1).unwrap().clean());
}

#[test]
fn verify_suite_seed_42() {
    let s = verify_suite(42, 10, VerifyOptions::default());
    assert!(s.passed, "{:#?}", s.checks);
    assert!(s.checks.iter().all(|c| c.passed > 0));
    let canary = verify_suite(42, 10, VerifyOptions { canary: true, tol_scale: 1.0 });
    assert!(canary.check(Check::FisherDecomposition).unwrap().failed > 0);
}

fn cli(args: &[&str], dir: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_gge-bounds"))
        .args(args)
        .current_dir(dir)
        .env_remove("GGE_BOUNDS_JOBS")
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn cli_exit_codes_and_formats() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        std::fs::write(dir.path().join(name), body).unwrap();
    };
    write("sweep.json", r#"{"model": {"type": "two_qubit", "int_kind": "xz"}, "beta": [1.0], "g": [0.5]}"#);
    write("bad_beta.json", r#"{"model": {"type": "two_qubit", "int_kind": "xz"}, "beta": [0.0], "g": [0.5]}"#);
    write("empty.json", r#"{"model": {"type": "two_qubit", "int_kind": "xz"}, "beta": [], "g": [0.5]}"#);
    write("hmf.json", r#"{"model": {"type": "two_qubit", "int_kind": "xz"}, "g": 0.5, "beta": 1.0}"#);

    let (code, json) = cli(&["sweep", "--config", "sweep.json"], dir.path());
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["summary"]["ok"], 1);
    assert!(v.get("wall_time_s").is_none());

    let (code, csv) = cli(&["sweep", "--config", "sweep.json", "--format", "csv"], dir.path());
    assert_eq!(code, 0);
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("index,beta,g,mu,label,var,q,k,xi,fisher"));

    assert_eq!(cli(&["sweep", "--config", "bad_beta.json"], dir.path()).0, 1);
    assert_eq!(cli(&["sweep", "--config", "empty.json"], dir.path()).0, 2);
    assert_eq!(cli(&["sweep", "--config", "missing.json"], dir.path()).0, 2);
    assert_eq!(cli(&["sweep", "--config", "sweep.json", "--tol-scale", "-1"], dir.path()).0, 2);

    let (code, json) = cli(&["hmf", "--config", "hmf.json", "--out", "h.json"], dir.path());
    assert_eq!(code, 0);
    assert!(json.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("h.json")).unwrap()).unwrap();
    assert!((v["h_star"]["re"][0][1].as_f64().unwrap() + 0.21627837322).abs() < 1e-9);
    assert_eq!(cli(&["hmf", "--config", "hmf.json", "--format", "csv"], dir.path()).0, 2);

    assert_eq!(cli(&["verify", "--trials", "1"], dir.path()).0, 0);
    assert_eq!(cli(&["verify", "--trials", "2", "--canary"], dir.path()).0, 1);
    assert_eq!(cli(&["verify", "--trials", "0"], dir.path()).0, 2);
}

#[test]
fn jobs_env_var_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gge-bounds"))
        .args(["verify", "--trials", "1"])
        .current_dir(dir.path())
        .env("GGE_BOUNDS_JOBS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
