use std::path::Path;
use std::process::{Command, Output};

fn ddsr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddsr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn small_sim(dir: &Path, noise: &str) {
    let cfg = dir.join("sim.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"dims": {{"T": 1.0, "Omega": 31.0, "N1": 15, "N2": 15}}, "features": 2, "noise_db": {noise}, "separation": 0.1}}"#
        ),
    )
    .unwrap();
    let out = ddsr(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        dir.to_str().unwrap(),
    ]);
    ok(&out);
}

fn eval_json(dir: &Path, estimate: &str) -> serde_json::Value {
    let out = ddsr(&[
        "evaluate",
        "--truth",
        dir.join("channel.json").to_str().unwrap(),
        "--estimate",
        dir.join(estimate).to_str().unwrap(),
    ]);
    ok(&out);
    serde_json::from_slice(&out.stdout).expect("evaluation is JSON")
}

#[test]
fn simulate_writes_interchange_files() {
    let dir = tempfile::tempdir().unwrap();
    small_sim(dir.path(), "-20.0");
    for f in ["channel.json", "identifier.json", "samples.json", "simulation.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let y: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("samples.json")).unwrap()).unwrap();
    assert!(y.get("dims").is_some());
}

#[test]
fn simulate_is_seeded() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    small_sim(a.path(), "-20.0");
    small_sim(b.path(), "-20.0");
    for f in ["channel.json", "samples.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
}

#[test]
fn truth_evaluates_to_exact() {
    let dir = tempfile::tempdir().unwrap();
    small_sim(dir.path(), "null");
    let v = eval_json(dir.path(), "channel.json");
    assert_eq!(v["operator_norm"]["abs_err"].as_f64(), Some(0.0));
    assert!(v["operator_norm"]["rel_err_db"].is_null());
    assert_eq!(v["success"], true);
}

#[test]
fn adcg_round_trip_on_clean_data() {
    let dir = tempfile::tempdir().unwrap();
    small_sim(dir.path(), "null");
    let settings = dir.path().join("solvers.json");
    std::fs::write(&settings, r#"{"adcg": {"grid": [128, 128]}, "lambda": {"rule": "fixed", "value": 1e-6}}"#).unwrap();
    let out = ddsr(&[
        "recover",
        "--alg",
        "adcg",
        "--samples",
        dir.path().join("samples.json").to_str().unwrap(),
        "--identifier",
        dir.path().join("identifier.json").to_str().unwrap(),
        "--config",
        settings.to_str().unwrap(),
        "--features",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    ok(&out);
    let v = eval_json(dir.path(), "recovery.json");
    let db = v["operator_norm"]["rel_err_db"].as_f64().unwrap_or(f64::NEG_INFINITY);
    assert!(db < -40.0, "clean recovery at {db} dB");
}

#[test]
fn omp_recover_accepts_noise_level() {
    let dir = tempfile::tempdir().unwrap();
    small_sim(dir.path(), "-20.0");
    let settings = dir.path().join("solvers.json");
    std::fs::write(&settings, r#"{"omp_grid": [64, 64]}"#).unwrap();
    let out = ddsr(&[
        "recover",
        "--alg",
        "omp",
        "--samples",
        dir.path().join("samples.json").to_str().unwrap(),
        "--identifier",
        dir.path().join("identifier.json").to_str().unwrap(),
        "--config",
        settings.to_str().unwrap(),
        "--noise-db",
        "-20",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    ok(&out);
    assert!(dir.path().join("estimate.json").exists());
}

#[test]
fn experiment_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    std::fs::write(
        &cfg,
        r#"{
            "kind": "noise-sweep",
            "dims": {"T": 1.0, "Omega": 15.0, "N1": 7, "N2": 7},
            "features": 1,
            "noise_db": [-20.0, null],
            "algorithms": ["omp"],
            "solvers": {"omp_grid": [32, 32]}
        }"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = ddsr(&[
        "--threads",
        "1",
        "experiment",
        "--kind",
        "noise-sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "2",
        "--quiet",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    ok(&out);
    let trials = std::fs::read_to_string(out_dir.join("noise-sweep_trials.csv")).unwrap();
    // header + 2 levels x 2 trials x 1 algorithm
    assert_eq!(trials.lines().count(), 5);
    let summary = std::fs::read_to_string(out_dir.join("noise-sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(out_dir.join("noise-sweep_report.json").exists());
}

#[test]
fn invalid_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"kind": "min-sep", "trials": 0}"#).unwrap();
    let out = ddsr(&["experiment", "--kind", "min-sep", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials"));
}

#[test]
fn kind_mismatch_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("t1.json");
    std::fs::write(&cfg, r#"{"kind": "table1"}"#).unwrap();
    let out = ddsr(&["experiment", "--kind", "min-sep", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn missing_file_fails() {
    let out = ddsr(&["evaluate", "--truth", "/nonexistent.json", "--estimate", "/nonexistent.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));
}
