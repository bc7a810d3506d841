use ddsr::atoms::RegularGrid;
use ddsr::evaluation;
use ddsr::experiments::{
    aggregate, recover, run_experiment, Algorithm, ExperimentConfig, ExperimentKind, ExperimentReport, LambdaRule,
    SolverSettings, TrialRow,
};
use ddsr::measurement::{build_g, forward_atoms};
use ddsr::model::{random_identifier, Feature};
use ddsr::{ChannelSpec, Complex64, ProblemDims};

fn small(kind: ExperimentKind, extra: &str) -> ExperimentConfig {
    let json = format!(
        r#"{{
            "kind": "{}",
            "dims": {{"T": 1.0, "Omega": 15.0, "N1": 7, "N2": 7}},
            "features": 2,
            "trials": 3,
            "algorithms": ["omp", "refine", "adcg"],
            "solvers": {{
                "omp_grid": [48, 48],
                "refine": {{"initial_grid": [32, 32], "levels": 4}},
                "adcg": {{"grid": [48, 48], "inner_iters": 5}}
            }}
            {extra}
        }}"#,
        kind.name()
    );
    ExperimentConfig::from_json(&json).expect("valid config")
}

fn strip_time(rows: &[TrialRow]) -> Vec<TrialRow> {
    rows.iter()
        .map(|r| TrialRow {
            wall_time_s: 0.0,
            ..r.clone()
        })
        .collect()
}

fn same_rows(a: &ExperimentReport, b: &ExperimentReport) -> bool {
    // NaN != NaN, so compare serialized rows
    serde_json::to_string(&strip_time(&a.rows)).unwrap() == serde_json::to_string(&strip_time(&b.rows)).unwrap()
}

#[test]
fn reruns_are_identical() {
    let cfg = small(ExperimentKind::NoiseSweep, r#", "noise_db": [-20.0, null]"#);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert!(same_rows(&a, &b));
}

#[test]
fn different_seed_changes_rows() {
    let mut cfg = small(ExperimentKind::NoiseSweep, r#", "noise_db": [-20.0], "algorithms": ["omp"]"#);
    let a = run_experiment(&cfg).unwrap();
    cfg.seed += 1;
    let b = run_experiment(&cfg).unwrap();
    assert!(!same_rows(&a, &b));
}

#[test]
fn one_row_per_level_trial_algorithm() {
    let cfg = small(ExperimentKind::NoiseSweep, r#", "noise_db": [-10.0, -30.0, null]"#);
    let rep = run_experiment(&cfg).unwrap();
    assert_eq!(rep.rows.len(), 3 * 3 * 3);
    let mut keys: Vec<_> = rep
        .rows
        .iter()
        .map(|r| (r.noise_db.map(f64::to_bits), r.trial, r.algorithm))
        .collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), rep.rows.len());
    assert_eq!(rep.aggregates.len(), 3 * 3);
    assert!(rep.rows.iter().all(|r| r.error.is_none()));
}

#[test]
fn aggregates_recompute_from_rows() {
    let cfg = small(ExperimentKind::NoiseSweep, r#", "noise_db": [-20.0, null]"#);
    let rep = run_experiment(&cfg).unwrap();
    let again = aggregate(&rep.rows);
    assert_eq!(
        serde_json::to_string(&again).unwrap(),
        serde_json::to_string(&rep.aggregates).unwrap()
    );
    for a in &rep.aggregates {
        let rows: Vec<&TrialRow> = rep
            .rows
            .iter()
            .filter(|r| r.cell == a.cell && r.algorithm == a.algorithm)
            .collect();
        let tau = rows.iter().map(|r| r.max_tau_err).sum::<f64>() / rows.len() as f64;
        assert_eq!(tau, a.mean_tau_err);
        let succ = rows.iter().filter(|r| r.success).count() as f64 / rows.len() as f64;
        assert_eq!(succ, a.success_rate);
    }
}

#[test]
fn zero_features_is_trivial_success() {
    let cfg = small(
        ExperimentKind::PhaseTransition,
        r#", "feature_counts": [0], "l2_values": [15], "noise_db": [null], "algorithms": ["omp", "adcg"]"#,
    );
    let rep = run_experiment(&cfg).unwrap();
    assert!(!rep.rows.is_empty());
    for r in &rep.rows {
        assert_eq!(r.recovered, 0, "{r:?}");
        assert!(r.success, "{r:?}");
    }
}

#[test]
fn phase_transition_cells_cover_the_grid() {
    let cfg = small(
        ExperimentKind::PhaseTransition,
        r#", "feature_counts": [1, 2], "l2_values": [5, 15], "noise_db": [null], "algorithms": ["omp"], "trials": 1"#,
    );
    let rep = run_experiment(&cfg).unwrap();
    let mut cells: Vec<(usize, usize)> = rep.rows.iter().map(|r| (r.features, r.l2)).collect();
    cells.sort();
    assert_eq!(cells, vec![(1, 5), (1, 15), (2, 5), (2, 15)]);
}

#[test]
fn min_sep_channels_realise_the_separation() {
    let cfg = small(
        ExperimentKind::MinSep,
        r#", "separations": [0.05, 0.2], "noise_db": [null], "algorithms": ["omp"], "features": 3"#,
    );
    let rep = run_experiment(&cfg).unwrap();
    assert!(rep.rows.iter().all(|r| r.error.is_none()));
    assert_eq!(rep.rows.len(), 2 * 3);
}

#[test]
fn mismatch_reports_both_norms() {
    let cfg = small(ExperimentKind::ModelMismatch, r#", "noise_db": [null], "algorithms": ["omp"]"#);
    let rep = run_experiment(&cfg).unwrap();
    for r in &rep.rows {
        match r.model {
            ddsr::experiments::DataModel::Sinc => assert!(r.op_err_db_sinc.is_some()),
            ddsr::experiments::DataModel::Trig => assert!(r.op_err_db_sinc.is_none()),
        }
    }
}

#[test]
fn infeasible_separation_is_recorded_not_fatal() {
    let cfg = small(
        ExperimentKind::MinSep,
        r#", "separations": [0.9], "noise_db": [null], "algorithms": ["omp"], "features": 10, "trials": 1"#,
    );
    let rep = run_experiment(&cfg).unwrap();
    assert_eq!(rep.rows.len(), 1);
    assert!(rep.rows[0].error.is_some());
    assert_eq!(rep.aggregates[0].errors, 1);
}

#[test]
fn config_merges_over_kind_defaults() {
    let cfg = ExperimentConfig::from_json(r#"{"kind": "table1", "trials": 4, "solvers": {"adcg": {"inner_iters": 3}}}"#)
        .unwrap();
    let def = ExperimentConfig::defaults(ExperimentKind::Table1);
    assert_eq!(cfg.trials, 4);
    assert_eq!(cfg.solvers.adcg.inner_iters, 3);
    assert_eq!(cfg.solvers.adcg.grid, def.solvers.adcg.grid);
    assert_eq!(cfg.dims, def.dims);
    assert_eq!(cfg.solvers.lambda, LambdaRule::Fixed { value: 500.0 });
    let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn invalid_configs_are_rejected() {
    for bad in [
        r#"{"trials": 5}"#,
        r#"{"kind": "table1", "trials": 0}"#,
        r#"{"kind": "table1", "algorithms": []}"#,
        r#"{"kind": "table1", "bogus": 1}"#,
        r#"{"kind": "noise-sweep", "noise_db": []}"#,
        r#"{"kind": "min-sep", "separations": []}"#,
        r#"{"kind": "phase-transition", "l2_values": []}"#,
        r#"{"kind": "phase-transition", "l2_values": [10]}"#,
        r#"{"kind": "table1", "solvers": {"refine": {"shrink": 1.5}}}"#,
        r#"{"kind": "nope"}"#,
    ] {
        assert!(ExperimentConfig::from_json(bad).is_err(), "accepted {bad}");
    }
}

#[test]
fn on_grid_clean_channel_is_recovered_by_all() {
    let dims = ProblemDims::new(1.0, 15.0, 7, 7).unwrap();
    let grid = RegularGrid::covering(&dims, 30, 30);
    let truth = ChannelSpec::new(
        dims,
        vec![
            Feature::new(Complex64::new(1.0, 0.0), grid.tau(4), grid.nu(20)),
            Feature::new(Complex64::new(0.0, -1.0), grid.tau(22), grid.nu(7)),
        ],
    )
    .unwrap();
    let g = build_g(&random_identifier(&dims, 5));
    let y = forward_atoms(&truth, &g).unwrap();
    let mut settings = SolverSettings {
        omp_grid: (30, 30),
        lambda: LambdaRule::Fixed { value: 1e-8 },
        ..SolverSettings::default()
    };
    settings.refine.initial_grid = (30, 30);
    settings.adcg.grid = (30, 30);
    let plan = settings.plan(&y, 2, None);
    for alg in [Algorithm::Omp, Algorithm::Refine, Algorithm::Adcg] {
        let rec = recover(alg, &y, &g, &plan).unwrap();
        let m = evaluation::match_features(&truth, &rec.channel);
        assert_eq!(rec.channel.len(), 2, "{alg:?}");
        assert!(m.max_tau_err < 1e-4 && m.max_nu_err < 1e-4 && m.max_eta_err < 1e-4, "{alg:?} {m:?}");
    }
}

#[test]
fn reports_write_csv_and_json() {
    let cfg = small(ExperimentKind::NoiseSweep, r#", "noise_db": [-20.0], "algorithms": ["omp"]"#);
    let rep = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = rep.write(dir.path()).unwrap();
    assert_eq!(paths.len(), 3);
    let mut rdr = csv::Reader::from_path(&paths[0]).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert!(headers.iter().any(|h| h == "op_err_db"));
    assert!(headers.iter().any(|h| h == "wall_time_s"));
    assert_eq!(rdr.records().count(), 3);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths[2]).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn lambda_rules() {
    assert_eq!(LambdaRule::Fixed { value: 3.0 }.lambda(Some(-10.0), 7.0), 3.0);
    let prop = LambdaRule::NoiseProportional { factor: 100.0, floor: 1e-8 };
    assert!((prop.lambda(Some(-20.0), 7.0) - 1.0).abs() < 1e-12);
    assert!((prop.lambda(None, 7.0) - 1e-6).abs() < 1e-18);
    let scaled = LambdaRule::DataScaled { factor: 0.05, floor: 1e-8 };
    let a = scaled.lambda(Some(-10.0), 1.0);
    assert!((a - 0.005).abs() < 1e-15);
    assert!((scaled.lambda(Some(-10.0), 10.0) - 100.0 * a).abs() < 1e-12);
    let rule: LambdaRule = serde_json::from_str(r#"{"rule": "data-scaled", "factor": 0.05, "floor": 1e-8}"#).unwrap();
    assert_eq!(rule, scaled);
}
