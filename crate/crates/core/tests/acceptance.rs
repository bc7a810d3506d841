//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line and then
//! asserts on it, so `cargo test --test acceptance -- --nocapture` doubles as
//! a report.
//!
//! The studies (criteria 4 to 8) run at full size and take from minutes to
//! hours on one core, so they are ignored by default. Run them with
//! `cargo test --release --test acceptance -- --ignored --nocapture`.
//! The 10-trial `table1` smoke run always executes.

use std::time::{Duration, Instant};

use rand::Rng;

use ddsr::atoms::{atom, atom_jacobian};
use ddsr::continuous::location_objective_grad;
use ddsr::experiments::{run_experiment, AggregateRow, Algorithm, ExperimentConfig, ExperimentReport};
use ddsr::linalg::{adjoint_matvec, least_squares, CMatrix};
use ddsr::measurement::{build_g, forward_atoms, forward_direct};
use ddsr::model::{random_channel, random_identifier};
use ddsr::rng::seeded;
use ddsr::sparse::{lasso, omp, LassoOptions, OmpStop};
use ddsr::{atoms::RegularGrid, Complex64, ProblemDims};

fn verdict(id: &str, what: &str, pass: bool, detail: String) {
    println!("{} {id} {what}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{id} {what}: {detail}");
}

fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let n: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    (d / n).sqrt()
}

fn random_point(rng: &mut impl Rng, d: &ProblemDims) -> (f64, f64) {
    let (t0, t1) = d.tau_bounds();
    let (n0, n1) = d.nu_bounds();
    (rng.random_range(t0..=t1), rng.random_range(n0..=n1))
}

#[test]
fn c01_sampling_formula_is_exact() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let setups = [
        (ProblemDims::new(1.0, 101.0, 50, 50).unwrap(), 100),
        (ProblemDims::new(3.0, 31.0, 50, 50).unwrap(), 20),
    ];
    for (k, (d, count)) in setups.iter().enumerate() {
        for i in 0..*count {
            let seed = 1000 * k as u64 + i as u64;
            let h = random_channel(d, 1 + i % 10, seed);
            let w = random_identifier(d, seed + 77);
            let direct = forward_direct(&h, &w).unwrap();
            let exact = forward_atoms(&h, &build_g(&w)).unwrap();
            worst = worst.max(rel_err(direct.values(), exact.values()));
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "C1",
        "direct sampling equals atom formula",
        worst <= 1e-9 && elapsed < Duration::from_secs(30),
        format!("worst rel err {worst:.2e} (<= 1e-9), {:.1}s (< 30s)", elapsed.as_secs_f64()),
    );
}

#[test]
fn c02_atom_identities() {
    let mut rng = seeded(2);
    let dims = [
        ProblemDims::new(1.0, 101.0, 50, 50).unwrap(),
        ProblemDims::new(3.0, 31.0, 50, 50).unwrap(),
        ProblemDims::new(1.0, 15.0, 7, 7).unwrap(),
    ];
    let mut sum_err: f64 = 0.0;
    let mut grid_err: f64 = 0.0;
    for i in 0..1000 {
        let d = &dims[i % dims.len()];
        let (tau, nu) = random_point(&mut rng, d);
        let s: f64 = atom(d, tau, nu).entries().iter().sum();
        sum_err = sum_err.max((s - 1.0).abs());

        // tau = u0 / Omega, nu = v0 / T sit exactly on a sample of both kernels
        let (t0, t1) = d.tau_bounds();
        let (n0, n1) = d.nu_bounds();
        let u0 = rng.random_range((t0 * d.omega()).ceil() as i64..=(t1 * d.omega()).floor() as i64) as isize;
        let v0 = rng.random_range((n0 * d.t()).ceil() as i64..=(n1 * d.t()).floor() as i64) as isize;
        let a = atom(d, u0 as f64 / d.omega(), v0 as f64 / d.t());
        let hit = d.atom_index(u0, v0);
        for (j, &x) in a.entries().iter().enumerate() {
            let want = if j == hit { 1.0 } else { 0.0 };
            grid_err = grid_err.max((x - want).abs());
        }
    }
    verdict(
        "C2",
        "atom entries sum to one and on-grid atoms are indicators",
        sum_err <= 1e-10 && grid_err <= 1e-10,
        format!("sum err {sum_err:.2e}, indicator err {grid_err:.2e} (<= 1e-10, 1000 draws)"),
    );
}

#[test]
fn c03_gradients_match_finite_differences() {
    let mut rng = seeded(3);
    let d = ProblemDims::new(1.0, 31.0, 15, 15).unwrap();
    let h = 1e-6;
    let mut worst_obj: f64 = 0.0;
    let mut worst_jac: f64 = 0.0;
    for i in 0..50 {
        let g = build_g(&random_identifier(&d, 300 + i));
        let s = 1 + (i as usize % 4);
        let points: Vec<(f64, f64)> = (0..s).map(|_| random_point(&mut rng, &d)).collect();
        let eta: Vec<Complex64> = (0..s)
            .map(|_| Complex64::from_polar(rng.random_range(0.5..1.5), rng.random_range(0.0..6.3)))
            .collect();
        let truth = random_channel(&d, 3, 900 + i);
        let y = forward_atoms(&truth, &g).unwrap();
        let an = location_objective_grad(&eta, &points, &g, y.values());
        let scale = an
            .grad_tau
            .iter()
            .chain(&an.grad_nu)
            .fold(0.0f64, |m, x| m.max(x.abs()));
        for k in 0..s {
            for coord in 0..2 {
                let shifted = |delta: f64| {
                    let mut p = points.clone();
                    if coord == 0 {
                        p[k].0 += delta;
                    } else {
                        p[k].1 += delta;
                    }
                    location_objective_grad(&eta, &p, &g, y.values()).objective
                };
                let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                let a = if coord == 0 { an.grad_tau[k] } else { an.grad_nu[k] };
                worst_obj = worst_obj.max((fd - a).abs() / scale);
            }
        }

        let (tau, nu) = points[0];
        let j = atom_jacobian(&d, tau, nu);
        for (coord, an) in [(0, &j.d_tau), (1, &j.d_nu)] {
            let at = |delta: f64| {
                if coord == 0 {
                    atom(&d, tau + delta, nu)
                } else {
                    atom(&d, tau, nu + delta)
                }
            };
            let (p, m) = (at(h), at(-h));
            let fd: Vec<f64> = p
                .entries()
                .iter()
                .zip(m.entries())
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect();
            let num: f64 = fd.iter().zip(an.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let den: f64 = an.iter().map(|x| x * x).sum::<f64>().sqrt();
            worst_jac = worst_jac.max(num / den);
        }
    }
    verdict(
        "C3",
        "objective gradient and atom Jacobian match central differences",
        worst_obj <= 1e-5 && worst_jac <= 1e-5,
        format!("objective {worst_obj:.2e}, jacobian {worst_jac:.2e} (<= 1e-5 relative, 50 instances)"),
    );
}

#[test]
fn c09_solver_sanity() {
    let d = ProblemDims::new(1.0, 31.0, 15, 15).unwrap();
    let mut rng = seeded(9);
    let mut ls_err: f64 = 0.0;
    let mut above_zero = true;
    let mut monotone = true;
    for i in 0..10 {
        let g = build_g(&random_identifier(&d, 40 + i));
        let truth = random_channel(&d, 4, 50 + i);
        let y = forward_atoms(&truth, &g).unwrap();
        let pts: Vec<(f64, f64)> = (0..40).map(|_| random_point(&mut rng, &d)).collect();
        let set = ddsr::sparse::GridAtomSet::new(&g, pts);
        let a: &CMatrix = set.gz();

        let ls = least_squares(a, y.values());
        let sol = lasso(a, y.values(), 0.0, &LassoOptions::default());
        ls_err = ls_err.max(rel_err(&ls.x, &sol.eta));

        let lambda0 = 2.0 * adjoint_matvec(a, y.values()).iter().fold(0.0f64, |m, c| m.max(c.norm()));
        let big = lasso(a, y.values(), lambda0 * 1.001, &LassoOptions::default());
        above_zero &= big.eta.iter().all(|c| c.norm() == 0.0);

        let res = omp(&y, &g, &RegularGrid::covering(&d, 64, 64), &OmpStop { max_atoms: 8, residual_tol: 0.0 });
        monotone &= res.residual_norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    }
    verdict(
        "C9",
        "lasso(0) = least squares, lasso above threshold = 0, OMP residuals monotone",
        ls_err <= 1e-8 && above_zero && monotone,
        format!("least-squares gap {ls_err:.2e} (<= 1e-8), zero above threshold {above_zero}, monotone {monotone}"),
    );
}

fn rows_without_time(rep: &ExperimentReport) -> Vec<String> {
    let dir = tempfile::tempdir().unwrap();
    let paths = rep.write(dir.path()).unwrap();
    let mut rdr = csv::Reader::from_path(&paths[0]).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let time_col = headers.iter().position(|h| h == "wall_time_s").unwrap();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            r.iter()
                .enumerate()
                .filter(|(i, _)| *i != time_col)
                .map(|(_, f)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect()
}

#[test]
fn c10_reruns_are_identical() {
    let configs = [
        r#"{"kind": "table1", "trials": 2}"#,
        r#"{"kind": "phase-transition", "trials": 2, "feature_counts": [2], "l2_values": [9, 21]}"#,
        r#"{"kind": "model-mismatch", "trials": 1, "noise_db": [-30.0]}"#,
    ];
    let mut identical = true;
    let mut rows = 0;
    for c in configs {
        let cfg = ExperimentConfig::from_json(c).unwrap();
        let a = rows_without_time(&run_experiment(&cfg).unwrap());
        let b = rows_without_time(&run_experiment(&cfg).unwrap());
        rows += a.len();
        identical &= a == b;
    }
    verdict(
        "C10",
        "identical config and seed give identical CSV rows",
        identical,
        format!("{rows} rows compared across 3 studies"),
    );
}

fn study(json: &str) -> ExperimentReport {
    let cfg = ExperimentConfig::from_json(json).expect("valid study config");
    let rep = run_experiment(&cfg).expect("study runs");
    let failed = rep.rows.iter().filter(|r| r.error.is_some()).count();
    assert_eq!(failed, 0, "{failed} trials failed");
    rep
}

fn cells<'a>(rep: &'a ExperimentReport, alg: Algorithm) -> impl Iterator<Item = &'a AggregateRow> {
    rep.aggregates.iter().filter(move |a| a.algorithm == alg)
}

fn cell(rep: &ExperimentReport, alg: Algorithm, keep: impl Fn(&AggregateRow) -> bool) -> &AggregateRow {
    let mut hits = cells(rep, alg).filter(|a| keep(a));
    let a = hits.next().expect("cell present");
    assert!(hits.next().is_none(), "cell is ambiguous");
    a
}

fn db(x: Option<f64>) -> String {
    x.map_or("clean".into(), |v| format!("{v:.0} dB"))
}

/// Mean per-trial maximum errors at the `table1` setup and the reference
/// targets; accepted within a factor of two either way.
fn table1_ratios(rep: &ExperimentReport) -> (bool, String) {
    let targets: [(Algorithm, &str, f64); 7] = [
        (Algorithm::Omp, "tau", 4.778e-2),
        (Algorithm::Refine, "tau", 2.809e-2),
        (Algorithm::Refine, "nu", 9.476e-2),
        (Algorithm::Refine, "eta", 1.491e-1),
        (Algorithm::Adcg, "tau", 3.336e-2),
        (Algorithm::Adcg, "nu", 1.331e-1),
        (Algorithm::Adcg, "eta", 1.508e-1),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (alg, what, target) in targets {
        let a = cell(rep, alg, |_| true);
        let got = match what {
            "tau" => a.mean_tau_err,
            "nu" => a.mean_nu_err,
            _ => a.mean_eta_err,
        };
        let ratio = got / target;
        pass &= (0.5..=2.0).contains(&ratio);
        parts.push(format!("{alg:?} {what} {got:.3e} (x{ratio:.2})"));
    }
    (pass, parts.join(", "))
}

#[test]
fn c04_table1_smoke_runs_in_time() {
    let start = Instant::now();
    let rep = study(r#"{"kind": "table1", "trials": 10}"#);
    let elapsed = start.elapsed();
    let (_, detail) = table1_ratios(&rep);
    verdict(
        "C4-smoke",
        "10-trial table1 run finishes in time",
        elapsed < Duration::from_secs(600),
        format!("{:.0}s (< 600s); {detail}", elapsed.as_secs_f64()),
    );
}

#[test]
#[ignore = "50-trial study, about half an hour on one core"]
fn c04_table1_reproduction() {
    let rep = study(r#"{"kind": "table1", "trials": 50}"#);
    let (pass, detail) = table1_ratios(&rep);
    verdict("C4", "table1 errors within a factor of 2 of the targets", pass, detail);
}

#[test]
#[ignore = "10 trials at six noise levels, over an hour on one core"]
fn c05_noise_sweep_tracks_noise() {
    let rep = study(r#"{"kind": "noise-sweep", "trials": 10}"#);
    let mut pass = true;
    let mut parts = Vec::new();
    for alg in [Algorithm::Refine, Algorithm::Adcg] {
        for a in cells(&rep, alg) {
            let noise = a.noise_db.expect("noisy levels only");
            let ok = (a.mean_op_err_db - noise).abs() <= 5.0;
            pass &= ok;
            parts.push(format!("{alg:?}@{noise:.0}: {:.1}{}", a.mean_op_err_db, if ok { "" } else { "!" }));
        }
    }
    let omp = |n: f64| cell(&rep, Algorithm::Omp, |a| a.noise_db == Some(n)).mean_op_err_db;
    let plateau = omp(-60.0) >= omp(-30.0) - 5.0;
    pass &= plateau;
    parts.push(format!("Omp@-30 {:.1}, Omp@-60 {:.1}", omp(-30.0), omp(-60.0)));
    verdict(
        "C5",
        "refinement and ADCG within 5 dB of the noise; OMP plateaus",
        pass,
        parts.join(", "),
    );
}

#[test]
#[ignore = "20 trials per cell up to L2 = 101, hours on one core"]
fn c06_phase_transition() {
    let rep = study(r#"{"kind": "phase-transition", "trials": 20}"#);
    let mut pass = true;
    let mut parts = Vec::new();
    for a in cells(&rep, Algorithm::Adcg) {
        let (s, l2) = (a.features, a.l2);
        let ok = if l2 >= 10 * s {
            a.success_rate >= 0.9
        } else if l2 <= 2 * s {
            a.success_rate <= 0.1
        } else {
            true
        };
        pass &= ok;
        parts.push(format!("S{s}/L2 {l2}: {:.2}{}", a.success_rate, if ok { "" } else { "!" }));
    }
    verdict(
        "C6",
        "success >= 0.9 for L2 >= 10 S and <= 0.1 for L2 <= 2 S",
        pass,
        parts.join(", "),
    );
}

#[test]
#[ignore = "20 noiseless trials at two separations, tens of minutes on one core"]
fn c07_minimal_separation() {
    let rep = study(r#"{"kind": "min-sep", "trials": 20, "separations": [0.005, 0.02]}"#);
    let at = |d: f64| cell(&rep, Algorithm::Adcg, |a| a.separation == Some(d)).mean_op_err_db;
    let (close, apart) = (at(0.005), at(0.02));
    verdict(
        "C7",
        "separation 0.02 beats 0.005 by 20 dB",
        apart <= close - 20.0,
        format!("{close:.1} dB at 0.005, {apart:.1} dB at 0.02"),
    );
}

#[test]
#[ignore = "sinc and trigonometric data at six noise levels, about an hour on one core"]
fn c08_model_mismatch_floor() {
    use ddsr::experiments::DataModel;
    let rep = study(r#"{"kind": "model-mismatch", "trials": 10}"#);
    let mut parts = Vec::new();
    for a in cells(&rep, Algorithm::Adcg) {
        parts.push(format!("{:?}@{}: {:.1}", a.model, db(a.noise_db), a.mean_op_err_db));
    }
    let clean = |m: DataModel| cell(&rep, Algorithm::Adcg, |a| a.model == m && a.noise_db.is_none()).mean_op_err_db;
    let (sinc, trig) = (clean(DataModel::Sinc), clean(DataModel::Trig));
    verdict(
        "C8",
        "sinc data floors in [-30, -20] dB; trigonometric control below -40 dB",
        (-30.0..=-20.0).contains(&sinc) && trig < -40.0,
        parts.join(", "),
    );
}
