//! Seeded Monte Carlo studies: parameter errors at fixed noise, noise sweeps,
//! phase transitions in `(S, L2)`, minimal separation and identifier mismatch.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::atoms::RegularGrid;
use crate::continuous::{self, AdcgConfig, Recovery, RefinementConfig};
use crate::error::{Error, Result};
use crate::evaluation::{self, NormBasis, SUCCESS_THRESHOLD_DB};
use crate::measurement::{self, build_g, random_sinc_identifier};
use crate::model::{random_channel, random_channel_min_sep, random_identifier, ChannelSpec, ProblemDims, SeparationMetric};
use crate::rng::derive_seed;
use crate::sparse::{self, LassoOptions, OmpStop};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Table1,
    NoiseSweep,
    PhaseTransition,
    MinSep,
    ModelMismatch,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Table1 => "table1",
            ExperimentKind::NoiseSweep => "noise-sweep",
            ExperimentKind::PhaseTransition => "phase-transition",
            ExperimentKind::MinSep => "min-sep",
            ExperimentKind::ModelMismatch => "model-mismatch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Omp,
    Refine,
    Adcg,
}

/// How the data were generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataModel {
    Trig,
    Sinc,
}

/// Regularisation weight as a function of the noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum LambdaRule {
    Fixed { value: f64 },
    /// `factor * max(ratio, floor)` with `ratio = ||noise|| / ||y||`.
    NoiseProportional { factor: f64, floor: f64 },
    /// `factor * max(ratio, floor) * ||y||^2`. Rescaling `G` rescales the
    /// data-fit term by the same factor, so the weight follows the data.
    DataScaled { factor: f64, floor: f64 },
}

impl LambdaRule {
    pub fn lambda(&self, noise_db: Option<f64>, y_norm: f64) -> f64 {
        match *self {
            LambdaRule::Fixed { value } => value,
            LambdaRule::NoiseProportional { factor, floor } => factor * noise_ratio(noise_db).max(floor),
            LambdaRule::DataScaled { factor, floor } => factor * noise_ratio(noise_db).max(floor) * y_norm * y_norm,
        }
    }
}

/// `||noise|| / ||y||` for a level in dB; zero when noiseless.
pub fn noise_ratio(noise_db: Option<f64>) -> f64 {
    noise_db.map_or(0.0, |db| 10f64.powf(db / 10.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub omp_grid: (usize, usize),
    pub refine: RefinementConfig,
    pub adcg: AdcgConfig,
    pub lambda: LambdaRule,
    /// Stop every solver after exactly `S` features.
    pub sparsity_known: bool,
    /// Feature cap when the sparsity is not known.
    pub max_features: usize,
    /// Residual stop `||r|| <= discrepancy * ratio * ||y||` on noisy data.
    pub discrepancy: f64,
    /// Residual stop on noiseless data.
    pub clean_residual_tol: f64,
    /// When set, the refinement lasso tolerance drops to `factor * ratio`
    /// (ratio at least 1e-6) so the centers settle below the noise.
    pub refine_tol_per_noise: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            omp_grid: (1024, 1024),
            refine: RefinementConfig::default(),
            adcg: AdcgConfig::default(),
            lambda: LambdaRule::Fixed { value: 500.0 },
            sparsity_known: true,
            max_features: 30,
            discrepancy: 1.0,
            clean_residual_tol: 1e-8,
            refine_tol_per_noise: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub dims: ProblemDims,
    /// Number of features `S` (ignored by the phase transition).
    pub features: usize,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    /// Noise levels in dB; `null` is noiseless.
    pub noise_db: Vec<Option<f64>>,
    /// Phase transition axes.
    pub feature_counts: Vec<usize>,
    pub l2_values: Vec<usize>,
    pub separations: Vec<f64>,
    pub separation_metric: SeparationMetric,
    pub sinc_replicas: usize,
    /// Midpoint nodes for the operator norm; `null` is `8 L1`.
    pub norm_points: Option<usize>,
    pub solvers: SolverSettings,
}

impl ExperimentConfig {
    /// Defaults matching the published setups of each study.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let standard = ProblemDims::new(1.0, 101.0, 50, 50).expect("valid dims");
        let mut cfg = ExperimentConfig {
            kind,
            dims: standard,
            features: 10,
            trials: 50,
            seed: 2024,
            algorithms: vec![Algorithm::Omp, Algorithm::Refine, Algorithm::Adcg],
            noise_db: vec![Some(-10.0)],
            feature_counts: Vec::new(),
            l2_values: Vec::new(),
            separations: Vec::new(),
            separation_metric: SeparationMetric::Coordinatewise,
            sinc_replicas: 1,
            norm_points: None,
            solvers: SolverSettings::default(),
        };
        let sweep_solvers = SolverSettings {
            // 500 at -10 dB for the standard setup, where ||y||^2 is about 1e5
            lambda: LambdaRule::DataScaled { factor: 0.05, floor: 1e-8 },
            sparsity_known: false,
            refine: RefinementConfig {
                levels: 25,
                shrink: 2.0 / 3.0,
                lasso: LassoOptions {
                    tol: 1e-6,
                    max_iter: 20_000,
                },
                ..RefinementConfig::default()
            },
            refine_tol_per_noise: Some(1e-4),
            ..SolverSettings::default()
        };
        match kind {
            ExperimentKind::Table1 => {
                cfg.dims = ProblemDims::new(3.0, 31.0, 50, 50).expect("valid dims");
            }
            ExperimentKind::NoiseSweep => {
                cfg.noise_db = [-10.0, -20.0, -30.0, -40.0, -50.0, -60.0].map(Some).to_vec();
                cfg.solvers = sweep_solvers;
            }
            ExperimentKind::PhaseTransition => {
                cfg.algorithms = vec![Algorithm::Adcg];
                cfg.noise_db = vec![None];
                cfg.feature_counts = vec![2, 5, 10];
                cfg.l2_values = vec![3, 9, 19, 21, 51, 101];
                cfg.solvers = sweep_solvers;
            }
            ExperimentKind::MinSep => {
                cfg.algorithms = vec![Algorithm::Adcg];
                cfg.noise_db = vec![None];
                cfg.separations = vec![0.001, 0.0025, 0.005, 0.01, 0.02, 0.05, 0.1];
                cfg.solvers = sweep_solvers;
            }
            ExperimentKind::ModelMismatch => {
                cfg.algorithms = vec![Algorithm::Adcg];
                cfg.noise_db = vec![Some(-10.0), Some(-20.0), Some(-30.0), Some(-40.0), Some(-50.0), None];
                cfg.solvers = sweep_solvers;
            }
        }
        cfg
    }

    /// Parses a JSON config; fields not given fall back to the defaults of its `kind`.
    pub fn from_json(s: &str) -> Result<Self> {
        let user: serde_json::Value = serde_json::from_str(s)?;
        let kind = user
            .get("kind")
            .ok_or_else(|| Error::Config("experiment config needs a \"kind\"".into()))?;
        let kind: ExperimentKind = serde_json::from_value(kind.clone())?;
        let mut merged = serde_json::to_value(Self::defaults(kind))?;
        merge(&mut merged, user);
        let cfg: Self = serde_json::from_value(merged)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("{}: {m}", self.kind.name())));
        if self.trials == 0 {
            return fail("trials must be at least 1");
        }
        if self.algorithms.is_empty() {
            return fail("no algorithms selected");
        }
        if self.noise_db.is_empty() {
            return fail("noise level list is empty");
        }
        if self.noise_db.iter().flatten().any(|db| !db.is_finite()) {
            return fail("noise levels must be finite (use null for noiseless)");
        }
        match self.kind {
            ExperimentKind::PhaseTransition => {
                if self.feature_counts.is_empty() || self.l2_values.is_empty() {
                    return fail("feature_counts and l2_values must be nonempty");
                }
                for &l2 in &self.l2_values {
                    if l2 % 2 == 0 {
                        return fail("l2_values must be odd");
                    }
                }
            }
            ExperimentKind::MinSep if self.separations.is_empty() => {
                return fail("separations must be nonempty");
            }
            ExperimentKind::ModelMismatch => {
                measurement::SincIdentifier::new(self.dims, vec![1.0; self.dims.l1()], self.sinc_replicas)?;
            }
            _ => {}
        }
        self.solvers.refine.validate()?;
        self.solvers.adcg.validate()?;
        Ok(())
    }

    fn cells(&self) -> Result<Vec<Cell>> {
        let mut cells = Vec::new();
        let base = |noise_db| Cell {
            dims: self.dims,
            features: self.features,
            noise_db,
            separation: None,
            model: DataModel::Trig,
        };
        match self.kind {
            ExperimentKind::Table1 | ExperimentKind::NoiseSweep => {
                cells.extend(self.noise_db.iter().map(|&n| base(n)));
            }
            ExperimentKind::PhaseTransition => {
                for &s in &self.feature_counts {
                    for &l2 in &self.l2_values {
                        // Omega follows L2 so that L2 >= T * Omega keeps holding
                        let dims = ProblemDims::new(self.dims.t(), l2 as f64, self.dims.n1(), (l2 - 1) / 2)?;
                        for &n in &self.noise_db {
                            cells.push(Cell { dims, features: s, ..base(n) });
                        }
                    }
                }
            }
            ExperimentKind::MinSep => {
                for &sep in &self.separations {
                    for &n in &self.noise_db {
                        cells.push(Cell { separation: Some(sep), ..base(n) });
                    }
                }
            }
            ExperimentKind::ModelMismatch => {
                for model in [DataModel::Sinc, DataModel::Trig] {
                    for &n in &self.noise_db {
                        cells.push(Cell { model, ..base(n) });
                    }
                }
            }
        }
        Ok(cells)
    }
}

fn merge(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    dims: ProblemDims,
    features: usize,
    noise_db: Option<f64>,
    separation: Option<f64>,
    model: DataModel,
}

fn ser_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn ser_opt_db<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) if x.is_finite() => s.serialize_f64(*x),
        _ => s.serialize_none(),
    }
}

/// One solver run on one trial. Empty dB fields mean an exact (`-inf` dB) result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub noise_db: Option<f64>,
    pub features: usize,
    pub l2: usize,
    pub separation: Option<f64>,
    pub model: DataModel,
    pub lambda: f64,
    pub recovered: usize,
    pub max_tau_err: f64,
    pub max_nu_err: f64,
    pub max_eta_err: f64,
    pub unmatched_truth: usize,
    pub unmatched_estimate: usize,
    #[serde(serialize_with = "ser_db")]
    pub op_err_db: f64,
    #[serde(serialize_with = "ser_opt_db")]
    pub op_err_db_sinc: Option<f64>,
    pub success: bool,
    pub residual_norm: f64,
    pub stop: String,
    pub error: Option<String>,
    pub wall_time_s: f64,
}

/// Per `(cell, algorithm)` summary of the trial rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub cell: usize,
    pub algorithm: Algorithm,
    pub noise_db: Option<f64>,
    pub features: usize,
    pub l2: usize,
    pub separation: Option<f64>,
    pub model: DataModel,
    pub trials: usize,
    pub errors: usize,
    pub mean_tau_err: f64,
    pub mean_nu_err: f64,
    pub mean_eta_err: f64,
    /// Mean of the per-trial dB values, each floored at `DB_FLOOR`.
    pub mean_op_err_db: f64,
    /// dB of the mean error ratio.
    pub op_err_db_of_mean: f64,
    #[serde(serialize_with = "ser_opt_db")]
    pub mean_op_err_db_sinc: Option<f64>,
    pub success_rate: f64,
    pub mean_wall_time_s: f64,
}

/// Lower clamp applied to dB values before averaging.
pub const DB_FLOOR: f64 = -200.0;

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<AggregateRow>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Groups rows by `(cell, algorithm)` in first-appearance order.
pub fn aggregate(rows: &[TrialRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(usize, Algorithm)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.cell, r.algorithm)) {
            keys.push((r.cell, r.algorithm));
        }
    }
    keys.into_iter()
        .map(|(cell, algorithm)| {
            let all: Vec<&TrialRow> = rows.iter().filter(|r| r.cell == cell && r.algorithm == algorithm).collect();
            let ok: Vec<&TrialRow> = all.iter().copied().filter(|r| r.error.is_none()).collect();
            let first = all[0];
            let sinc: Vec<f64> = ok.iter().filter_map(|r| r.op_err_db_sinc).collect();
            AggregateRow {
                cell,
                algorithm,
                noise_db: first.noise_db,
                features: first.features,
                l2: first.l2,
                separation: first.separation,
                model: first.model,
                trials: all.len(),
                errors: all.len() - ok.len(),
                mean_tau_err: mean(ok.iter().map(|r| r.max_tau_err)),
                mean_nu_err: mean(ok.iter().map(|r| r.max_nu_err)),
                mean_eta_err: mean(ok.iter().map(|r| r.max_eta_err)),
                mean_op_err_db: mean(ok.iter().map(|r| r.op_err_db.max(DB_FLOOR))),
                op_err_db_of_mean: 10.0 * mean(ok.iter().map(|r| 10f64.powf(r.op_err_db / 10.0))).log10(),
                mean_op_err_db_sinc: if sinc.is_empty() {
                    None
                } else {
                    Some(mean(sinc.iter().map(|d| d.max(DB_FLOOR))))
                },
                success_rate: mean(all.iter().map(|r| if r.success { 1.0 } else { 0.0 })),
                mean_wall_time_s: mean(all.iter().map(|r| r.wall_time_s)),
            }
        })
        .collect()
}

impl ExperimentReport {
    pub fn aggregate_for(&self, algorithm: Algorithm) -> impl Iterator<Item = &AggregateRow> {
        self.aggregates.iter().filter(move |a| a.algorithm == algorithm)
    }

    /// Writes `<kind>_trials.csv`, `<kind>_summary.csv` and `<kind>_report.json`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let name = self.config.kind.name();
        let trials = dir.join(format!("{name}_trials.csv"));
        let summary = dir.join(format!("{name}_summary.csv"));
        let json = dir.join(format!("{name}_report.json"));
        write_csv(&trials, &self.rows)?;
        write_csv(&summary, &self.aggregates)?;
        std::fs::write(&json, serde_json::to_string_pretty(self)?)?;
        Ok(vec![trials, summary, json])
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Seeds of one trial: channel, identifier and noise streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub trial: u64,
    pub channel: u64,
    pub identifier: u64,
    pub noise: u64,
}

impl TrialSeeds {
    pub fn new(master: u64, trial: usize) -> Self {
        let t = derive_seed(master, trial as u64);
        TrialSeeds {
            trial: t,
            channel: derive_seed(t, 0),
            identifier: derive_seed(t, 1),
            noise: derive_seed(t, 2),
        }
    }
}

/// Solver configs for one run, given the data's noise level and sparsity.
#[derive(Debug, Clone)]
pub struct SolverPlan {
    pub lambda: f64,
    pub omp_grid: RegularGrid,
    pub omp: OmpStop,
    pub refine: RefinementConfig,
    pub adcg: AdcgConfig,
}

impl SolverSettings {
    /// Solver configurations for the data `y`.
    pub fn plan(&self, y: &crate::model::SampleVector, features: usize, noise_db: Option<f64>) -> SolverPlan {
        let dims = y.dims();
        let lambda = self.lambda.lambda(noise_db, y.norm());
        let (max_features, residual_tol, stagnation_tol) = if self.sparsity_known {
            (features, 0.0, 0.0)
        } else if noise_db.is_some() {
            (self.max_features, self.discrepancy * noise_ratio(noise_db), self.adcg.stagnation_tol)
        } else {
            (self.max_features, self.clean_residual_tol, self.adcg.stagnation_tol)
        };
        let omp = OmpStop {
            max_atoms: max_features,
            residual_tol,
        };
        let mut refine_lasso = self.refine.lasso;
        if let Some(factor) = self.refine_tol_per_noise {
            refine_lasso.tol = refine_lasso.tol.min(factor * noise_ratio(noise_db).max(1e-6));
        }
        SolverPlan {
            lambda,
            omp_grid: RegularGrid::covering(dims, self.omp_grid.0, self.omp_grid.1),
            omp,
            refine: RefinementConfig {
                initial_atoms: omp,
                lambda,
                max_centers: self.sparsity_known.then_some(features),
                lasso: refine_lasso,
                ..self.refine
            },
            adcg: AdcgConfig {
                lambda,
                max_features,
                residual_tol,
                stagnation_tol,
                max_outer: self.adcg.max_outer.max(2 * max_features),
                ..self.adcg
            },
        }
    }
}

/// Runs one algorithm on the data `y` under `plan`.
pub fn recover(
    algorithm: Algorithm,
    y: &crate::model::SampleVector,
    g: &measurement::MeasurementOperator,
    plan: &SolverPlan,
) -> Result<Recovery> {
    match algorithm {
        Algorithm::Omp => Ok(sparse::omp(y, g, &plan.omp_grid, &plan.omp).into()),
        Algorithm::Refine => continuous::refine(y, g, &plan.refine),
        Algorithm::Adcg => continuous::adcg(y, g, &plan.adcg),
    }
}

fn run_trial(cfg: &ExperimentConfig, cell_index: usize, cell: &Cell, trial: usize) -> Vec<TrialRow> {
    let seeds = TrialSeeds::new(cfg.seed, trial);
    let dims = cell.dims;
    let blank = |algorithm| TrialRow {
        cell: cell_index,
        trial,
        seed: seeds.trial,
        algorithm,
        noise_db: cell.noise_db,
        features: cell.features,
        l2: dims.l2(),
        separation: cell.separation,
        model: cell.model,
        lambda: f64::NAN,
        recovered: 0,
        max_tau_err: f64::NAN,
        max_nu_err: f64::NAN,
        max_eta_err: f64::NAN,
        unmatched_truth: 0,
        unmatched_estimate: 0,
        op_err_db: f64::NAN,
        op_err_db_sinc: None,
        success: false,
        residual_norm: f64::NAN,
        stop: String::new(),
        error: None,
        wall_time_s: 0.0,
    };
    let fail = |e: Error| -> Vec<TrialRow> {
        cfg.algorithms
            .iter()
            .map(|&a| TrialRow {
                error: Some(e.to_string()),
                ..blank(a)
            })
            .collect()
    };

    let truth = match cell.separation {
        Some(delta) => match random_channel_min_sep(&dims, cell.features, delta, cfg.separation_metric, seeds.channel) {
            Ok(c) => c,
            Err(e) => return fail(e),
        },
        None => random_channel(&dims, cell.features, seeds.channel),
    };

    let (clean, g) = match cell.model {
        DataModel::Trig => {
            let w = random_identifier(&dims, seeds.identifier);
            let g = build_g(&w);
            (measurement::forward_atoms(&truth, &g), g)
        }
        DataModel::Sinc => {
            let s = match random_sinc_identifier(&dims, cfg.sinc_replicas, seeds.identifier) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            (measurement::forward_sinc(&truth, &s), build_g(&s.matched_trig()))
        }
    };
    let y = match clean.and_then(|c| measurement::add_noise(&c, cell.noise_db.unwrap_or(f64::NEG_INFINITY), seeds.noise)) {
        Ok(y) => y,
        Err(e) => return fail(e),
    };
    let points = cfg.norm_points.unwrap_or_else(|| evaluation::default_points(&dims));
    let plan = cfg.solvers.plan(&y, cell.features, cell.noise_db);

    cfg.algorithms
        .iter()
        .map(|&algorithm| {
            let start = Instant::now();
            let rec = recover(algorithm, &y, &g, &plan);
            let wall = start.elapsed().as_secs_f64();
            let rec = match rec {
                Ok(r) => r,
                Err(e) => {
                    return TrialRow {
                        lambda: plan.lambda,
                        error: Some(e.to_string()),
                        wall_time_s: wall,
                        ..blank(algorithm)
                    }
                }
            };
            let m = evaluation::match_features(&truth, &rec.channel);
            let op = evaluation::operator_norm_err(&truth, &rec.channel, NormBasis::Trig, points);
            let op_sinc = (cell.model == DataModel::Sinc).then(|| {
                evaluation::operator_norm_err(
                    &truth,
                    &rec.channel,
                    NormBasis::Sinc { replicas: cfg.sinc_replicas },
                    points,
                )
                .rel_err_db
            });
            TrialRow {
                lambda: plan.lambda,
                recovered: rec.channel.len(),
                max_tau_err: m.max_tau_err,
                max_nu_err: m.max_nu_err,
                max_eta_err: m.max_eta_err,
                unmatched_truth: m.unmatched_truth,
                unmatched_estimate: m.unmatched_estimate,
                op_err_db: op.rel_err_db,
                op_err_db_sinc: op_sinc,
                success: evaluation::classify_success(&op, SUCCESS_THRESHOLD_DB),
                residual_norm: rec.residual_norm,
                stop: serde_json::to_value(rec.stop)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default(),
                wall_time_s: wall,
                ..blank(algorithm)
            }
        })
        .collect()
}

/// Runs a study. `progress` is called with `(done, total)` after each trial.
pub fn run_experiment_with(cfg: &ExperimentConfig, progress: &(dyn Fn(usize, usize) + Sync)) -> Result<ExperimentReport> {
    cfg.validate()?;
    let cells = cfg.cells()?;
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let total = jobs.len();
    let rows: Vec<TrialRow> = jobs
        .par_iter()
        .map(|&(c, t)| {
            let rows = run_trial(cfg, c, &cells[c], t);
            let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            progress(n, total);
            rows
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let aggregates = aggregate(&rows);
    Ok(ExperimentReport {
        config: cfg.clone(),
        rows,
        aggregates,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(cfg, &|_, _| {})
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.kind == kind {
        Ok(())
    } else {
        Err(Error::Config(format!("expected a {} config, got {}", kind.name(), cfg.kind.name())))
    }
}

pub fn run_table1(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(cfg, ExperimentKind::Table1)?;
    run_experiment(cfg)
}

pub fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(cfg, ExperimentKind::NoiseSweep)?;
    run_experiment(cfg)
}

pub fn run_phase_transition(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(cfg, ExperimentKind::PhaseTransition)?;
    run_experiment(cfg)
}

pub fn run_min_sep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(cfg, ExperimentKind::MinSep)?;
    run_experiment(cfg)
}

pub fn run_model_mismatch(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(cfg, ExperimentKind::ModelMismatch)?;
    run_experiment(cfg)
}

/// A channel drawn the way trial `trial` of `cfg` draws it (first cell).
pub fn trial_channel(cfg: &ExperimentConfig, trial: usize) -> Result<ChannelSpec> {
    let seeds = TrialSeeds::new(cfg.seed, trial);
    let cell = cfg.cells()?[0];
    match cell.separation {
        Some(d) => random_channel_min_sep(&cell.dims, cell.features, d, cfg.separation_metric, seeds.channel),
        None => Ok(random_channel(&cell.dims, cell.features, seeds.channel)),
    }
}
