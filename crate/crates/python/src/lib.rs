//! Python bindings. Channels, identifiers and samples cross the boundary as
//! the same JSON documents the command-line tool reads and writes.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ddsr::evaluation::{self, NormBasis};
use ddsr::experiments::{self, Algorithm, ExperimentConfig, SolverSettings, TrialSeeds};
use ddsr::measurement::{self, build_g};
use ddsr::model::{random_channel, random_identifier};
use ddsr::{atoms, ChannelSpec, IdentifierPoly, ProblemDims, SampleVector};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dims(t: f64, omega: f64, n1: usize, n2: usize) -> PyResult<ProblemDims> {
    ProblemDims::new(t, omega, n1, n2).map_err(err)
}

/// Dirichlet kernel `D_N(x) = sin((2N+1) pi x) / sin(pi x)`.
#[pyfunction]
fn dirichlet(n: usize, x: f64) -> f64 {
    atoms::dirichlet(n, x)
}

/// Entries of the atom `a(tau, nu)`, `u` running fastest.
#[pyfunction]
fn atom(t: f64, omega: f64, n1: usize, n2: usize, tau: f64, nu: f64) -> PyResult<Vec<f64>> {
    let d = dims(t, omega, n1, n2)?;
    Ok(atoms::atom(&d, tau, nu).entries().to_vec())
}

/// Draws a channel and identifier and samples them.
///
/// Returns `(channel_json, identifier_json, samples_json)`.
#[pyfunction]
#[pyo3(signature = (t, omega, n1, n2, features, noise_db=None, seed=0))]
fn simulate(
    t: f64,
    omega: f64,
    n1: usize,
    n2: usize,
    features: usize,
    noise_db: Option<f64>,
    seed: u64,
) -> PyResult<(String, String, String)> {
    let d = dims(t, omega, n1, n2)?;
    let seeds = TrialSeeds::new(seed, 0);
    let truth = random_channel(&d, features, seeds.channel);
    let w = random_identifier(&d, seeds.identifier);
    let clean = measurement::forward_atoms(&truth, &build_g(&w)).map_err(err)?;
    let y = measurement::add_noise(&clean, noise_db.unwrap_or(f64::NEG_INFINITY), seeds.noise).map_err(err)?;
    Ok((
        truth.to_json().map_err(err)?,
        w.to_json().map_err(err)?,
        y.to_json().map_err(err)?,
    ))
}

/// Samples `H w` directly from the operator definition.
#[pyfunction]
fn forward(channel_json: &str, identifier_json: &str) -> PyResult<String> {
    let h = ChannelSpec::from_json(channel_json).map_err(err)?;
    let w = IdentifierPoly::from_json(identifier_json).map_err(err)?;
    measurement::forward_direct(&h, &w).and_then(|y| y.to_json()).map_err(err)
}

/// Estimates a channel with `alg` in `{"omp", "refine", "adcg"}`.
///
/// `settings_json` overrides solver settings; `features` fixes the sparsity.
/// Returns the estimated channel as JSON.
#[pyfunction]
#[pyo3(signature = (alg, samples_json, identifier_json, features=None, noise_db=None, settings_json=None))]
fn recover(
    py: Python<'_>,
    alg: &str,
    samples_json: &str,
    identifier_json: &str,
    features: Option<usize>,
    noise_db: Option<f64>,
    settings_json: Option<&str>,
) -> PyResult<String> {
    let algorithm: Algorithm = serde_json::from_value(serde_json::Value::String(alg.into()))
        .map_err(|_| err(format!("unknown algorithm {alg:?}")))?;
    let y = SampleVector::from_json(samples_json).map_err(err)?;
    let w = IdentifierPoly::from_json(identifier_json).map_err(err)?;
    let mut settings: SolverSettings = match settings_json {
        Some(s) => serde_json::from_str(s).map_err(err)?,
        None => SolverSettings::default(),
    };
    settings.sparsity_known = features.is_some();
    settings.refine.validate().map_err(err)?;
    settings.adcg.validate().map_err(err)?;
    let plan = settings.plan(&y, features.unwrap_or(0), noise_db);
    let rec = py
        .allow_threads(|| experiments::recover(algorithm, &y, &build_g(&w), &plan))
        .map_err(err)?;
    rec.channel.to_json().map_err(err)
}

/// Matching errors and operator-norm error of `estimate` against `truth`, as JSON.
#[pyfunction]
#[pyo3(signature = (truth_json, estimate_json, sinc_replicas=None))]
fn evaluate(truth_json: &str, estimate_json: &str, sinc_replicas: Option<usize>) -> PyResult<String> {
    let truth = ChannelSpec::from_json(truth_json).map_err(err)?;
    let est = ChannelSpec::from_json(estimate_json).map_err(err)?;
    if truth.dims() != est.dims() {
        return Err(err("channels have different dimensions"));
    }
    let basis = match sinc_replicas {
        None => NormBasis::Trig,
        Some(0) => return Err(err("sinc_replicas must be at least 1")),
        Some(replicas) => NormBasis::Sinc { replicas },
    };
    let op = evaluation::operator_norm_err(&truth, &est, basis, evaluation::default_points(truth.dims()));
    let out = serde_json::json!({
        "matching": evaluation::match_features(&truth, &est),
        "operator_norm": op,
        "success": evaluation::classify_success(&op, evaluation::SUCCESS_THRESHOLD_DB),
    });
    Ok(out.to_string())
}

/// Runs a study from a JSON config and returns the report as JSON.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(err)?;
    let report = py.allow_threads(|| experiments::run_experiment(&cfg)).map_err(err)?;
    serde_json::to_string(&report).map_err(err)
}

#[pymodule]
fn ddsr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(dirichlet, m)?)?;
    m.add_function(wrap_pyfunction!(atom, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(forward, m)?)?;
    m.add_function(wrap_pyfunction!(recover, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
