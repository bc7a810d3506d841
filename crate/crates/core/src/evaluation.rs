//! Error metrics: matched parameter errors and the restricted operator norm.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};

use crate::linalg::CMatrix;
use crate::measurement::sinc;
use crate::model::{ChannelSpec, Feature, ProblemDims};

/// Parameter errors under an optimal one-to-one matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedErrors {
    pub max_tau_err: f64,
    pub max_nu_err: f64,
    pub max_eta_err: f64,
    /// `(truth index, estimate index)` pairs.
    pub assignment: Vec<(usize, usize)>,
    pub unmatched_truth: usize,
    pub unmatched_estimate: usize,
    /// Sum of normalised distances over the assignment.
    pub total_cost: f64,
}

/// `x` reduced to `(-period/2, period/2]`.
fn wrap(x: f64, period: f64) -> f64 {
    x - period * (x / period).round()
}

/// Delay and Doppler differences, wrapped by the atom periods.
pub fn parameter_diff(dims: &ProblemDims, a: &Feature, b: &Feature) -> (f64, f64) {
    (
        wrap(a.tau - b.tau, dims.tau_period()).abs(),
        wrap(a.nu - b.nu, dims.nu_period()).abs(),
    )
}

/// `sqrt((dtau / T)^2 + (dnu / Omega)^2)` on wrapped differences.
pub fn normalized_distance(dims: &ProblemDims, a: &Feature, b: &Feature) -> f64 {
    let (dt, dn) = parameter_diff(dims, a, b);
    (dt / dims.t()).hypot(dn / dims.omega())
}

/// Minimum-cost assignment of rows to columns for `rows <= cols`.
///
/// Shortest augmenting paths with potentials, `O(rows^2 cols)`. Returns the
/// column assigned to every row.
pub fn hungarian(cost: &DMatrix<f64>) -> Vec<usize> {
    let (n, m) = cost.shape();
    assert!(n <= m, "hungarian: more rows than columns");
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = j - 1;
        }
    }
    out
}

/// Matches estimated to true features by minimum total normalised distance.
///
/// Errors are maxima over matched pairs; surplus features on either side are
/// only counted.
pub fn match_features(truth: &ChannelSpec, estimate: &ChannelSpec) -> MatchedErrors {
    let dims = truth.dims();
    let (t, e) = (truth.features(), estimate.features());
    let transpose = t.len() > e.len();
    let (rows, cols) = if transpose { (e, t) } else { (t, e) };
    let cost = DMatrix::from_fn(rows.len(), cols.len(), |i, j| normalized_distance(dims, &rows[i], &cols[j]));
    let assign = hungarian(&cost);

    let mut out = MatchedErrors {
        max_tau_err: 0.0,
        max_nu_err: 0.0,
        max_eta_err: 0.0,
        assignment: Vec::with_capacity(assign.len()),
        unmatched_truth: t.len().saturating_sub(e.len()),
        unmatched_estimate: e.len().saturating_sub(t.len()),
        total_cost: 0.0,
    };
    for (i, &j) in assign.iter().enumerate() {
        let (ti, ei) = if transpose { (j, i) } else { (i, j) };
        let (a, b) = (&t[ti], &e[ei]);
        let (dt, dn) = parameter_diff(dims, a, b);
        out.max_tau_err = out.max_tau_err.max(dt);
        out.max_nu_err = out.max_nu_err.max(dn);
        out.max_eta_err = out.max_eta_err.max((a.eta - b.eta).norm());
        out.total_cost += cost[(i, j)];
        out.assignment.push((ti, ei));
    }
    out.assignment.sort_unstable();
    out
}

/// Identifier space on which the channel operator is restricted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormBasis {
    /// Trigonometric polynomials of degree `N1`, period `L1 / Omega`.
    Trig,
    /// Partially periodic shifted sincs `sum_r sinc(x Omega - m - r L)`.
    Sinc { replicas: usize },
}

fn ser_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn de_db<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorNormReport {
    /// `||H_true - H_est||`
    pub abs_err: f64,
    /// `10 log10(abs_err / ||H_true||)`; `-inf` (JSON `null`) when `abs_err = 0`.
    #[serde(serialize_with = "ser_db", deserialize_with = "de_db")]
    pub rel_err_db: f64,
    pub reference_norm: f64,
    /// Midpoint-rule nodes on `[-T/2, T/2]`.
    pub points: usize,
    pub basis: NormBasis,
}

/// `sqrt(T/M) (H phi_k)(t_m)` for the basis functions `phi_k` and midpoints `t_m`.
pub fn operator_matrix(channel: &ChannelSpec, basis: NormBasis, points: usize) -> CMatrix {
    let dims = channel.dims();
    let t = dims.t();
    let weight = (t / points as f64).sqrt();
    let nodes: Vec<f64> = (0..points).map(|m| -0.5 * t + (m as f64 + 0.5) * t / points as f64).collect();
    match basis {
        NormBasis::Trig => {
            let l1 = dims.l1();
            let n1 = dims.n1() as f64;
            let rate = dims.omega() / l1 as f64;
            let mut a = CMatrix::zeros(points, l1);
            for f in channel.features() {
                for (m, &x) in nodes.iter().enumerate() {
                    let mut theta = rate * (x - f.tau);
                    theta -= theta.floor();
                    let z = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * theta);
                    let modulation = Complex64::from_polar(weight, 2.0 * std::f64::consts::PI * f.nu * x);
                    // z^k for k = -N1..=N1
                    let mut zk = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * theta * n1);
                    let c = f.eta * modulation;
                    for k in 0..l1 {
                        a[(m, k)] += c * zk;
                        zk *= z;
                    }
                }
            }
            a
        }
        NormBasis::Sinc { replicas } => {
            let l = dims.l1();
            let n = dims.n1() as isize;
            let r = replicas as isize;
            let mut a = CMatrix::zeros(points, l);
            for f in channel.features() {
                for (m, &x) in nodes.iter().enumerate() {
                    let c = f.eta * Complex64::from_polar(weight, 2.0 * std::f64::consts::PI * f.nu * x);
                    let arg = (x - f.tau) * dims.omega();
                    for k in 0..l {
                        let idx = k as isize - n;
                        let phi: f64 = (-r..=r)
                            .map(|rr| sinc(arg - (idx + rr * l as isize) as f64))
                            .sum();
                        a[(m, k)] += c * phi;
                    }
                }
            }
            a
        }
    }
}

fn spectral_norm(a: &CMatrix) -> f64 {
    if a.iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// Default number of midpoint-rule nodes, `8 L1`.
pub fn default_points(dims: &ProblemDims) -> usize {
    8 * dims.l1()
}

/// Operator norm of `H_true - H_est` restricted to the identifier space,
/// discretised by the midpoint rule and evaluated by SVD.
pub fn operator_norm_err(
    truth: &ChannelSpec,
    estimate: &ChannelSpec,
    basis: NormBasis,
    points: usize,
) -> OperatorNormReport {
    assert!(points >= truth.dims().l1(), "operator_norm_err: need at least L1 nodes");
    let at = operator_matrix(truth, basis, points);
    let ae = operator_matrix(estimate, basis, points);
    let abs_err = spectral_norm(&(&at - &ae));
    let reference_norm = spectral_norm(&at);
    OperatorNormReport {
        abs_err,
        rel_err_db: db(abs_err, reference_norm),
        reference_norm,
        points,
        basis,
    }
}

/// `10 log10(err / reference)`, `-inf` for zero error.
pub fn db(err: f64, reference: f64) -> f64 {
    if err == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (err / reference).log10()
    }
}

/// Success test against a dB threshold (inclusive).
pub fn classify_success(report: &OperatorNormReport, threshold_db: f64) -> bool {
    report.rel_err_db <= threshold_db
}

pub const SUCCESS_THRESHOLD_DB: f64 = -40.0;
