//! Problem dimensions, channels, identifiers and sample vectors.
//!
//! Symmetric indices `-N..=N` are stored at offset `idx + N` throughout.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Observation window `T`, bandwidth `Omega` and the two trigonometric degrees.
///
/// `L1 = 2*N1 + 1` is the identifier length, `L2 = 2*N2 + 1` the number of
/// samples. Both must be at least `T * Omega` so that every evaluation point
/// of the identifier lies in `(-T, T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDims", into = "RawDims")]
pub struct ProblemDims {
    t: f64,
    omega: f64,
    n1: usize,
    n2: usize,
}

#[derive(Serialize, Deserialize)]
struct RawDims {
    #[serde(rename = "T")]
    t: f64,
    #[serde(rename = "Omega")]
    omega: f64,
    #[serde(rename = "N1")]
    n1: usize,
    #[serde(rename = "N2")]
    n2: usize,
}

impl TryFrom<RawDims> for ProblemDims {
    type Error = Error;
    fn try_from(r: RawDims) -> Result<Self> {
        ProblemDims::new(r.t, r.omega, r.n1, r.n2)
    }
}

impl From<ProblemDims> for RawDims {
    fn from(d: ProblemDims) -> Self {
        RawDims {
            t: d.t,
            omega: d.omega,
            n1: d.n1,
            n2: d.n2,
        }
    }
}

impl ProblemDims {
    pub fn new(t: f64, omega: f64, n1: usize, n2: usize) -> Result<Self> {
        let dims = ProblemDims { t, omega, n1, n2 };
        dims.validate()?;
        Ok(dims)
    }

    /// Checks `T > 0`, `Omega > 0`, `L1 >= T*Omega` and `L2 >= T*Omega`.
    pub fn validate(&self) -> Result<()> {
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(Error::Dimension(format!("T = {} must be positive", self.t)));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::Dimension(format!(
                "Omega = {} must be positive",
                self.omega
            )));
        }
        let tw = self.t * self.omega;
        if (self.l1() as f64) < tw {
            return Err(Error::Dimension(format!(
                "L1 = {} < T*Omega = {}",
                self.l1(),
                tw
            )));
        }
        if (self.l2() as f64) < tw {
            return Err(Error::Dimension(format!(
                "L2 = {} < T*Omega = {}",
                self.l2(),
                tw
            )));
        }
        Ok(())
    }

    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }
    pub fn l1(&self) -> usize {
        2 * self.n1 + 1
    }
    pub fn l2(&self) -> usize {
        2 * self.n2 + 1
    }

    /// Length of an atom vector, `L1 * L2`.
    pub fn atom_len(&self) -> usize {
        self.l1() * self.l2()
    }

    /// Storage index of `(u, v)`; `u` runs fastest.
    pub fn atom_index(&self, u: isize, v: isize) -> usize {
        let l1 = self.l1() as isize;
        ((v + self.n2 as isize) * l1 + u + self.n1 as isize) as usize
    }

    /// Sample position `x_j = T j / L2`.
    pub fn sample_point(&self, j: isize) -> f64 {
        self.t * j as f64 / self.l2() as f64
    }

    pub fn sample_points(&self) -> Vec<f64> {
        let n2 = self.n2 as isize;
        (-n2..=n2).map(|j| self.sample_point(j)).collect()
    }

    pub fn tau_bounds(&self) -> (f64, f64) {
        (-0.5 * self.t, 0.5 * self.t)
    }

    pub fn nu_bounds(&self) -> (f64, f64) {
        (-0.5 * self.omega, 0.5 * self.omega)
    }

    pub fn contains(&self, tau: f64, nu: f64) -> bool {
        let (t0, t1) = self.tau_bounds();
        let (v0, v1) = self.nu_bounds();
        tau >= t0 && tau <= t1 && nu >= v0 && nu <= v1
    }

    /// Projects `(tau, nu)` onto the parameter domain.
    pub fn clamp(&self, tau: f64, nu: f64) -> (f64, f64) {
        let (t0, t1) = self.tau_bounds();
        let (v0, v1) = self.nu_bounds();
        (tau.clamp(t0, t1), nu.clamp(v0, v1))
    }

    /// Period of the atoms in `tau` (`L1 / Omega`).
    pub fn tau_period(&self) -> f64 {
        self.l1() as f64 / self.omega
    }

    /// Period of the atoms in `nu` (`L2 / T`).
    pub fn nu_period(&self) -> f64 {
        self.l2() as f64 / self.t
    }
}

/// One translation-modulation term `eta * M_nu T_tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    #[serde(with = "crate::serde_complex")]
    pub eta: Complex64,
    pub tau: f64,
    pub nu: f64,
}

impl Feature {
    pub fn new(eta: Complex64, tau: f64, nu: f64) -> Self {
        Feature { eta, tau, nu }
    }
}

/// A sparse doubly-dispersive channel `H = sum_s eta_s M_{nu_s} T_{tau_s}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannel")]
pub struct ChannelSpec {
    dims: ProblemDims,
    features: Vec<Feature>,
}

#[derive(Deserialize)]
struct RawChannel {
    dims: ProblemDims,
    features: Vec<Feature>,
}

impl TryFrom<RawChannel> for ChannelSpec {
    type Error = Error;
    fn try_from(r: RawChannel) -> Result<Self> {
        ChannelSpec::new(r.dims, r.features)
    }
}

impl ChannelSpec {
    pub fn new(dims: ProblemDims, features: Vec<Feature>) -> Result<Self> {
        for (i, f) in features.iter().enumerate() {
            if !(f.eta.re.is_finite() && f.eta.im.is_finite()) {
                return Err(Error::OutOfDomain(format!("feature {i}: amplitude not finite")));
            }
            if !dims.contains(f.tau, f.nu) {
                return Err(Error::OutOfDomain(format!(
                    "feature {i}: (tau, nu) = ({}, {}) outside [-T/2, T/2] x [-Omega/2, Omega/2]",
                    f.tau, f.nu
                )));
            }
        }
        Ok(ChannelSpec { dims, features })
    }

    pub fn empty(dims: ProblemDims) -> Self {
        ChannelSpec {
            dims,
            features: Vec::new(),
        }
    }

    pub fn dims(&self) -> &ProblemDims {
        &self.dims
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Same locations, every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Self {
        ChannelSpec {
            dims: self.dims,
            features: self
                .features
                .iter()
                .map(|f| Feature::new(f.eta * factor, f.tau, f.nu))
                .collect(),
        }
    }

    /// Union of the features of two channels on the same dimensions.
    pub fn concat(&self, other: &ChannelSpec) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::Dimension("channels have different dimensions".into()));
        }
        let mut features = self.features.clone();
        features.extend_from_slice(&other.features);
        Ok(ChannelSpec {
            dims: self.dims,
            features,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// How pairwise distances between features are measured when imposing a
/// minimal separation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationMetric {
    /// `min(|dtau|/T, |dnu|/Omega)`: features must be apart in both coordinates.
    #[default]
    Coordinatewise,
    /// `max(|dtau|/T, |dnu|/Omega)`: features must be apart in at least one.
    Chebyshev,
}

impl SeparationMetric {
    pub fn distance(self, dims: &ProblemDims, a: &Feature, b: &Feature) -> f64 {
        let dt = (a.tau - b.tau).abs() / dims.t();
        let dn = (a.nu - b.nu).abs() / dims.omega();
        match self {
            SeparationMetric::Coordinatewise => dt.min(dn),
            SeparationMetric::Chebyshev => dt.max(dn),
        }
    }
}

/// Smallest pairwise separation of a feature set (`+inf` for fewer than two).
pub fn min_separation(dims: &ProblemDims, features: &[Feature], metric: SeparationMetric) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..features.len() {
        for j in i + 1..features.len() {
            best = best.min(metric.distance(dims, &features[i], &features[j]));
        }
    }
    best
}

fn unit_phasor<R: Rng>(rng: &mut R) -> Complex64 {
    let phi: f64 = rng.random();
    Complex64::from_polar(1.0, 2.0 * PI * phi)
}

fn uniform_location<R: Rng>(dims: &ProblemDims, rng: &mut R) -> (f64, f64) {
    let (t0, t1) = dims.tau_bounds();
    let (v0, v1) = dims.nu_bounds();
    (rng.random_range(t0..=t1), rng.random_range(v0..=v1))
}

/// `count` features with uniform `(tau, nu)` on the domain and unimodular amplitudes.
pub fn random_channel(dims: &ProblemDims, count: usize, seed: u64) -> ChannelSpec {
    let mut rng = seeded(seed);
    let features = (0..count)
        .map(|_| {
            let (tau, nu) = uniform_location(dims, &mut rng);
            Feature::new(unit_phasor(&mut rng), tau, nu)
        })
        .collect();
    ChannelSpec {
        dims: *dims,
        features,
    }
}

const MIN_SEP_RESTARTS: usize = 2000;
const MIN_SEP_DRAWS: usize = 2000;

/// Random channel whose minimal pairwise separation equals `delta`.
///
/// Locations are drawn sequentially with rejection, then the closest pair is
/// moved so that its separation is exactly `delta`.
pub fn random_channel_min_sep(
    dims: &ProblemDims,
    count: usize,
    delta: f64,
    metric: SeparationMetric,
    seed: u64,
) -> Result<ChannelSpec> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::Config(format!("separation {delta} must be non-negative")));
    }
    let mut rng = seeded(seed);
    if count <= 1 {
        let features = (0..count)
            .map(|_| {
                let (tau, nu) = uniform_location(dims, &mut rng);
                Feature::new(unit_phasor(&mut rng), tau, nu)
            })
            .collect();
        return Ok(ChannelSpec {
            dims: *dims,
            features,
        });
    }

    'restart: for _ in 0..MIN_SEP_RESTARTS {
        let mut features: Vec<Feature> = Vec::with_capacity(count);
        while features.len() < count {
            let mut placed = false;
            for _ in 0..MIN_SEP_DRAWS {
                let (tau, nu) = uniform_location(dims, &mut rng);
                let cand = Feature::new(Complex64::new(0.0, 0.0), tau, nu);
                if features
                    .iter()
                    .all(|f| metric.distance(dims, f, &cand) >= delta)
                {
                    features.push(cand);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'restart;
            }
        }

        let (mut bi, mut bj, mut best) = (0, 1, f64::INFINITY);
        for i in 0..count {
            for j in i + 1..count {
                let d = metric.distance(dims, &features[i], &features[j]);
                if d < best {
                    (bi, bj, best) = (i, j, d);
                }
            }
        }
        let anchor = features[bi];
        let moved = &mut features[bj];
        match metric {
            SeparationMetric::Coordinatewise => {
                let dt = (moved.tau - anchor.tau).abs() / dims.t();
                let dn = (moved.nu - anchor.nu).abs() / dims.omega();
                if dt <= dn {
                    let sign = if moved.tau >= anchor.tau { 1.0 } else { -1.0 };
                    moved.tau = anchor.tau + sign * delta * dims.t();
                } else {
                    let sign = if moved.nu >= anchor.nu { 1.0 } else { -1.0 };
                    moved.nu = anchor.nu + sign * delta * dims.omega();
                }
            }
            SeparationMetric::Chebyshev => {
                let dt = (moved.tau - anchor.tau) / dims.t();
                let dn = (moved.nu - anchor.nu) / dims.omega();
                let factor = delta / best;
                if dt.abs() >= dn.abs() {
                    moved.tau = anchor.tau + dt.signum() * delta * dims.t();
                    moved.nu = anchor.nu + dn * factor * dims.omega();
                } else {
                    moved.nu = anchor.nu + dn.signum() * delta * dims.omega();
                    moved.tau = anchor.tau + dt * factor * dims.t();
                }
            }
        }
        if !dims.contains(moved.tau, moved.nu) {
            continue;
        }
        let realised = min_separation(dims, &features, metric);
        if (realised - delta).abs() > 1e-12 {
            continue;
        }
        for f in &mut features {
            f.eta = unit_phasor(&mut rng);
        }
        return Ok(ChannelSpec {
            dims: *dims,
            features,
        });
    }
    Err(Error::InfeasibleSeparation {
        delta,
        count,
        attempts: MIN_SEP_RESTARTS,
    })
}

/// Trigonometric identifier `w(x) = sum_k w_k exp(2 pi i Omega k x / L1)`, `k = -N1..=N1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIdentifier")]
pub struct IdentifierPoly {
    dims: ProblemDims,
    #[serde(with = "crate::serde_complex::vec")]
    coeffs: Vec<Complex64>,
}

#[derive(Deserialize)]
struct RawIdentifier {
    dims: ProblemDims,
    #[serde(with = "crate::serde_complex::vec")]
    coeffs: Vec<Complex64>,
}

impl TryFrom<RawIdentifier> for IdentifierPoly {
    type Error = Error;
    fn try_from(r: RawIdentifier) -> Result<Self> {
        IdentifierPoly::new(r.dims, r.coeffs)
    }
}

impl IdentifierPoly {
    pub fn new(dims: ProblemDims, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != dims.l1() {
            return Err(Error::LengthMismatch {
                what: "identifier coefficients",
                expected: dims.l1(),
                got: coeffs.len(),
            });
        }
        Ok(IdentifierPoly { dims, coeffs })
    }

    /// `w == 1`.
    pub fn constant(dims: &ProblemDims) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); dims.l1()];
        coeffs[dims.n1()] = Complex64::new(1.0, 0.0);
        IdentifierPoly {
            dims: *dims,
            coeffs,
        }
    }

    pub fn dims(&self) -> &ProblemDims {
        &self.dims
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient `w_k` for `k` in `-N1..=N1`.
    pub fn coeff(&self, k: isize) -> Complex64 {
        self.coeffs[(k + self.dims.n1() as isize) as usize]
    }

    pub fn period(&self) -> f64 {
        self.dims.l1() as f64 / self.dims.omega()
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let theta = self.dims.omega() * x / self.dims.l1() as f64;
        // w only depends on theta mod 1; reducing first keeps the phase accurate.
        let theta = theta - theta.round();
        let z = Complex64::from_polar(1.0, 2.0 * PI * theta);
        let n1 = self.dims.n1() as i32;
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc * z.powi(-n1)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Identifier with independent unimodular coefficients.
pub fn random_identifier(dims: &ProblemDims, seed: u64) -> IdentifierPoly {
    let mut rng = seeded(seed);
    let coeffs = (0..dims.l1()).map(|_| unit_phasor(&mut rng)).collect();
    IdentifierPoly {
        dims: *dims,
        coeffs,
    }
}

/// Samples `y_j = (H w)(x_j)` for `j = -N2..=N2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSamples")]
pub struct SampleVector {
    dims: ProblemDims,
    #[serde(with = "crate::serde_complex::vec")]
    values: Vec<Complex64>,
}

#[derive(Deserialize)]
struct RawSamples {
    dims: ProblemDims,
    #[serde(with = "crate::serde_complex::vec")]
    values: Vec<Complex64>,
}

impl TryFrom<RawSamples> for SampleVector {
    type Error = Error;
    fn try_from(r: RawSamples) -> Result<Self> {
        SampleVector::new(r.dims, r.values)
    }
}

impl SampleVector {
    pub fn new(dims: ProblemDims, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != dims.l2() {
            return Err(Error::LengthMismatch {
                what: "sample vector",
                expected: dims.l2(),
                got: values.len(),
            });
        }
        Ok(SampleVector { dims, values })
    }

    pub fn dims(&self) -> &ProblemDims {
        &self.dims
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.values)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
