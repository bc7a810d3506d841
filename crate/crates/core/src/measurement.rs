//! The measurement operator `G`, forward models and noise.
//!
//! `G[j, (u, v)] = exp(2 pi i x_j v / T) * w(x_j - u / Omega)` factors into an
//! identifier-sample matrix `W[j, u] = w(x_j - u/Omega)` and a modulation
//! matrix `E[j, v] = exp(2 pi i j v / L2)`. Only the two factors are stored;
//! the dense `L2 x L1 L2` matrix is produced by [`MeasurementOperator::dense`].

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::atoms::{AtomVector, GridTables};
use crate::error::{Error, Result};
use crate::linalg::{czero, norm, CMatrix};
use crate::model::{ChannelSpec, IdentifierPoly, ProblemDims, SampleVector};
use crate::rng::seeded;

/// Which identifier model produced the samples inside `G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentifierModel {
    Trig,
    Sinc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOperator {
    dims: ProblemDims,
    provenance: IdentifierModel,
    /// `L2 x L1`
    w_samples: CMatrix,
    /// `L2 x L2`
    modulations: CMatrix,
}

fn modulation_matrix(dims: &ProblemDims) -> CMatrix {
    let l2 = dims.l2() as i64;
    let n2 = dims.n2() as i64;
    DMatrix::from_fn(dims.l2(), dims.l2(), |jj, vv| {
        let (j, v) = (jj as i64 - n2, vv as i64 - n2);
        // exp(2 pi i x_j v / T) = exp(2 pi i j v / L2); reduce j*v mod L2 first
        let m = (j * v).rem_euclid(l2);
        Complex64::from_polar(1.0, 2.0 * PI * m as f64 / l2 as f64)
    })
}

fn sample_matrix(dims: &ProblemDims, w: impl Fn(f64) -> Complex64) -> CMatrix {
    let n1 = dims.n1() as isize;
    let n2 = dims.n2() as isize;
    DMatrix::from_fn(dims.l2(), dims.l1(), |jj, uu| {
        let x = dims.sample_point(jj as isize - n2);
        w(x - (uu as isize - n1) as f64 / dims.omega())
    })
}

/// Builds `G` from a trigonometric identifier.
pub fn build_g(identifier: &IdentifierPoly) -> MeasurementOperator {
    let dims = *identifier.dims();
    MeasurementOperator {
        dims,
        provenance: IdentifierModel::Trig,
        w_samples: sample_matrix(&dims, |x| identifier.eval(x)),
        modulations: modulation_matrix(&dims),
    }
}

/// Builds `G` from the samples of a sinc-sum identifier, i.e. the model that
/// treats it as if it were a trigonometric polynomial.
pub fn build_g_sinc(identifier: &SincIdentifier) -> MeasurementOperator {
    let dims = identifier.dims;
    MeasurementOperator {
        dims,
        provenance: IdentifierModel::Sinc,
        w_samples: sample_matrix(&dims, |x| Complex64::new(identifier.eval(x), 0.0)),
        modulations: modulation_matrix(&dims),
    }
}

impl MeasurementOperator {
    pub fn dims(&self) -> &ProblemDims {
        &self.dims
    }

    pub fn provenance(&self) -> IdentifierModel {
        self.provenance
    }

    pub fn identifier_samples(&self) -> &CMatrix {
        &self.w_samples
    }

    pub fn modulations(&self) -> &CMatrix {
        &self.modulations
    }

    /// `G[j, (u, v)]` for symmetric indices.
    pub fn entry(&self, j: isize, u: isize, v: isize) -> Complex64 {
        let jj = (j + self.dims.n2() as isize) as usize;
        let uu = (u + self.dims.n1() as isize) as usize;
        let vv = (v + self.dims.n2() as isize) as usize;
        self.modulations[(jj, vv)] * self.w_samples[(jj, uu)]
    }

    /// The dense `L2 x (L1 L2)` matrix, columns ordered `u`-fastest.
    pub fn dense(&self) -> CMatrix {
        let (l1, l2) = (self.dims.l1(), self.dims.l2());
        DMatrix::from_fn(l2, l1 * l2, |j, col| {
            let (u, v) = (col % l1, col / l1);
            self.modulations[(j, v)] * self.w_samples[(j, u)]
        })
    }

    /// `G x` for a full coefficient vector of length `L1 L2`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let (l1, l2) = (self.dims.l1(), self.dims.l2());
        assert_eq!(x.len(), l1 * l2, "apply: vector length must be L1*L2");
        let xm = DMatrix::from_column_slice(l1, l2, x);
        let wx = &self.w_samples * xm;
        (0..l2)
            .map(|j| {
                self.modulations
                    .row(j)
                    .iter()
                    .zip(wx.row(j).iter())
                    .map(|(e, s)| e * s)
                    .sum()
            })
            .collect()
    }

    /// `G^H r`, length `L1 L2`.
    pub fn adjoint_apply(&self, r: &[Complex64]) -> Vec<Complex64> {
        let l2 = self.dims.l2();
        assert_eq!(r.len(), l2, "adjoint_apply: vector length must be L2");
        let m = DMatrix::from_fn(l2, l2, |j, v| r[j] * self.modulations[(j, v)].conj());
        let out = self.w_samples.adjoint() * m;
        out.as_slice().to_vec()
    }

    /// `G (alpha (x) beta)` for a separable real vector, in `O(L2 (L1 + L2))`.
    pub fn apply_separable(&self, alpha: &[f64], beta: &[f64]) -> Vec<Complex64> {
        let mut out = vec![czero(); self.dims.l2()];
        self.apply_separable_into(alpha, beta, &mut out);
        out
    }

    pub(crate) fn apply_separable_into(&self, alpha: &[f64], beta: &[f64], out: &mut [Complex64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let mut wa = czero();
            for (u, a) in alpha.iter().enumerate() {
                wa += self.w_samples[(j, u)] * a;
            }
            let mut eb = czero();
            for (v, b) in beta.iter().enumerate() {
                eb += self.modulations[(j, v)] * b;
            }
            *o = wa * eb;
        }
    }

    /// `G a(tau, nu)`.
    pub fn apply_atom(&self, atom: &AtomVector) -> Vec<Complex64> {
        self.apply_separable(atom.tau_factor(), atom.nu_factor())
    }

    /// `||G a(tau_i, nu_j)||_2` on every point of a tabulated grid.
    pub fn grid_column_norms(&self, tables: &GridTables) -> DMatrix<f64> {
        let tf_t = tables.tau_factors.transpose();
        let w_re = self.w_samples.map(|c| c.re);
        let w_im = self.w_samples.map(|c| c.im);
        let wt_re = &w_re * &tf_t;
        let wt_im = &w_im * &tf_t;
        let wt_sq = wt_re.zip_map(&wt_im, |a, b| a * a + b * b);

        let e_re = self.modulations.map(|c| c.re);
        let e_im = self.modulations.map(|c| c.im);
        let en_re = &e_re * &tables.nu_factors_t;
        let en_im = &e_im * &tables.nu_factors_t;
        let en_sq = en_re.zip_map(&en_im, |a, b| a * a + b * b);

        (wt_sq.transpose() * en_sq).map(f64::sqrt)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&OperatorJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: OperatorJson = serde_json::from_str(s)?;
        raw.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct OperatorJson {
    dims: ProblemDims,
    provenance: IdentifierModel,
    #[serde(with = "crate::serde_complex::matrix")]
    identifier_samples: CMatrix,
    #[serde(with = "crate::serde_complex::matrix")]
    modulations: CMatrix,
    #[serde(with = "crate::serde_complex::matrix")]
    entries: CMatrix,
}

impl From<&MeasurementOperator> for OperatorJson {
    fn from(g: &MeasurementOperator) -> Self {
        OperatorJson {
            dims: g.dims,
            provenance: g.provenance,
            identifier_samples: g.w_samples.clone(),
            modulations: g.modulations.clone(),
            entries: g.dense(),
        }
    }
}

impl TryFrom<OperatorJson> for MeasurementOperator {
    type Error = Error;
    fn try_from(raw: OperatorJson) -> Result<Self> {
        let dims = raw.dims;
        let check = |m: &CMatrix, r: usize, c: usize, what: &'static str| {
            if m.shape() != (r, c) {
                return Err(Error::LengthMismatch {
                    what,
                    expected: r * c,
                    got: m.len(),
                });
            }
            Ok(())
        };
        check(&raw.identifier_samples, dims.l2(), dims.l1(), "identifier samples")?;
        check(&raw.modulations, dims.l2(), dims.l2(), "modulations")?;
        check(&raw.entries, dims.l2(), dims.atom_len(), "operator entries")?;
        let g = MeasurementOperator {
            dims,
            provenance: raw.provenance,
            w_samples: raw.identifier_samples,
            modulations: raw.modulations,
        };
        if g.dense() != raw.entries {
            return Err(Error::Config(
                "operator entries are not the product of its factors".into(),
            ));
        }
        Ok(g)
    }
}

/// `y_j = sum_s eta_s exp(2 pi i nu_s x_j) w(x_j - tau_s)`, evaluated directly.
pub fn forward_direct(channel: &ChannelSpec, identifier: &IdentifierPoly) -> Result<SampleVector> {
    let dims = *channel.dims();
    if *identifier.dims() != dims {
        return Err(Error::Dimension("channel and identifier dimensions differ".into()));
    }
    forward_with(channel, |x| identifier.eval(x))
}

fn forward_with(channel: &ChannelSpec, w: impl Fn(f64) -> Complex64) -> Result<SampleVector> {
    let dims = *channel.dims();
    let xs = dims.sample_points();
    let values = xs
        .iter()
        .map(|&x| {
            channel
                .features()
                .iter()
                .map(|f| f.eta * Complex64::from_polar(1.0, 2.0 * PI * f.nu * x) * w(x - f.tau))
                .sum()
        })
        .collect();
    SampleVector::new(dims, values)
}

/// Sum of amplitude-weighted atoms, `sum_s eta_s a(tau_s, nu_s)`.
pub fn atom_combination(channel: &ChannelSpec) -> Vec<Complex64> {
    let dims = channel.dims();
    let mut acc = vec![czero(); dims.atom_len()];
    for f in channel.features() {
        let a = crate::atoms::atom(dims, f.tau, f.nu);
        for (s, e) in acc.iter_mut().zip(a.entries()) {
            *s += f.eta * e;
        }
    }
    acc
}

/// `y = G sum_s eta_s a(tau_s, nu_s)`.
pub fn forward_atoms(channel: &ChannelSpec, g: &MeasurementOperator) -> Result<SampleVector> {
    if channel.dims() != g.dims() {
        return Err(Error::Dimension("channel and operator dimensions differ".into()));
    }
    SampleVector::new(*g.dims(), g.apply(&atom_combination(channel)))
}

/// Adds complex Gaussian noise rescaled so that `||y - y_noisy|| / ||y|| = 10^(noise_db/10)`.
///
/// `noise_db = -inf` returns the samples unchanged.
pub fn add_noise(y: &SampleVector, noise_db: f64, seed: u64) -> Result<SampleVector> {
    if noise_db == f64::NEG_INFINITY {
        return Ok(y.clone());
    }
    if !noise_db.is_finite() {
        return Err(Error::Config(format!("noise level {noise_db} dB")));
    }
    let ynorm = y.norm();
    if ynorm == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let mut rng = seeded(seed);
    let noise: Vec<Complex64> = (0..y.values().len())
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        })
        .collect();
    let target = 10f64.powf(noise_db / 10.0) * ynorm;
    let scale = target / norm(&noise);
    let values = y
        .values()
        .iter()
        .zip(&noise)
        .map(|(v, n)| v + n * scale)
        .collect();
    SampleVector::new(*y.dims(), values)
}

/// `sin(pi x) / (pi x)`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - (PI * x).powi(2) / 6.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Identifier `w(x) = sum_k c_k sinc(x Omega - k)` with real, partially
/// periodic coefficients `c_k = c_{k+L} = c_{k-L}`.
///
/// Only `c_{-N..=N}` is stored; the sum runs over `k = -R L - N ..= R L + N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SincIdentifier {
    dims: ProblemDims,
    coeffs: Vec<f64>,
    replicas: usize,
}

impl SincIdentifier {
    /// Requires `N1 = N2` and odd `L = T * Omega`.
    pub fn new(dims: ProblemDims, coeffs: Vec<f64>, replicas: usize) -> Result<Self> {
        if dims.n1() != dims.n2() {
            return Err(Error::Dimension("sinc identifier needs N1 = N2".into()));
        }
        let l = dims.l1() as f64;
        if (l - dims.t() * dims.omega()).abs() > 1e-9 * l {
            return Err(Error::Dimension(format!(
                "sinc identifier needs L = T*Omega, got L = {l}, T*Omega = {}",
                dims.t() * dims.omega()
            )));
        }
        if coeffs.len() != dims.l1() {
            return Err(Error::LengthMismatch {
                what: "sinc coefficients",
                expected: dims.l1(),
                got: coeffs.len(),
            });
        }
        Ok(SincIdentifier {
            dims,
            coeffs,
            replicas,
        })
    }

    pub fn dims(&self) -> &ProblemDims {
        &self.dims
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    /// Base coefficients `c_{-N..=N}`.
    pub fn base_coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `c_k` for any `k` in the summation range.
    pub fn coeff(&self, k: isize) -> f64 {
        let l = self.dims.l1() as isize;
        let n = self.dims.n1() as isize;
        self.coeffs[(k + n).rem_euclid(l) as usize]
    }

    /// Largest index of the sum, `R L + N`.
    pub fn max_index(&self) -> isize {
        (self.replicas * self.dims.l1() + self.dims.n1()) as isize
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k_max = self.max_index();
        let xo = x * self.dims.omega();
        (-k_max..=k_max)
            .map(|k| self.coeff(k) * sinc(xo - k as f64))
            .sum()
    }

    /// The trigonometric polynomial that interpolates `c_k` at `x = k / Omega`.
    pub fn matched_trig(&self) -> IdentifierPoly {
        let l = self.dims.l1();
        let n = self.dims.n1() as isize;
        let coeffs = (-n..=n)
            .map(|m| {
                (-n..=n)
                    .map(|k| {
                        let ph = -2.0 * PI * ((m * k).rem_euclid(l as isize)) as f64 / l as f64;
                        Complex64::from_polar(self.coeff(k), ph)
                    })
                    .sum::<Complex64>()
                    / l as f64
            })
            .collect();
        IdentifierPoly::new(self.dims, coeffs).expect("length L1 by construction")
    }
}

/// Sinc identifier with independent random signs `c_k = +-1`.
pub fn random_sinc_identifier(dims: &ProblemDims, replicas: usize, seed: u64) -> Result<SincIdentifier> {
    let mut rng = seeded(seed);
    let coeffs = (0..dims.l1())
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    SincIdentifier::new(*dims, coeffs, replicas)
}

/// Samples of `H w` for a sinc-sum identifier, evaluated directly.
pub fn forward_sinc(channel: &ChannelSpec, identifier: &SincIdentifier) -> Result<SampleVector> {
    if channel.dims() != identifier.dims() {
        return Err(Error::Dimension("channel and identifier dimensions differ".into()));
    }
    forward_with(channel, |x| Complex64::new(identifier.eval(x), 0.0))
}
