//! Finite-dimensional solvers: least squares, the complex lasso
//! `min ||A eta - y||^2 + lambda ||eta||_1`, and grid OMP.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atoms::{self, GridTables, RegularGrid};
use crate::linalg::{self, adjoint_matvec, czero, l1_norm, matvec, norm, norm_sqr, sub, CMatrix};
use crate::measurement::MeasurementOperator;
use crate::model::{ChannelSpec, Feature, SampleVector};

pub use crate::linalg::{least_squares, LeastSquares};

/// Atoms on a finite set of `(tau, nu)` points together with `G Z`.
#[derive(Debug, Clone)]
pub struct GridAtomSet {
    points: Vec<(f64, f64)>,
    gz: CMatrix,
    dims: crate::model::ProblemDims,
}

impl GridAtomSet {
    pub fn new(g: &MeasurementOperator, points: Vec<(f64, f64)>) -> Self {
        let dims = *g.dims();
        let mut gz = CMatrix::zeros(dims.l2(), points.len());
        let mut col = vec![czero(); dims.l2()];
        for (k, &(tau, nu)) in points.iter().enumerate() {
            let tf = atoms::tau_factor(&dims, tau);
            let nf = atoms::nu_factor(&dims, nu);
            g.apply_separable_into(&tf, &nf, &mut col);
            gz.column_mut(k).copy_from_slice(&col);
        }
        GridAtomSet { points, gz, dims }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `G Z`, `L2 x J`.
    pub fn gz(&self) -> &CMatrix {
        &self.gz
    }

    /// `Z = [a(tau_1, nu_1) ... a(tau_J, nu_J)]`, `L1 L2 x J`.
    pub fn z(&self) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.dims.atom_len(), self.points.len());
        for (k, &(tau, nu)) in self.points.iter().enumerate() {
            z.column_mut(k)
                .copy_from_slice(atoms::atom(&self.dims, tau, nu).entries());
        }
        z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoOptions {
    /// Relative tolerance on the first-order optimality residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tol: 1e-8,
            max_iter: 5000,
        }
    }
}

/// Result of a lasso solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    pub eta: Vec<Complex64>,
    /// `||A eta - y||^2 + lambda ||eta||_1`
    pub objective: f64,
    pub iterations: usize,
    pub residual_norm: f64,
    /// `false` when `max_iter` ran out before the optimality test passed.
    pub converged: bool,
}

/// `||A eta - y||^2 + lambda ||eta||_1`.
pub fn lasso_objective(a: &CMatrix, y: &[Complex64], lambda: f64, eta: &[Complex64]) -> f64 {
    norm_sqr(&sub(&matvec(a, eta), y)) + lambda * l1_norm(eta)
}

/// Complex soft thresholding: shrinks the modulus by `t`, keeps the phase.
pub fn soft_threshold(z: Complex64, t: f64) -> Complex64 {
    let m = z.norm();
    if m <= t {
        czero()
    } else {
        z * ((m - t) / m)
    }
}

/// Largest violation of the lasso optimality conditions at `eta`, given the
/// gradient `grad = 2 A^H (A eta - y)`.
pub fn optimality_residual(grad: &[Complex64], eta: &[Complex64], lambda: f64) -> f64 {
    grad.iter()
        .zip(eta)
        .map(|(g, e)| {
            let m = e.norm();
            if m > 0.0 {
                (g + e * (lambda / m)).norm()
            } else {
                (g.norm() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

pub fn lasso(a: &CMatrix, y: &[Complex64], lambda: f64, opts: &LassoOptions) -> SparseSolution {
    lasso_warm(a, y, lambda, opts, None)
}

/// Monotone FISTA with function-value restart.
///
/// Step size `1 / (2 sigma_max(A)^2)`, with `sigma_max` from power iteration.
/// `lambda = 0` is solved directly by least squares.
pub fn lasso_warm(
    a: &CMatrix,
    y: &[Complex64],
    lambda: f64,
    opts: &LassoOptions,
    start: Option<&[Complex64]>,
) -> SparseSolution {
    assert!(lambda >= 0.0, "lasso: lambda must be non-negative");
    let n = a.ncols();
    let finish = |eta: Vec<Complex64>, iterations: usize, converged: bool| {
        let r = sub(&matvec(a, &eta), y);
        let rn = norm(&r);
        SparseSolution {
            objective: rn * rn + lambda * l1_norm(&eta),
            residual_norm: rn,
            eta,
            iterations,
            converged,
        }
    };
    if n == 0 {
        return finish(Vec::new(), 0, true);
    }
    if lambda == 0.0 {
        let ls = linalg::least_squares(a, y);
        return finish(ls.x, 0, true);
    }

    let lip = 2.0 * linalg::spectral_norm_sqr(a) * 1.01;
    if lip == 0.0 {
        return finish(vec![czero(); n], 0, true);
    }
    let step = 1.0 / lip;
    let thr = lambda * step;
    let aty = adjoint_matvec(a, y);
    let scale = aty
        .iter()
        .map(|c| 2.0 * c.norm())
        .fold(lambda, f64::max)
        .max(f64::MIN_POSITIVE);

    let obj = |ax: &[Complex64], x: &[Complex64]| norm_sqr(&sub(ax, y)) + lambda * l1_norm(x);

    let mut x: Vec<Complex64> = match start {
        Some(s) if s.len() == n => s.to_vec(),
        _ => vec![czero(); n],
    };
    let mut ax = matvec(a, &x);
    let mut fx = obj(&ax, &x);
    let mut yk = x.clone();
    let mut ay = ax.clone();
    let mut t = 1.0f64;

    for it in 1..=opts.max_iter {
        let grad = adjoint_matvec(a, &sub(&ay, y));
        let z: Vec<Complex64> = yk
            .iter()
            .zip(&grad)
            .map(|(v, g)| soft_threshold(v - g * (2.0 * step), thr))
            .collect();
        let az = matvec(a, &z);
        let fz = obj(&az, &z);

        let x_prev = x.clone();
        let ax_prev = ax.clone();
        let accepted = fz <= fx;
        if accepted {
            x = z.clone();
            ax = az.clone();
            fx = fz;
        }

        if accepted {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let c1 = t / t_next;
            let c2 = (t - 1.0) / t_next;
            for i in 0..n {
                yk[i] = x[i] + (z[i] - x[i]) * c1 + (x[i] - x_prev[i]) * c2;
            }
            for i in 0..ay.len() {
                ay[i] = ax[i] + (az[i] - ax[i]) * c1 + (ax[i] - ax_prev[i]) * c2;
            }
            t = t_next;
        } else {
            // momentum overshot: restart from the best iterate
            t = 1.0;
            yk.clone_from(&x);
            ay.clone_from(&ax);
        }

        if it % 5 == 0 || !accepted {
            let g: Vec<Complex64> = adjoint_matvec(a, &sub(&ax, y))
                .into_iter()
                .map(|c| c * 2.0)
                .collect();
            if optimality_residual(&g, &x, lambda) <= opts.tol * scale {
                return finish(x, it, true);
            }
        }
    }
    finish(x, opts.max_iter, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OmpStop {
    pub max_atoms: usize,
    /// Stop once `||r|| <= residual_tol * ||y||`.
    pub residual_tol: f64,
}

impl Default for OmpStop {
    fn default() -> Self {
        OmpStop {
            max_atoms: 10,
            residual_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OmpResult {
    pub channel: ChannelSpec,
    /// `||r||` before the first and after every iteration.
    pub residual_norms: Vec<f64>,
    /// Row-major grid indices in selection order.
    pub selected: Vec<usize>,
}

/// Orthogonal matching pursuit over a regular grid.
///
/// Each step picks the grid point maximising `|<r, G a>| / ||G a||`, refits
/// all selected atoms by least squares and updates the residual.
pub fn omp(y: &SampleVector, g: &MeasurementOperator, grid: &RegularGrid, stop: &OmpStop) -> OmpResult {
    let dims = *g.dims();
    assert!(!grid.is_empty(), "omp: empty grid");
    let tables = GridTables::new(&dims, grid);
    let col_norms = g.grid_column_norms(&tables);

    let ynorm = y.norm();
    let mut r = y.values().to_vec();
    let mut residual_norms = vec![ynorm];
    let mut selected: Vec<usize> = Vec::new();
    let mut gz = CMatrix::zeros(dims.l2(), 0);
    let mut eta: Vec<Complex64> = Vec::new();

    while selected.len() < stop.max_atoms
        && *residual_norms.last().unwrap() > stop.residual_tol * ynorm
        && selected.len() < grid.len()
    {
        let b = g.adjoint_apply(&r);
        let mut score = tables.correlate(&b);
        for (s, n) in score.iter_mut().zip(col_norms.iter()) {
            *s = if *n > 0.0 { *s / n } else { 0.0 };
        }
        for &idx in &selected {
            score[(idx / grid.q, idx % grid.q)] = f64::NAN;
        }
        let Some((i, j)) = atoms::argmax(&score) else {
            break;
        };
        if score[(i, j)] <= 0.0 {
            break;
        }
        let idx = i * grid.q + j;
        selected.push(idx);
        let (tau, nu) = grid.point(idx);
        let col = g.apply_separable(&atoms::tau_factor(&dims, tau), &atoms::nu_factor(&dims, nu));
        let k = gz.ncols();
        gz = gz.insert_column(k, czero());
        gz.column_mut(k).copy_from_slice(&col);

        eta = linalg::least_squares(&gz, y.values()).x;
        r = sub(y.values(), &matvec(&gz, &eta));
        residual_norms.push(norm(&r));
    }

    let features = selected
        .iter()
        .zip(&eta)
        .map(|(&idx, &e)| {
            let (tau, nu) = grid.point(idx);
            Feature::new(e, tau, nu)
        })
        .collect();
    OmpResult {
        channel: ChannelSpec::new(dims, features).expect("grid points lie in the domain"),
        residual_norms,
        selected,
    }
}
