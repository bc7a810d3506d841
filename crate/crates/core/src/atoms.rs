//! Dirichlet kernels and the real-valued delay-Doppler atoms built from them.
//!
//! An atom is the separable product
//!
//! ```text
//! a(tau, nu)[u, v] = D_{N1}((u - Omega tau) / L1) / L1  *  D_{N2}((v - T nu) / L2) / L2
//! ```
//!
//! so everything here is computed from the two 1-D factors and only expanded
//! to the full `L1 * L2` vector on request.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::model::ProblemDims;

/// `D_N(x) = sin((2N+1) pi x) / sin(pi x)`, with value `2N+1` at integers.
pub fn dirichlet(n: usize, x: f64) -> f64 {
    let r = x - x.round();
    let s = (PI * r).sin();
    if s.abs() < 1e-8 {
        // removable singularity: fall back to 1 + 2 sum cos(2 pi k r)
        let mut acc = 1.0;
        for k in 1..=n {
            acc += 2.0 * (2.0 * PI * k as f64 * r).cos();
        }
        acc
    } else {
        ((2 * n + 1) as f64 * PI * r).sin() / s
    }
}

/// `D_N'(x) = -4 pi sum_{k=1}^N k sin(2 pi k x)`.
pub fn dirichlet_deriv(n: usize, x: f64) -> f64 {
    let r = x - x.round();
    let step = Complex64::from_polar(1.0, 2.0 * PI * r);
    let mut z = Complex64::new(1.0, 0.0);
    let mut acc = 0.0;
    for k in 1..=n {
        z *= step;
        acc += k as f64 * z.im;
    }
    -4.0 * PI * acc
}

/// `D_N(x) / (2N+1)`, the Dirichlet factor of an atom.
fn tau_factor_into(dims: &ProblemDims, tau: f64, out: &mut [f64]) {
    let l1 = dims.l1() as f64;
    let n1 = dims.n1() as isize;
    let c = dims.omega() * tau;
    for (i, o) in out.iter_mut().enumerate() {
        let u = i as isize - n1;
        *o = dirichlet(dims.n1(), (u as f64 - c) / l1) / l1;
    }
}

fn nu_factor_into(dims: &ProblemDims, nu: f64, out: &mut [f64]) {
    let l2 = dims.l2() as f64;
    let n2 = dims.n2() as isize;
    let c = dims.t() * nu;
    for (i, o) in out.iter_mut().enumerate() {
        let v = i as isize - n2;
        *o = dirichlet(dims.n2(), (v as f64 - c) / l2) / l2;
    }
}

/// Delay factor `D_{N1}((u - Omega tau)/L1) / L1`, `u = -N1..=N1`.
pub fn tau_factor(dims: &ProblemDims, tau: f64) -> Vec<f64> {
    let mut out = vec![0.0; dims.l1()];
    tau_factor_into(dims, tau, &mut out);
    out
}

/// Doppler factor `D_{N2}((v - T nu)/L2) / L2`, `v = -N2..=N2`.
pub fn nu_factor(dims: &ProblemDims, nu: f64) -> Vec<f64> {
    let mut out = vec![0.0; dims.l2()];
    nu_factor_into(dims, nu, &mut out);
    out
}

/// `d/dtau` of [`tau_factor`].
pub fn tau_factor_deriv(dims: &ProblemDims, tau: f64) -> Vec<f64> {
    let l1 = dims.l1() as f64;
    let n1 = dims.n1() as isize;
    let c = dims.omega() * tau;
    let scale = -dims.omega() / (l1 * l1);
    (0..dims.l1())
        .map(|i| {
            let u = i as isize - n1;
            scale * dirichlet_deriv(dims.n1(), (u as f64 - c) / l1)
        })
        .collect()
}

/// `d/dnu` of [`nu_factor`].
pub fn nu_factor_deriv(dims: &ProblemDims, nu: f64) -> Vec<f64> {
    let l2 = dims.l2() as f64;
    let n2 = dims.n2() as isize;
    let c = dims.t() * nu;
    let scale = -dims.t() / (l2 * l2);
    (0..dims.l2())
        .map(|i| {
            let v = i as isize - n2;
            scale * dirichlet_deriv(dims.n2(), (v as f64 - c) / l2)
        })
        .collect()
}

fn outer(alpha: &[f64], beta: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(alpha.len() * beta.len());
    for b in beta {
        out.extend(alpha.iter().map(|a| a * b));
    }
    out
}

/// Atom `a(tau, nu)` with entries stored `u`-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomVector {
    pub tau: f64,
    pub nu: f64,
    tau_factor: Vec<f64>,
    nu_factor: Vec<f64>,
    entries: Vec<f64>,
}

impl AtomVector {
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn tau_factor(&self) -> &[f64] {
        &self.tau_factor
    }

    pub fn nu_factor(&self) -> &[f64] {
        &self.nu_factor
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().sum()
    }
}

pub fn atom(dims: &ProblemDims, tau: f64, nu: f64) -> AtomVector {
    let tf = tau_factor(dims, tau);
    let nf = nu_factor(dims, nu);
    let entries = outer(&tf, &nf);
    AtomVector {
        tau,
        nu,
        tau_factor: tf,
        nu_factor: nf,
        entries,
    }
}

/// Partial derivatives of an atom with respect to `tau` and `nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomJacobian {
    pub d_tau: Vec<f64>,
    pub d_nu: Vec<f64>,
}

pub fn atom_jacobian(dims: &ProblemDims, tau: f64, nu: f64) -> AtomJacobian {
    let tf = tau_factor(dims, tau);
    let nf = nu_factor(dims, nu);
    let dtf = tau_factor_deriv(dims, tau);
    let dnf = nu_factor_deriv(dims, nu);
    AtomJacobian {
        d_tau: outer(&dtf, &nf),
        d_nu: outer(&tf, &dnf),
    }
}

/// Regular `P x Q` grid of `(tau, nu)` points, `tau` along rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularGrid {
    pub tau0: f64,
    pub dtau: f64,
    pub p: usize,
    pub nu0: f64,
    pub dnu: f64,
    pub q: usize,
}

impl RegularGrid {
    /// Cell midpoints of a `p x q` partition of the whole parameter domain.
    pub fn covering(dims: &ProblemDims, p: usize, q: usize) -> Self {
        let (t0, t1) = dims.tau_bounds();
        let (v0, v1) = dims.nu_bounds();
        let dtau = (t1 - t0) / p as f64;
        let dnu = (v1 - v0) / q as f64;
        RegularGrid {
            tau0: t0 + 0.5 * dtau,
            dtau,
            p,
            nu0: v0 + 0.5 * dnu,
            dnu,
            q,
        }
    }

    /// `k x k` grid centred on `(tau, nu)`.
    pub fn centered(tau: f64, nu: f64, k: usize, dtau: f64, dnu: f64) -> Self {
        let half = (k as f64 - 1.0) / 2.0;
        RegularGrid {
            tau0: tau - half * dtau,
            dtau,
            p: k,
            nu0: nu - half * dnu,
            dnu,
            q: k,
        }
    }

    pub fn len(&self) -> usize {
        self.p * self.q
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tau(&self, i: usize) -> f64 {
        self.tau0 + i as f64 * self.dtau
    }

    pub fn nu(&self, j: usize) -> f64 {
        self.nu0 + j as f64 * self.dnu
    }

    /// Point with row-major index `idx = i * q + j`.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        (self.tau(idx / self.q), self.nu(idx % self.q))
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(|idx| self.point(idx))
    }
}

/// Tabulated atom factors on a grid, reused across correlation calls.
#[derive(Debug, Clone)]
pub struct GridTables {
    pub grid: RegularGrid,
    /// `P x L1`, row `i` is the delay factor of `tau_i`.
    pub tau_factors: DMatrix<f64>,
    /// `L2 x Q`, column `j` is the Doppler factor of `nu_j`.
    pub nu_factors_t: DMatrix<f64>,
}

impl GridTables {
    pub fn new(dims: &ProblemDims, grid: &RegularGrid) -> Self {
        let mut tau_factors = DMatrix::zeros(grid.p, dims.l1());
        let mut row = vec![0.0; dims.l1()];
        for i in 0..grid.p {
            tau_factor_into(dims, grid.tau(i), &mut row);
            for (u, r) in row.iter().enumerate() {
                tau_factors[(i, u)] = *r;
            }
        }
        let mut nu_factors_t = DMatrix::zeros(dims.l2(), grid.q);
        let mut col = vec![0.0; dims.l2()];
        for j in 0..grid.q {
            nu_factor_into(dims, grid.nu(j), &mut col);
            nu_factors_t.column_mut(j).copy_from_slice(&col);
        }
        GridTables {
            grid: *grid,
            tau_factors,
            nu_factors_t,
        }
    }

    /// `|<b, a(tau_i, nu_j)>|` for every grid point, as a `P x Q` matrix.
    ///
    /// `b` has length `L1 * L2` (`u` fastest). The sum over `(u, v)` factors
    /// into two real matrix products per real/imaginary part.
    pub fn correlate(&self, b: &[Complex64]) -> DMatrix<f64> {
        let l1 = self.tau_factors.ncols();
        let l2 = self.nu_factors_t.nrows();
        assert_eq!(b.len(), l1 * l2, "correlate: vector length must be L1*L2");
        let re = DMatrix::from_iterator(l1, l2, b.iter().map(|c| c.re));
        let im = DMatrix::from_iterator(l1, l2, b.iter().map(|c| c.im));
        let out_re = &self.tau_factors * (re * &self.nu_factors_t);
        let out_im = &self.tau_factors * (im * &self.nu_factors_t);
        out_re.zip_map(&out_im, |x, y| x.hypot(y))
    }
}

/// `|<b, a(tau, nu)>|` over a regular grid; `b` is typically `G^H r`.
pub fn correlate_grid(dims: &ProblemDims, b: &[Complex64], grid: &RegularGrid) -> DMatrix<f64> {
    GridTables::new(dims, grid).correlate(b)
}

/// Row-major index of the largest entry; lowest index wins ties.
pub fn argmax(values: &DMatrix<f64>) -> Option<(usize, usize)> {
    let (p, q) = values.shape();
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..p {
        for j in 0..q {
            let v = values[(i, j)];
            if v.is_nan() {
                continue;
            }
            if best.is_none_or(|(_, _, b)| v > b) {
                best = Some((i, j, v));
            }
        }
    }
    best.map(|(i, j, _)| (i, j))
}
