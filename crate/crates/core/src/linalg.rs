//! Small dense complex helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

pub fn l1_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm()).sum()
}

/// `a - b`, elementwise.
pub fn sub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `A x`.
pub fn matvec(a: &CMatrix, x: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![czero(); a.nrows()];
    for (j, xj) in x.iter().enumerate() {
        if *xj == czero() {
            continue;
        }
        for (o, aij) in out.iter_mut().zip(a.column(j).iter()) {
            *o += aij * xj;
        }
    }
    out
}

/// `A^H r`.
pub fn adjoint_matvec(a: &CMatrix, r: &[Complex64]) -> Vec<Complex64> {
    (0..a.ncols())
        .map(|j| a.column(j).iter().zip(r).map(|(aij, ri)| aij.conj() * ri).sum())
        .collect()
}

/// Least-squares solution of `A x = y`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub x: Vec<Complex64>,
    /// Numerical rank was below the column count; `x` is the minimum-norm solution.
    pub rank_deficient: bool,
    pub residual_norm: f64,
}

/// Minimum-norm least squares via the SVD.
///
/// Singular values below `max(m, n) * eps * sigma_max` are treated as zero.
pub fn least_squares(a: &CMatrix, y: &[Complex64]) -> LeastSquares {
    let (m, n) = a.shape();
    assert_eq!(m, y.len(), "least_squares: row count does not match rhs");
    if n == 0 {
        return LeastSquares {
            x: Vec::new(),
            rank_deficient: false,
            residual_norm: norm(y),
        };
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = m.max(n) as f64 * f64::EPSILON * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let b = DVector::from_column_slice(y);
    let x = svd
        .solve(&b, cutoff)
        .map(|v| v.as_slice().to_vec())
        .unwrap_or_else(|_| vec![czero(); n]);
    let r = sub(&matvec(a, &x), y);
    LeastSquares {
        x,
        rank_deficient: rank < n,
        residual_norm: norm(&r),
    }
}

/// Largest squared singular value of `A` by power iteration on `A^H A`
/// (or `A A^H`, whichever is smaller).
pub fn spectral_norm_sqr(a: &CMatrix) -> f64 {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return 0.0;
    }
    let gram = if n <= m { a.adjoint() * a } else { a * a.adjoint() };
    let k = gram.nrows();
    // deterministic start that is not orthogonal to the dominant direction in practice
    let mut v = DVector::from_fn(k, |i, _| Complex64::new(1.0, 0.37 * (i as f64 + 1.0).sin()));
    v /= Complex64::new(v.norm(), 0.0);
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w = &gram * &v;
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        let next = wn;
        v = w / Complex64::new(wn, 0.0);
        if (next - lambda).abs() <= 1e-12 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda
}
