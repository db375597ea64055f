//! Pseudoinverse, projectors, null spaces, Cholesky and PSD square roots.

use crate::error::{GlsError, Result};
use crate::linalg::svd::{svd_with, symmetric_eigen, LinalgConfig, RankTolerance};
use crate::linalg::{vector, DenseMatrix};

/// Moore-Penrose pseudoinverse `V Σ⁺ Uᵀ`; singular values at or below the
/// rank threshold are treated as zero.
pub fn pinv(a: &DenseMatrix, tol: RankTolerance) -> Result<DenseMatrix> {
    pinv_with(a, tol, &LinalgConfig::default())
}

pub fn pinv_with(a: &DenseMatrix, tol: RankTolerance, cfg: &LinalgConfig) -> Result<DenseMatrix> {
    let f = svd_with(a, tol, cfg)?;
    let (m, n) = a.shape();
    let mut vs = DenseMatrix::zeros(n, f.rank);
    for j in 0..f.rank {
        vector::axpy(1.0 / f.singular_values[j], f.v.col(j), vs.col_mut(j));
    }
    let ur = f.u.col_range(0, f.rank);
    let out = vs.matmul(&ur.transpose());
    debug_assert_eq!(out.shape(), (n, m));
    Ok(out)
}

/// Orthogonal projector onto the column space of `a` (`A A⁺ = U_r U_rᵀ`).
pub fn projector_range(a: &DenseMatrix, tol: RankTolerance) -> Result<DenseMatrix> {
    let f = svd_with(a, tol, &LinalgConfig::default())?;
    let ur = f.u_range();
    Ok(ur.matmul(&ur.transpose()).symmetrize())
}

/// Orthonormal basis of the numerical null space of `a` (n×(n−rank); zero
/// columns when `a` has full column rank).
pub fn nullspace_basis(a: &DenseMatrix, tol: RankTolerance) -> Result<DenseMatrix> {
    Ok(svd_with(a, tol, &LinalgConfig::default())?.v_null())
}

/// Lower-triangular `C` with `C Cᵀ = G`; only the lower triangle of `G` is read.
pub fn cholesky_spd(g: &DenseMatrix) -> Result<DenseMatrix> {
    cholesky_spd_with(g, &LinalgConfig::default())
}

pub fn cholesky_spd_with(g: &DenseMatrix, cfg: &LinalgConfig) -> Result<DenseMatrix> {
    if !g.is_square() {
        return Err(GlsError::DimensionMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    let n = g.rows();
    let max_diag = (0..n).map(|i| g.get(i, i)).fold(0.0_f64, f64::max);
    let pivot_floor = cfg.pivot_tol * max_diag;
    let mut c = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = g.get(j, j);
        for k in 0..j {
            d -= c.get(j, k).powi(2);
        }
        if d <= pivot_floor || max_diag <= 0.0 {
            return Err(GlsError::IndefiniteMatrix { index: j, pivot: d });
        }
        let d = d.sqrt();
        c.set(j, j, d);
        for i in j + 1..n {
            let mut s = g.get(i, j);
            for k in 0..j {
                s -= c.get(i, k) * c.get(j, k);
            }
            c.set(i, j, s / d);
        }
    }
    Ok(c)
}

/// Solves `C Cᵀ x = b` given the Cholesky factor `C`.
pub fn cholesky_solve(c: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = c.rows();
    assert_eq!(b.len(), n);
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= c.get(i, k) * y[k];
        }
        y[i] = s / c.get(i, i);
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= c.get(k, i) * y[k];
        }
        y[i] = s / c.get(i, i);
    }
    y
}

/// Symmetric square root `P^{1/2}` of a PSD matrix, so that `(P^{1/2})ᵀ P^{1/2} = P`.
pub fn psd_sqrt(p: &DenseMatrix) -> Result<DenseMatrix> {
    psd_sqrt_with(p, &LinalgConfig::default())
}

pub fn psd_sqrt_with(p: &DenseMatrix, cfg: &LinalgConfig) -> Result<DenseMatrix> {
    let (lambda, v) = symmetric_eigen(p, cfg)?;
    let scale = lambda.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
    let n = p.rows();
    let mut vs = DenseMatrix::zeros(n, n);
    for (j, &l) in lambda.iter().enumerate() {
        if l < -cfg.psd_tol * scale {
            return Err(GlsError::NegativeEigenvalue { eigenvalue: l });
        }
        if l > 0.0 {
            vector::axpy(l.sqrt(), v.col(j), vs.col_mut(j));
        }
    }
    Ok(vs.matmul(&v.transpose()).symmetrize())
}
