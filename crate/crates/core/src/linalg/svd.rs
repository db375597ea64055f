//! One-sided (Hestenes) Jacobi SVD.
//!
//! The routine orthogonalizes the columns of a working copy `B = A V` by plane
//! rotations until every column pair is numerically orthogonal. Singular values
//! are the final column norms, `V` is the accumulated product of rotations and
//! `U` the normalized columns, completed to a square orthogonal matrix with
//! Householder reflectors.

use crate::error::{GlsError, Result};
use crate::linalg::qr::complete_orthonormal;
use crate::linalg::{vector, DenseMatrix};

/// Numerical-rank cutoff for singular values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RankTolerance {
    /// Relative cutoff `max(m, n) · eps · σ_max`.
    #[default]
    Auto,
    /// Singular values `≤ value · σ_max` are treated as zero.
    Relative(f64),
    /// Singular values `≤ value` are treated as zero.
    Absolute(f64),
}

impl RankTolerance {
    pub fn relative(value: f64) -> Result<Self> {
        Self::check(value).map(|_| RankTolerance::Relative(value))
    }

    pub fn absolute(value: f64) -> Result<Self> {
        Self::check(value).map(|_| RankTolerance::Absolute(value))
    }

    fn check(value: f64) -> Result<()> {
        if value > 0.0 && value.is_finite() {
            Ok(())
        } else {
            Err(GlsError::InvalidArgument(format!(
                "rank tolerance must be positive, got {value}"
            )))
        }
    }

    /// Absolute threshold for a `rows x cols` matrix with largest singular value `sigma_max`.
    pub fn threshold(&self, sigma_max: f64, rows: usize, cols: usize, eps: f64) -> f64 {
        match *self {
            RankTolerance::Auto => rows.max(cols) as f64 * eps * sigma_max,
            RankTolerance::Relative(v) => v * sigma_max,
            RankTolerance::Absolute(v) => v,
        }
    }
}

/// Knobs shared by the dense kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinalgConfig {
    pub eps: f64,
    /// Jacobi sweep cap.
    pub max_sweeps: usize,
    /// A column pair is orthogonal once `|b_pᵀ b_q| ≤ rotation_tol · ‖b_p‖ ‖b_q‖`.
    pub rotation_tol: f64,
    /// Cholesky declares a matrix indefinite when a pivot is `≤ pivot_tol · max diag`.
    pub pivot_tol: f64,
    /// Relative tolerance for negative eigenvalues in `psd_sqrt`.
    pub psd_tol: f64,
}

impl Default for LinalgConfig {
    fn default() -> Self {
        Self {
            eps: f64::EPSILON,
            max_sweeps: 30,
            rotation_tol: 1e-15,
            pivot_tol: 1e-14,
            psd_tol: 1e-12,
        }
    }
}

/// `A = U · diag(σ) · Vᵀ` with square orthogonal `U` (m×m) and `V` (n×n).
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    /// Nonincreasing, length `min(m, n)`.
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
    /// Number of singular values above the rank threshold.
    pub rank: usize,
    pub threshold: f64,
}

impl SvdFactors {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// First `rank` left singular vectors.
    pub fn u_range(&self) -> DenseMatrix {
        self.u.col_range(0, self.rank)
    }

    /// First `rank` right singular vectors.
    pub fn v_range(&self) -> DenseMatrix {
        self.v.col_range(0, self.rank)
    }

    /// Right singular vectors spanning the numerical null space.
    pub fn v_null(&self) -> DenseMatrix {
        self.v.col_range(self.rank, self.v.cols())
    }

    /// `U Σ Vᵀ`
    pub fn reconstruct(&self) -> DenseMatrix {
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut us = DenseMatrix::zeros(m, n);
        for (j, &s) in self.singular_values.iter().enumerate() {
            let dst = us.col_mut(j);
            vector::axpy(s, self.u.col(j), dst);
        }
        us.matmul(&self.v.transpose())
    }
}

/// Result of the raw column sweep: `a · v = b`, with the columns of `b` mutually orthogonal.
pub(crate) struct JacobiColumns {
    pub b: DenseMatrix,
    pub v: DenseMatrix,
}

/// Runs cyclic one-sided Jacobi on the columns of `a`. Works for any shape; for
/// wide inputs the surplus columns converge to zero.
pub(crate) fn jacobi_columns(a: &DenseMatrix, cfg: &LinalgConfig) -> Result<JacobiColumns> {
    let (m, n) = a.shape();
    let mut b = a.clone();
    let mut v = DenseMatrix::identity(n);
    let fro = a.norm_fro();
    if fro == 0.0 || n < 2 {
        return Ok(JacobiColumns { b, v });
    }
    let tol = cfg.rotation_tol.max((m as f64).sqrt() * cfg.eps);
    let floor = (cfg.eps * fro).powi(2);

    let mut worst = f64::INFINITY;
    for _sweep in 0..cfg.max_sweeps {
        let mut rotated = false;
        worst = 0.0_f64;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (bp, bq) = b.col_pair_mut(p, q);
                let alpha = vector::dot(bp, bp);
                let beta = vector::dot(bq, bq);
                let gamma = vector::dot(bp, bq);
                if gamma.abs() <= floor {
                    continue;
                }
                let scale = (alpha * beta).sqrt();
                let off = gamma.abs() / scale;
                if off <= tol {
                    continue;
                }
                worst = worst.max(off);
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(bp, bq, c, s);
                let (vp, vq) = v.col_pair_mut(p, q);
                rotate(vp, vq, c, s);
            }
        }
        if !rotated {
            return Ok(JacobiColumns { b, v });
        }
    }
    Err(GlsError::FactorizationFailure {
        what: "one-sided Jacobi SVD did not converge within the sweep cap",
        residual: worst,
    })
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let (a, b) = (*xi, *yi);
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}

/// Sorted singular values and the column permutation that produced them.
fn sorted_norms(b: &DenseMatrix) -> (Vec<f64>, Vec<usize>) {
    let norms: Vec<f64> = b.columns().map(vector::norm2).collect();
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    (order.iter().map(|&i| norms[i]).collect(), order)
}

/// Left factor and sorted data from a converged sweep.
/// Returns `(U_full, norms, V_sorted)`; `norms` has one entry per column of `b`.
fn assemble(cols: JacobiColumns, eps: f64) -> (DenseMatrix, Vec<f64>, DenseMatrix) {
    let JacobiColumns { b, v } = cols;
    let m = b.rows();
    let (norms, order) = sorted_norms(&b);
    let fro = vector::norm2(&norms);
    let k = m.min(b.cols());
    let mut good = Vec::new();
    for (pos, &j) in order.iter().enumerate().take(k) {
        let s = norms[pos];
        if s > eps * fro && s > 0.0 {
            good.push(vector::scaled(1.0 / s, b.col(j)));
        } else {
            break;
        }
    }
    let u = complete_orthonormal(&DenseMatrix::from_columns(m, &good), m);
    let v_sorted = v.select_columns(&order);
    (u, norms, v_sorted)
}

/// SVD computed by rotating the columns of `a` directly, whatever its shape.
/// `V` is always an accumulated product of rotations, and one singular value
/// is returned per column (those past `min(m, n)` are numerically zero).
pub(crate) fn svd_by_columns(
    a: &DenseMatrix,
    cfg: &LinalgConfig,
) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix)> {
    Ok(assemble(jacobi_columns(a, cfg)?, cfg.eps))
}

/// Full SVD with the default configuration and rank tolerance.
pub fn svd(a: &DenseMatrix) -> Result<SvdFactors> {
    svd_with(a, RankTolerance::Auto, &LinalgConfig::default())
}

/// Full SVD: `U` is m×m, `V` is n×n, singular values nonincreasing.
pub fn svd_with(a: &DenseMatrix, tol: RankTolerance, cfg: &LinalgConfig) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    if a.is_empty() {
        return Ok(SvdFactors {
            u: DenseMatrix::identity(m),
            singular_values: Vec::new(),
            v: DenseMatrix::identity(n),
            rank: 0,
            threshold: 0.0,
        });
    }
    let (u, sigma, v) = if m >= n {
        let (u, mut sigma, v) = assemble(jacobi_columns(a, cfg)?, cfg.eps);
        sigma.truncate(n);
        (u, sigma, v)
    } else {
        // Aᵀ = U' Σ V'ᵀ  ⇒  A = V' Σ U'ᵀ
        let (ut, mut sigma, vt) = assemble(jacobi_columns(&a.transpose(), cfg)?, cfg.eps);
        sigma.truncate(m);
        (vt, sigma, ut)
    };
    let smax = sigma.first().copied().unwrap_or(0.0);
    let threshold = tol.threshold(smax, m, n, cfg.eps);
    let rank = sigma.iter().take_while(|&&s| s > threshold).count();
    Ok(SvdFactors {
        u,
        singular_values: sigma,
        v,
        rank,
        threshold,
    })
}

/// Largest singular value (spectral norm).
pub fn norm2(a: &DenseMatrix) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    let src = if a.rows() >= a.cols() {
        a.clone()
    } else {
        a.transpose()
    };
    let cols = jacobi_columns(&src, &LinalgConfig::default())?;
    Ok(cols.b.columns().map(vector::norm2).fold(0.0, f64::max))
}

/// Eigen-decomposition of a symmetric matrix: `(λ, V)` with `S = V diag(λ) Vᵀ`,
/// eigenvalues sorted by decreasing magnitude.
pub fn symmetric_eigen(s: &DenseMatrix, cfg: &LinalgConfig) -> Result<(Vec<f64>, DenseMatrix)> {
    if !s.is_square() {
        return Err(GlsError::DimensionMismatch(format!(
            "symmetric_eigen needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let sym = s.symmetrize();
    let JacobiColumns { b, v } = jacobi_columns(&sym, cfg)?;
    let (norms, order) = sorted_norms(&b);
    let v = v.select_columns(&order);
    let lambda = norms
        .iter()
        .zip(&order)
        .enumerate()
        .map(|(pos, (&s, &j))| {
            let sign = vector::dot(v.col(pos), b.col(j));
            if sign < 0.0 {
                -s
            } else {
                s
            }
        })
        .collect();
    Ok((lambda, v))
}
