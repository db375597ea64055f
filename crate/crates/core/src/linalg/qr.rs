//! Householder QR.

use crate::error::{GlsError, Result};
use crate::linalg::{vector, DenseMatrix};

/// Householder reflectors of `a` and the triangularized copy.
struct Reflected {
    r: DenseMatrix,
    /// Unit reflector vectors; reflector `k` acts on rows `k..m`.
    reflectors: Vec<Vec<f64>>,
}

fn reflect(a: &DenseMatrix) -> Reflected {
    let (m, n) = a.shape();
    let mut r = a.clone();
    let steps = n.min(m.saturating_sub(1));
    let mut reflectors = Vec::with_capacity(steps);
    for k in 0..steps {
        let x: Vec<f64> = r.col(k)[k..].to_vec();
        let norm = vector::norm2(&x);
        if norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let vnorm = vector::norm2(&v);
        if vnorm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        vector::scale(1.0 / vnorm, &mut v);
        for j in k..n {
            let col = &mut r.col_mut(j)[k..];
            let d = 2.0 * vector::dot(&v, col);
            vector::axpy(-d, &v, col);
        }
        for i in k + 1..m {
            r.set(i, k, 0.0);
        }
        r.set(k, k, alpha);
        reflectors.push(v);
    }
    Reflected { r, reflectors }
}

/// First `ncols` columns of `H_0 H_1 … H_{p-1}`.
fn form_q(m: usize, reflectors: &[Vec<f64>], ncols: usize) -> DenseMatrix {
    let mut q = DenseMatrix::from_fn(m, ncols, |i, j| if i == j { 1.0 } else { 0.0 });
    for (k, v) in reflectors.iter().enumerate().rev() {
        if v.is_empty() {
            continue;
        }
        for j in 0..ncols {
            let col = &mut q.col_mut(j)[k..];
            let d = 2.0 * vector::dot(v, col);
            vector::axpy(-d, v, col);
        }
    }
    q
}

/// Thin QR of a tall matrix: `Q` is m×n with orthonormal columns, `R` is n×n
/// upper triangular.
pub fn qr_householder(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let (m, n) = a.shape();
    if m < n {
        return Err(GlsError::DimensionMismatch(format!(
            "thin QR needs rows >= cols, got {m}x{n}"
        )));
    }
    let Reflected { r, reflectors } = reflect(a);
    let q = form_q(m, &reflectors, n);
    Ok((q, r.row_range(0, n)))
}

/// Full QR of any shape: `Q` is m×m orthogonal, `R` is m×n upper trapezoidal.
pub fn qr_householder_full(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let m = a.rows();
    let Reflected { r, reflectors } = reflect(a);
    (form_q(m, &reflectors, m), r)
}

/// Extends the orthonormal columns of `q` (m×k) to an m×`dim` orthonormal set.
/// The given columns are kept verbatim as the leading block.
pub fn complete_orthonormal(q: &DenseMatrix, dim: usize) -> DenseMatrix {
    let (m, k) = q.shape();
    assert!(dim <= m && k <= dim);
    if k == dim {
        return q.clone();
    }
    if k == 0 {
        return DenseMatrix::identity(m).col_range(0, dim);
    }
    let (full, _) = qr_householder_full(q);
    q.hcat(&full.col_range(k, dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::{gaussian_matrix, orthogonality_error};

    #[test]
    fn identity_is_fixed() {
        let (q, r) = qr_householder(&DenseMatrix::identity(2)).unwrap();
        assert!((&q.matmul(&r) - &DenseMatrix::identity(2)).max_abs() == 0.0);
        assert!(orthogonality_error(&q) < 1e-16);
        assert!((r.get(0, 0).abs() - 1.0).abs() < 1e-16);
    }

    #[test]
    fn one_by_one_negative() {
        let a = DenseMatrix::from_rows(&[&[-2.0]]);
        let (q, r) = qr_householder(&a).unwrap();
        assert_eq!(q.get(0, 0).abs(), 1.0);
        assert_eq!(r.matmul(&q).get(0, 0), -2.0);
        assert_eq!(q.matmul(&r).get(0, 0), -2.0);
    }

    #[test]
    fn random_5x3() {
        let a = gaussian_matrix(5, 3, 42);
        let (q, r) = qr_householder(&a).unwrap();
        assert!((&q.matmul(&r) - &a).norm_fro() <= 1e-14 * a.norm_fro());
        assert!(orthogonality_error(&q) <= 1e-14);
        for j in 0..3 {
            for i in j + 1..3 {
                assert_eq!(r.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn wide_input_rejected_for_thin_form() {
        assert!(qr_householder(&DenseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn completion_is_orthogonal() {
        let (q, _) = qr_householder(&gaussian_matrix(6, 2, 3)).unwrap();
        let full = complete_orthonormal(&q, 6);
        assert_eq!(full.col(0), q.col(0));
        assert!(orthogonality_error(&full) < 1e-14);
    }
}
