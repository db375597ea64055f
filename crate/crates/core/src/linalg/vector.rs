//! Small slice helpers shared by the kernels.

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += a * x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn scale(a: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= a);
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn scaled(a: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| a * v).collect()
}

/// `sqrt(xᵀ C x)` with negative roundoff clamped to zero.
pub fn seminorm(c: &super::DenseMatrix, x: &[f64]) -> f64 {
    dot(x, &c.matvec(x)).max(0.0).sqrt()
}

/// Relative difference `‖x - y‖ / ‖y‖` (absolute when `y = 0`).
pub fn rel_diff(x: &[f64], y: &[f64]) -> f64 {
    let d = norm2(&sub(x, y));
    let n = norm2(y);
    if n == 0.0 {
        d
    } else {
        d / n
    }
}
