use crate::linalg::DenseMatrix;
use crate::rng::SeededRng;

pub fn gaussian_matrix(m: usize, n: usize, seed: u64) -> DenseMatrix {
    SeededRng::new(seed).normal_matrix(m, n)
}

/// `max |QᵀQ - I|`
pub fn orthogonality_error(q: &DenseMatrix) -> f64 {
    (&q.tr_matmul(q) - &DenseMatrix::identity(q.cols())).max_abs()
}
