//! Seeded random source for test problems.
//!
//! Xoshiro256++ seeded through SplitMix64, with standard normals drawn by the
//! Box-Muller transform so that a seed maps to the same numbers on every run.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::linalg::DenseMatrix;

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: Xoshiro256PlusPlus,
    spare: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform integer in `lo..hi`.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        self.inner.gen_range(lo..hi)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - U lies in (0, 1], keeping the log finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> DenseMatrix {
        let data = self.normal_vec(rows * cols);
        DenseMatrix::new(rows, cols, data).expect("normals are finite")
    }

    /// `rows x cols` matrix of exact rank `rank` (product of two Gaussian factors).
    pub fn rank_deficient(&mut self, rows: usize, cols: usize, rank: usize) -> DenseMatrix {
        let left = self.normal_matrix(rows, rank);
        let right = self.normal_matrix(rank, cols);
        left.matmul(&right)
    }
}
