//! Dense and sparse kernels: SVD, QR, Cholesky, pseudoinverse, projectors,
//! PSD square roots and classical LSQR.

mod decomp;
mod dense;
mod lsqr;
mod qr;
mod sparse;
pub(crate) mod svd;
pub mod vector;

#[cfg(test)]
pub(crate) mod testutil;

pub use decomp::{
    cholesky_solve, cholesky_spd, cholesky_spd_with, nullspace_basis, pinv, pinv_with,
    projector_range, psd_sqrt, psd_sqrt_with,
};
pub use dense::DenseMatrix;
pub use lsqr::{standard_lsqr, LsqrOutcome, LsqrStatus};
pub use qr::{complete_orthonormal, qr_householder, qr_householder_full};
pub use sparse::SparseMatrix;
pub use svd::{norm2, svd, svd_with, symmetric_eigen, LinalgConfig, RankTolerance, SvdFactors};
