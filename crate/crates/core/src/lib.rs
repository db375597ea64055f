//! Generalized least squares: weighted pseudoinverses, the GSVD closed form
//! and the generalized LSQR iteration.
//!
//! The problem solved throughout is
//!
//! ```text
//! min ‖L x‖₂   subject to   ‖M (A x − b)‖₂ = min
//! ```
//!
//! whose minimum 2-norm solution is `x† = A_ML† b`. Three direct routes
//! ([`wpinv::wpinv_elden`], [`gsvd::wpinv_via_gsvd`], [`wpinv::wpinv_limit`])
//! and one iterative route ([`glsqr::glsqr_solve`]) compute it; the
//! generalized Moore-Penrose checker in [`wpinv::check_gmpe`] certifies any
//! candidate.

pub mod error;
pub mod linalg;
pub mod problems;
pub mod ggkb;
pub mod glsqr;
pub mod gsvd;
pub mod io;
pub mod rng;
pub mod wpinv;

pub use error::{GlsError, Result};
pub use linalg::{DenseMatrix, RankTolerance, SparseMatrix};
