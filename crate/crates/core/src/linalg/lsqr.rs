//! Classical LSQR for a symmetric operator given as a matrix-vector callback.
//!
//! Used as the inexact inner solver for `G⁺ s̄`. The stopping rule follows the
//! MATLAB `lsqr` convention: stop when `‖r‖ ≤ τ‖b‖` or, for inconsistent
//! systems, when `‖Gᵀr‖ ≤ τ ‖G‖ ‖r‖` with `‖G‖` estimated from the bidiagonal.

use crate::linalg::vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsqrStatus {
    /// Residual or normal-residual test satisfied, or the bidiagonalization terminated.
    Converged,
    /// Stopped on the iteration cap; the iterate is returned anyway.
    IterationCap,
}

#[derive(Debug, Clone)]
pub struct LsqrOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub status: LsqrStatus,
    pub residual_norm: f64,
}

/// Approximates the minimum-norm solution of `min ‖G s − rhs‖₂` from `s = 0`.
pub fn standard_lsqr<F>(apply: F, rhs: &[f64], tau: f64, max_iter: usize) -> LsqrOutcome
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let bnorm = vector::norm2(rhs);
    let done = |x: Vec<f64>, iterations, residual_norm| LsqrOutcome {
        x,
        iterations,
        status: LsqrStatus::Converged,
        residual_norm,
    };
    if bnorm == 0.0 {
        return done(x, 0, 0.0);
    }
    let mut beta = bnorm;
    let mut u = vector::scaled(1.0 / beta, rhs);
    let mut v = apply(&u);
    let mut alpha = vector::norm2(&v);
    if alpha == 0.0 {
        return done(x, 0, bnorm);
    }
    vector::scale(1.0 / alpha, &mut v);
    let mut w = v.clone();
    let mut phi_bar = beta;
    let mut rho_bar = alpha;
    let mut anorm_sq = 0.0;

    for itn in 1..=max_iter {
        // u ← G v − α u
        let gv = apply(&v);
        for (ui, gi) in u.iter_mut().zip(&gv) {
            *ui = gi - alpha * *ui;
        }
        beta = vector::norm2(&u);
        if beta > 0.0 {
            vector::scale(1.0 / beta, &mut u);
        }
        anorm_sq += alpha * alpha + beta * beta;

        // v ← G u − β v
        if beta > 0.0 {
            let gu = apply(&u);
            for (vi, gi) in v.iter_mut().zip(&gu) {
                *vi = gi - beta * *vi;
            }
            alpha = vector::norm2(&v);
            if alpha > 0.0 {
                vector::scale(1.0 / alpha, &mut v);
            }
        } else {
            alpha = 0.0;
        }

        let rho = rho_bar.hypot(beta);
        let c = rho_bar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        rho_bar = -c * alpha;
        let phi = c * phi_bar;
        phi_bar *= s;

        vector::axpy(phi / rho, &w, &mut x);
        let ratio = theta / rho;
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi = vi - ratio * *wi;
        }

        let rnorm = phi_bar.abs();
        let arnorm = alpha * c.abs() * rnorm;
        let anorm = anorm_sq.sqrt();
        let converged = beta == 0.0
            || alpha == 0.0
            || rnorm <= tau * bnorm
            || arnorm <= tau * anorm * rnorm;
        if converged {
            return done(x, itn, rnorm);
        }
        if itn == max_iter {
            return LsqrOutcome {
                x,
                iterations: itn,
                status: LsqrStatus::IterationCap,
                residual_norm: rnorm,
            };
        }
    }
    LsqrOutcome {
        x,
        iterations: 0,
        status: LsqrStatus::IterationCap,
        residual_norm: bnorm,
    }
}
