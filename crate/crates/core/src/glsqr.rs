//! Generalized LSQR: Givens QR of the growing bidiagonal from [`crate::ggkb`]
//! with the recursive solution update and a cheap residual estimate.
//!
//! At step `k` the iterate is `x_k = V_k y_k` with `y_k = argmin ‖B_k y − β₁e₁‖₂`.
//! The quantity `‖𝒜* r_k‖_G = α_{k+1} β_{k+1} |e_kᵀ y_k|` is available from the
//! rotations alone: the last entry of `y_k` is `φ_k / ρ_k`.

use std::path::Path;

use serde::Serialize;

use crate::error::{GlsError, Result};
use crate::ggkb::{ggkb_init_with, ggkb_step, BidiagState, GdagStrategy};
use crate::gsvd::{gsvd_pair, sigma_max_ca};
use crate::linalg::{pinv, qr_householder, vector, DenseMatrix};
use crate::wpinv::{check_gls_criterion, GlsProblem};

/// Rotation state after step `k`.
#[derive(Debug, Clone)]
pub struct GivensState {
    pub rho_bar: f64,
    pub phi_bar: f64,
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    /// `ρ_k` of the last rotation.
    pub rho: f64,
    /// `φ_k` of the last rotation.
    pub phi: f64,
    pub c: f64,
    pub s: f64,
}

impl GivensState {
    fn start(state: &BidiagState) -> Self {
        Self {
            rho_bar: state.alphas[0],
            phi_bar: state.betas[0],
            w: state.v[0].clone(),
            x: vec![0.0; state.v[0].len()],
            rho: 0.0,
            phi: 0.0,
            c: 1.0,
            s: 0.0,
        }
    }

    /// `e_kᵀ y_k`
    pub fn last_coefficient(&self) -> f64 {
        if self.rho == 0.0 {
            0.0
        } else {
            self.phi / self.rho
        }
    }

    /// Applies the rotation for step `i` (1-based) of the bidiagonalization.
    fn advance(&mut self, state: &BidiagState, i: usize) {
        let beta = state.betas[i];
        let alpha = state.alphas[i];
        let rho = self.rho_bar.hypot(beta);
        let c = self.rho_bar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        self.rho_bar = -c * alpha;
        self.phi = c * self.phi_bar;
        self.phi_bar *= s;
        self.rho = rho;
        self.c = c;
        self.s = s;

        vector::axpy(self.phi / rho, &self.w, &mut self.x);
        if let Some(v_next) = state.v.get(i) {
            let ratio = theta / rho;
            for (wi, vi) in self.w.iter_mut().zip(v_next) {
                *wi = vi - ratio * *wi;
            }
        }
    }
}

/// `α_{k+1} β_{k+1} |e_kᵀ y_k|` after step `k`.
pub fn residual_estimate(state: &BidiagState, givens: &GivensState) -> f64 {
    let k = state.steps();
    state.alphas[k] * state.betas[k] * givens.last_coefficient().abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ToleranceMet,
    GgkbTerminated,
    MaxIter,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ToleranceMet => "tolerance_met",
            Self::GgkbTerminated => "ggkb_terminated",
            Self::MaxIter => "max_iter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormSource {
    GsvdExact,
    PowerIteration { iters: usize, tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorNormEstimate {
    pub value: f64,
    pub source: NormSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMethod {
    /// GSVD for `n ≤ 200` with `M = I`, power iteration otherwise.
    Auto,
    GsvdExact,
    PowerIteration,
}

/// A normalized estimate this small means `‖𝒜*r_k‖_G` vanished to working
/// precision, so gGKB has terminated numerically. Steps past this point build
/// on rounding noise, whose tiny `c` directions can inflate `x` without bound.
pub const TERMINATION_FLOOR: f64 = f64::EPSILON;

pub const POWER_MAX_ITER: usize = 200;
pub const POWER_TOL: f64 = 1e-10;

/// `‖𝒜‖`, the norm of `v ↦ P_R(P) A v` from `(R(G), ‖·‖_G)` to `(R(P), ‖·‖_P)`.
pub fn operator_norm(
    prob: &GlsProblem,
    strategy: &GdagStrategy,
    method: NormMethod,
) -> Result<OperatorNormEstimate> {
    let method = match method {
        NormMethod::Auto if prob.weight_is_identity() && prob.ncols() <= 200 => NormMethod::GsvdExact,
        NormMethod::Auto => NormMethod::PowerIteration,
        other => other,
    };
    match method {
        NormMethod::GsvdExact => {
            if !prob.weight_is_identity() {
                return Err(GlsError::MethodUnsupported(
                    "the GSVD operator norm requires M = I".into(),
                ));
            }
            let f = gsvd_pair(prob.a(), prob.l())?;
            Ok(OperatorNormEstimate {
                value: sigma_max_ca(&f),
                source: NormSource::GsvdExact,
            })
        }
        _ => power_iteration(prob, strategy, POWER_MAX_ITER, POWER_TOL),
    }
}

/// Power iteration on `v ↦ G†AᵀPAv`, whose eigenvalues on `R(G)` are `c_j²`,
/// seeded with `G†AᵀPb`.
///
/// The estimate is the Rayleigh-Ritz value over the span of all iterates
/// rather than the Rayleigh quotient of the last one. The span is built by
/// the gGKB process, whose `v_k` is a G-orthonormal basis of exactly these
/// iterates, so the value is `σ_max(B_k)` at no extra operator applications.
/// Plain power iteration stalls when the leading `c_j` cluster.
pub fn power_iteration(
    prob: &GlsProblem,
    strategy: &GdagStrategy,
    max_iter: usize,
    tol: f64,
) -> Result<OperatorNormEstimate> {
    let mut state = ggkb_init_with(prob, strategy, true)?;
    if state.terminated && state.steps() == 0 && state.alphas[0] == 0.0 {
        // b carries no information; any vector with a component in R(G) will do
        let ones = vec![1.0; prob.ncols()];
        let seeded = prob.with_rhs(prob.a().matvec(&ones))?;
        return power_iteration_seeded(&seeded, strategy, max_iter, tol);
    }
    run_power(&mut state, prob, strategy, max_iter, tol)
}

fn power_iteration_seeded(
    prob: &GlsProblem,
    strategy: &GdagStrategy,
    max_iter: usize,
    tol: f64,
) -> Result<OperatorNormEstimate> {
    let mut state = ggkb_init_with(prob, strategy, true)?;
    run_power(&mut state, prob, strategy, max_iter, tol)
}

fn run_power(
    state: &mut BidiagState,
    prob: &GlsProblem,
    strategy: &GdagStrategy,
    max_iter: usize,
    tol: f64,
) -> Result<OperatorNormEstimate> {
    let source = |iters| NormSource::PowerIteration { iters, tol };
    let mut lambda = state.alphas[0].powi(2);
    for it in 1..=max_iter {
        if state.terminated {
            return Ok(OperatorNormEstimate {
                value: lambda.sqrt(),
                source: source(it - 1),
            });
        }
        ggkb_step(state, prob, strategy)?;
        let next = bidiag_max_eig(state);
        let change = (next - lambda).abs();
        lambda = next;
        if change <= tol * lambda || lambda == 0.0 {
            return Ok(OperatorNormEstimate {
                value: lambda.sqrt(),
                source: source(it),
            });
        }
    }
    Ok(OperatorNormEstimate {
        value: lambda.sqrt(),
        source: source(max_iter),
    })
}

/// Largest eigenvalue of `B_kᵀB_k`, tridiagonal with diagonal `α_j² + β_{j+1}²`
/// and off-diagonal `α_{j+1}β_{j+1}`, by Sturm-count bisection.
fn bidiag_max_eig(state: &BidiagState) -> f64 {
    let k = state.steps();
    let (al, be) = (&state.alphas, &state.betas);
    let diag: Vec<f64> = (0..k).map(|j| al[j] * al[j] + be[j + 1] * be[j + 1]).collect();
    let off: Vec<f64> = (0..k.saturating_sub(1)).map(|j| al[j + 1] * be[j + 1]).collect();
    tridiag_max_eig(&diag, &off)
}

/// Largest eigenvalue of a symmetric tridiagonal matrix.
fn tridiag_max_eig(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    if n == 0 {
        return 0.0;
    }
    let radius = |i: usize| {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { off[i].abs() } else { 0.0 };
        left + right
    };
    let mut lo = (0..n).map(|i| diag[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..n).map(|i| diag[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    let floor = f64::MIN_POSITIVE * hi.abs().max(1.0);
    // number of eigenvalues strictly below x
    let below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..n {
            let e2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
            d = diag[i] - x - if i > 0 { e2 / d } else { 0.0 };
            if d == 0.0 {
                d = -floor;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    while hi - lo > 2.0 * f64::EPSILON * hi.abs().max(lo.abs()) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) < n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi.max(0.0)
}

#[derive(Debug, Clone)]
pub struct GlsqrOptions {
    pub tol: f64,
    /// `None` means `min(m, n)`, a cheap bound on `min(rank G, rank P)`.
    pub max_iter: Option<usize>,
    /// Record `‖𝒜* r_k‖_G` evaluated directly (dense, debug use).
    pub true_residual: bool,
    /// Keep every iterate `x_k`.
    pub record_iterates: bool,
    pub reorthogonalize: bool,
}

impl Default for GlsqrOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            true_residual: false,
            record_iterates: false,
            reorthogonalize: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// `α_{k+1} β_{k+1} |e_kᵀ y_k| / (‖𝒜‖ β₁)` per iteration.
    pub residual_estimate_history: Vec<f64>,
    /// Same quantity evaluated directly, when requested.
    pub true_residual_history: Option<Vec<f64>>,
    pub x_norm_history: Vec<f64>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub iterates: Vec<Vec<f64>>,
    pub operator_norm: OperatorNormEstimate,
    pub k_t: Option<usize>,
    pub inner_cap_hits: usize,
}

impl SolveReport {
    pub fn final_estimate(&self) -> Option<f64> {
        self.residual_estimate_history.last().copied()
    }

    /// Columns `k, res_estimate, res_true, x_norm, alpha, beta`; `alpha` and
    /// `beta` are `α_{k+1}` and `β_{k+1}`.
    pub fn write_history_csv(&self, path: &Path) -> Result<()> {
        let io_err = |e: csv::Error| GlsError::Io {
            path: path.to_path_buf(),
            source: e.into(),
        };
        let mut w = csv::Writer::from_path(path).map_err(io_err)?;
        w.write_record(["k", "res_estimate", "res_true", "x_norm", "alpha", "beta"])
            .map_err(io_err)?;
        for k in 0..self.iterations {
            let res_true = self
                .true_residual_history
                .as_ref()
                .map(|h| format!("{:e}", h[k]))
                .unwrap_or_default();
            let scalar = |v: &[f64]| v.get(k + 1).map(|x| format!("{x:e}")).unwrap_or_default();
            w.write_record([
                (k + 1).to_string(),
                format!("{:e}", self.residual_estimate_history[k]),
                res_true,
                format!("{:e}", self.x_norm_history[k]),
                scalar(&self.alphas),
                scalar(&self.betas),
            ])
            .map_err(io_err)?;
        }
        w.flush().map_err(|e| GlsError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

/// Direct `‖G†AᵀP(b − Ax)‖_G`.
pub fn direct_residual(prob: &GlsProblem, g_pinv: &DenseMatrix, x: &[f64]) -> f64 {
    let r = vector::sub(prob.b(), &prob.a().matvec(x));
    let z = g_pinv.matvec(&prob.at_p(&r));
    prob.g_norm(&z)
}

pub fn glsqr_solve(
    prob: &GlsProblem,
    strategy: &GdagStrategy,
    tol: f64,
    max_iter: usize,
    norm_est: OperatorNormEstimate,
) -> Result<SolveReport> {
    let opts = GlsqrOptions {
        tol,
        max_iter: Some(max_iter),
        ..GlsqrOptions::default()
    };
    glsqr_solve_with(prob, strategy, &opts, norm_est)
}

pub fn glsqr_solve_with(
    prob: &GlsProblem,
    strategy: &GdagStrategy,
    opts: &GlsqrOptions,
    norm_est: OperatorNormEstimate,
) -> Result<SolveReport> {
    if !(opts.tol > 0.0) {
        return Err(GlsError::InvalidArgument(format!(
            "tol must be positive, got {}",
            opts.tol
        )));
    }
    let n = prob.ncols();
    let max_iter = opts.max_iter.unwrap_or(prob.nrows().min(n));
    let g_pinv = if opts.true_residual {
        Some(pinv(prob.g(), prob.rank_tol())?)
    } else {
        None
    };

    let mut state = ggkb_init_with(prob, strategy, opts.reorthogonalize)?;
    let mut report = SolveReport {
        x: vec![0.0; n],
        iterations: 0,
        stop_reason: StopReason::GgkbTerminated,
        residual_estimate_history: Vec::new(),
        true_residual_history: g_pinv.as_ref().map(|_| Vec::new()),
        x_norm_history: Vec::new(),
        alphas: Vec::new(),
        betas: Vec::new(),
        iterates: Vec::new(),
        operator_norm: norm_est,
        k_t: None,
        inner_cap_hits: 0,
    };
    if state.terminated {
        report.alphas = state.alphas.clone();
        report.betas = state.betas.clone();
        report.k_t = state.k_t;
        report.inner_cap_hits = state.inner_cap_hits;
        return Ok(report);
    }

    let scale = norm_est.value * state.betas[0];
    let mut givens = GivensState::start(&state);
    let mut stop = StopReason::MaxIter;
    let mut i = 0;
    while i < max_iter {
        i += 1;
        ggkb_step(&mut state, prob, strategy)?;
        givens.advance(&state, i);
        let est = residual_estimate(&state, &givens);
        let normalized = if scale > 0.0 { est / scale } else { 0.0 };
        report.residual_estimate_history.push(normalized);
        report.x_norm_history.push(vector::norm2(&givens.x));
        if let (Some(gp), Some(h)) = (&g_pinv, report.true_residual_history.as_mut()) {
            let direct = direct_residual(prob, gp, &givens.x);
            h.push(if scale > 0.0 { direct / scale } else { 0.0 });
        }
        if opts.record_iterates {
            report.iterates.push(givens.x.clone());
        }
        if state.terminated {
            stop = StopReason::GgkbTerminated;
            break;
        }
        if normalized <= opts.tol {
            stop = StopReason::ToleranceMet;
            break;
        }
        if normalized <= TERMINATION_FLOOR {
            stop = StopReason::GgkbTerminated;
            break;
        }
    }

    report.x = givens.x;
    report.iterations = i;
    report.stop_reason = stop;
    report.alphas = state.alphas.clone();
    report.betas = state.betas.clone();
    report.k_t = state.k_t;
    report.inner_cap_hits = state.inner_cap_hits;
    Ok(report)
}

/// `x_k = V_k y_k` with `y_k` from a dense QR solve of `min ‖B_k y − β₁e₁‖₂`.
pub fn explicit_iterate(state: &BidiagState, k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if k == 0 || k > state.v.len() || k >= state.alphas.len() {
        return Err(GlsError::InvalidArgument(format!(
            "no bidiagonal of order {k} available"
        )));
    }
    let b = state.b_matrix(k);
    let (q, r) = qr_householder(&b)?;
    let mut rhs = q.tr_matvec(&{
        let mut e = vec![0.0; k + 1];
        e[0] = state.betas[0];
        e
    });
    for i in (0..k).rev() {
        let mut s = rhs[i];
        for j in i + 1..k {
            s -= r.get(i, j) * rhs[j];
        }
        rhs[i] = s / r.get(i, i);
    }
    let x = state.v_matrix(k).matvec(&rhs);
    Ok((x, rhs))
}

/// `x` solves the problem and lies in `R(G)`, both at `tol`.
pub fn certify_solution(prob: &GlsProblem, report: &SolveReport, tol: f64) -> Result<bool> {
    Ok(check_gls_criterion(prob, &report.x, tol)?.is_min_norm_solution())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ggkb::ggkb_run;
    use crate::linalg::{nullspace_basis, projector_range, RankTolerance};
    use crate::rng::SeededRng;
    use crate::wpinv::{wpinv_apply, WpinvMethod};

    fn problem(seed: u64, m: usize, n: usize, p: usize) -> GlsProblem {
        let mut rng = SeededRng::new(seed);
        GlsProblem::unweighted(rng.normal_matrix(m, n), rng.normal_matrix(p, n), rng.normal_vec(m)).unwrap()
    }

    fn solve(prob: &GlsProblem, opts: &GlsqrOptions) -> SolveReport {
        let strat = GdagStrategy::dense_pinv(prob).unwrap();
        let norm = operator_norm(prob, &strat, NormMethod::Auto).unwrap();
        glsqr_solve_with(prob, &strat, opts, norm).unwrap()
    }

    #[test]
    fn identity_system_in_one_iteration() {
        let b = vec![1.0, -2.0, 0.5];
        let prob = GlsProblem::unweighted(DenseMatrix::identity(3), DenseMatrix::zeros(1, 3), b.clone()).unwrap();
        let rep = solve(&prob, &GlsqrOptions::default());
        assert_eq!(rep.iterations, 1);
        assert!(vector::rel_diff(&rep.x, &b) < 1e-15);
        assert_eq!(rep.residual_estimate_history.len(), 1);
    }

    #[test]
    fn operator_norm_examples() {
        let prob = GlsProblem::unweighted(DenseMatrix::identity(3), DenseMatrix::zeros(1, 3), vec![1.0, 1.0, 1.0]).unwrap();
        let strat = GdagStrategy::dense_pinv(&prob).unwrap();
        for method in [NormMethod::GsvdExact, NormMethod::PowerIteration] {
            let est = operator_norm(&prob, &strat, method).unwrap();
            assert!((est.value - 1.0).abs() < 1e-12);
        }

        let prob = GlsProblem::unweighted(
            DenseMatrix::from_diag(2, 2, &[2.0, 1.0]),
            DenseMatrix::identity(2),
            vec![1.0, 1.0],
        )
        .unwrap();
        let strat = GdagStrategy::dense_pinv(&prob).unwrap();
        let want = 2.0 / 5f64.sqrt();
        for method in [NormMethod::GsvdExact, NormMethod::PowerIteration] {
            let est = operator_norm(&prob, &strat, method).unwrap();
            assert!((est.value - want).abs() <= 1e-8 * want, "{method:?} {}", est.value);
        }

        let prob = GlsProblem::unweighted(DenseMatrix::zeros(3, 2), DenseMatrix::identity(2), vec![1.0, 0.0, 0.0]).unwrap();
        let strat = GdagStrategy::dense_pinv(&prob).unwrap();
        for method in [NormMethod::GsvdExact, NormMethod::PowerIteration] {
            assert_eq!(operator_norm(&prob, &strat, method).unwrap().value, 0.0);
        }
    }

    #[test]
    fn stops_at_numerical_termination() {
        use crate::problems::{generate, sprandn_like, FunctionKind, RegularizerKind};
        let a = sprandn_like(200, 200, 0.1, 150, 70_001).unwrap();
        let gp = generate(a, &RegularizerKind::L1, FunctionKind::Trig, 70_002).unwrap();
        let opts = GlsqrOptions {
            tol: f64::MIN_POSITIVE,
            max_iter: Some(60),
            ..GlsqrOptions::default()
        };
        let rep = solve(&gp.problem, &opts);
        assert_eq!(rep.stop_reason, StopReason::GgkbTerminated);
        assert!(rep.iterations < 60);
        assert!(vector::rel_diff(&rep.x, &gp.x_true) <= 1e-8);
    }

    #[test]
    fn tridiagonal_bisection() {
        // tridiag(-1, 2, -1) has largest eigenvalue 2 + 2cos(π/(n+1))
        let n = 12;
        let want = 2.0 + 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let got = tridiag_max_eig(&vec![2.0; n], &vec![-1.0; n - 1]);
        assert!((got - want).abs() <= 1e-14 * want);
        assert_eq!(tridiag_max_eig(&[3.0], &[]), 3.0);
        assert_eq!(tridiag_max_eig(&[], &[]), 0.0);
    }

    #[test]
    fn power_iteration_resolves_clustered_spectrum() {
        // c = 2/√5 and c ≈ 2/√5 − 1e-6 cluster; a plain Rayleigh quotient stalls here
        let d = 2.0 - 5e-6;
        let a = DenseMatrix::from_diag(3, 3, &[2.0, d, 0.5]);
        let prob = GlsProblem::unweighted(a, DenseMatrix::identity(3), vec![1.0, 1.0, 1.0]).unwrap();
        let strat = GdagStrategy::dense_pinv(&prob).unwrap();
        let est = power_iteration(&prob, &strat, POWER_MAX_ITER, POWER_TOL).unwrap();
        let want = 2.0 / 5f64.sqrt();
        assert!((est.value - want).abs() <= 1e-12 * want, "{}", est.value);
    }

    #[test]
    fn gsvd_norm_rejects_weights() {
        let mut rng = SeededRng::new(2);
        let prob = GlsProblem::new(rng.normal_matrix(4, 3), Some(rng.normal_matrix(4, 4)), rng.normal_matrix(2, 3), rng.normal_vec(4)).unwrap();
        let strat = GdagStrategy::dense_pinv(&prob).unwrap();
        assert!(operator_norm(&prob, &strat, NormMethod::GsvdExact).is_err());
        let est = operator_norm(&prob, &strat, NormMethod::Auto).unwrap();
        assert!(matches!(est.source, NormSource::PowerIteration { .. }));
    }

    #[test]
    fn runs_to_exact_solution() {
        let prob = problem(31, 15, 10, 4);
        let rep = solve(&prob, &GlsqrOptions { tol: 1e-14, ..GlsqrOptions::default() });
        let oracle = wpinv_apply(&prob, WpinvMethod::Elden).unwrap();
        assert!(vector::rel_diff(&rep.x, &oracle) <= 1e-9);
        assert!(certify_solution(&prob, &rep, 1e-8).unwrap());
    }

    #[test]
    fn estimate_matches_direct_value() {
        let prob = problem(32, 20, 12, 6);
        let rep = solve(&prob, &GlsqrOptions { tol: 1e-14, true_residual: true, ..GlsqrOptions::default() });
        let truth = rep.true_residual_history.as_ref().unwrap();
        assert!((rep.residual_estimate_history[0] - truth[0]).abs() <= 1e-10 * truth[0]);
        for (e, t) in rep.residual_estimate_history.iter().zip(truth) {
            if *t > 1e-8 {
                assert!((e - t).abs() <= 1e-8 * t, "{e} vs {t}");
            }
        }
    }

    #[test]
    fn recursion_matches_explicit_solve() {
        let prob = problem(33, 40, 30, 10);
        let strat = GdagStrategy::dense_pinv(&prob).unwrap();
        let norm = operator_norm(&prob, &strat, NormMethod::Auto).unwrap();
        let opts = GlsqrOptions { tol: 1e-300, max_iter: Some(20), record_iterates: true, ..GlsqrOptions::default() };
        let rep = glsqr_solve_with(&prob, &strat, &opts, norm).unwrap();
        let state = ggkb_run(&prob, &strat, 20, true).unwrap();
        for k in 1..=rep.iterations.min(state.v.len()) {
            let (x, y) = explicit_iterate(&state, k).unwrap();
            assert!(vector::rel_diff(&rep.iterates[k - 1], &x) <= 1e-10, "k = {k}");
            let est = state.alphas[k] * state.betas[k] * y[k - 1].abs() / (norm.value * state.betas[0]);
            assert!((est - rep.residual_estimate_history[k - 1]).abs() <= 1e-10 * est + 1e-20, "k = {k}");
        }
    }

    #[test]
    fn iterates_stay_in_range_and_residual_decreases() {
        let mut rng = SeededRng::new(34);
        let null = nullspace_basis(&rng.normal_matrix(2, 12), RankTolerance::Auto).unwrap();
        let a = rng.normal_matrix(16, 10).matmul(&null.transpose());
        let l = rng.normal_matrix(4, 10).matmul(&null.transpose());
        let prob = GlsProblem::unweighted(a, l, rng.normal_vec(16)).unwrap();
        let rep = solve(&prob, &GlsqrOptions { tol: 1e-14, record_iterates: true, ..GlsqrOptions::default() });
        let proj = projector_range(prob.g(), RankTolerance::Auto).unwrap();
        let mut prev = f64::INFINITY;
        for x in &rep.iterates {
            let out = vector::sub(x, &proj.matvec(x));
            assert!(vector::norm2(&out) <= 1e-10 * vector::norm2(x));
            let r = vector::sub(&prob.a().matvec(x), prob.b());
            let res = prob.p_norm(&r);
            assert!(res <= prev + 1e-12 * prev.min(1e300));
            prev = res;
        }
        assert!(certify_solution(&prob, &rep, 1e-8).unwrap());
    }

    #[test]
    fn weighted_problem_with_null_space_in_m() {
        let mut rng = SeededRng::new(35);
        let w = rng.rank_deficient(6, 9, 5);
        let prob = GlsProblem::new(rng.normal_matrix(9, 7), Some(w), rng.rank_deficient(3, 7, 2), rng.normal_vec(9)).unwrap();
        let rep = solve(&prob, &GlsqrOptions { tol: 1e-14, ..GlsqrOptions::default() });
        let oracle = wpinv_apply(&prob, WpinvMethod::Elden).unwrap();
        assert!(vector::rel_diff(&rep.x, &oracle) <= 1e-8);
    }

    #[test]
    fn rhs_in_null_space_of_weight_gives_zero() {
        let mut rng = SeededRng::new(36);
        let m = DenseMatrix::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let prob = GlsProblem::new(rng.normal_matrix(3, 2), Some(m), rng.normal_matrix(1, 2), vec![0.0, 0.0, 4.0]).unwrap();
        let rep = solve(&prob, &GlsqrOptions::default());
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.x, vec![0.0, 0.0]);
        assert!(certify_solution(&prob, &rep, 1e-8).unwrap());
    }

    #[test]
    fn history_csv_layout() {
        let prob = problem(37, 10, 6, 3);
        let rep = solve(&prob, &GlsqrOptions::default());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        rep.write_history_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "k,res_estimate,res_true,x_norm,alpha,beta");
        assert_eq!(lines.count(), rep.iterations);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let prob = problem(38, 5, 4, 2);
        let strat = GdagStrategy::dense_pinv(&prob).unwrap();
        let norm = OperatorNormEstimate { value: 1.0, source: NormSource::GsvdExact };
        assert!(glsqr_solve(&prob, &strat, 0.0, 10, norm).is_err());
    }
}
