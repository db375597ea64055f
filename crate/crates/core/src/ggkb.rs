//! Generalized Golub-Kahan bidiagonalization of `v ↦ P_R(P) A v` between
//! `(R(G), ⟨·,·⟩_G)` and `(R(P), ⟨·,·⟩_P)`.
//!
//! Starting from `β₁ũ₁ = b`, `α₁v₁ = G†AᵀPũ₁`, each step computes
//!
//! ```text
//! β_{i+1} ũ_{i+1} = A v_i − α_i ũ_i
//! α_{i+1} v_{i+1} = G†AᵀP ũ_{i+1} − β_{i+1} v_i
//! ```
//!
//! with `β = ‖·‖_P` and `α = ‖·‖_G`. The process stops at the first `k` with
//! `α_{k+1} β_{k+1} = 0`.

use crate::error::{GlsError, Result};
use crate::linalg::{
    cholesky_solve, cholesky_spd, nullspace_basis, pinv, qr_householder, standard_lsqr, svd,
    vector, DenseMatrix, LsqrStatus,
};
use crate::wpinv::GlsProblem;

/// Relative size below which `α` or `β` counts as zero.
pub const BREAKDOWN_TOL: f64 = 1e-13;

/// How `G† y` is applied.
#[derive(Debug, Clone)]
pub enum GdagStrategy {
    /// Precomputed `G†`.
    DensePinv { g_pinv: DenseMatrix },
    /// Cholesky factor of an SPD `G`.
    Cholesky { factor: DenseMatrix },
    /// LSQR on `min ‖G s − y‖₂` from `s = 0`.
    InnerLsqr { tau: f64, max_iter: usize },
}

impl GdagStrategy {
    pub fn dense_pinv(prob: &GlsProblem) -> Result<Self> {
        Ok(Self::DensePinv {
            g_pinv: pinv(prob.g(), prob.rank_tol())?.symmetrize(),
        })
    }

    /// Fails with [`GlsError::IndefiniteMatrix`] unless `G` is SPD.
    pub fn cholesky(prob: &GlsProblem) -> Result<Self> {
        Ok(Self::Cholesky {
            factor: cholesky_spd(prob.g())?,
        })
    }

    pub fn inner_lsqr(tau: f64, max_iter: usize) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(GlsError::InvalidArgument(format!(
                "inner tolerance must be positive, got {tau}"
            )));
        }
        Ok(Self::InnerLsqr { tau, max_iter })
    }

    /// `tau = 1e-12`, `max_iter = 4n`.
    pub fn inner_lsqr_default(n: usize) -> Self {
        Self::InnerLsqr {
            tau: 1e-12,
            max_iter: 4 * n.max(1),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::DensePinv { .. } => "dense",
            Self::Cholesky { .. } => "chol",
            Self::InnerLsqr { .. } => "lsqr",
        }
    }

    /// Inner tolerance, when the strategy is iterative.
    pub fn inner_tau(&self) -> Option<f64> {
        match self {
            Self::InnerLsqr { tau, .. } => Some(*tau),
            _ => None,
        }
    }

    /// `G† y`; the flag is set when the inner solver hit its iteration cap.
    pub fn apply(&self, g: &DenseMatrix, y: &[f64]) -> (Vec<f64>, bool) {
        match self {
            Self::DensePinv { g_pinv } => (g_pinv.matvec(y), false),
            Self::Cholesky { factor } => (cholesky_solve(factor, y), false),
            Self::InnerLsqr { tau, max_iter } => {
                let out = standard_lsqr(|x: &[f64]| g.matvec(x), y, *tau, *max_iter);
                (out.x, out.status == LsqrStatus::IterationCap)
            }
        }
    }
}

/// Running state of the bidiagonalization after `k` completed steps.
#[derive(Debug, Clone)]
pub struct BidiagState {
    /// `α_1 … α_{k+1}`
    pub alphas: Vec<f64>,
    /// `β_1 … β_{k+1}`
    pub betas: Vec<f64>,
    /// `v_1 … v_{k+1}` (the last one is absent after an `α` breakdown).
    pub v: Vec<Vec<f64>>,
    /// `ũ_1 … ũ_{k+1}` (the last one is absent after a `β` breakdown).
    pub u_tilde: Vec<Vec<f64>>,
    pub terminated: bool,
    pub k_t: Option<usize>,
    /// Number of `G†` applications that stopped on the inner iteration cap.
    pub inner_cap_hits: usize,
    pub reorthogonalize: bool,
    gv: Vec<Vec<f64>>,
    pu: Vec<Vec<f64>>,
    scale: f64,
}

impl BidiagState {
    /// Completed steps `k` (so `α_{k+1}`, `β_{k+1}` are the newest scalars).
    pub fn steps(&self) -> usize {
        self.alphas.len().saturating_sub(1)
    }

    /// `V_k` with `k` columns.
    pub fn v_matrix(&self, k: usize) -> DenseMatrix {
        DenseMatrix::from_columns(self.n(), &self.v[..k])
    }

    pub fn u_tilde_matrix(&self, k: usize) -> DenseMatrix {
        DenseMatrix::from_columns(self.m(), &self.u_tilde[..k])
    }

    /// Lower bidiagonal `B_k`, (k+1)×k.
    pub fn b_matrix(&self, k: usize) -> DenseMatrix {
        let mut b = DenseMatrix::zeros(k + 1, k);
        for j in 0..k {
            b.set(j, j, self.alphas[j]);
            b.set(j + 1, j, self.betas[j + 1]);
        }
        b
    }

    fn n(&self) -> usize {
        self.v.first().map_or(0, Vec::len)
    }

    fn m(&self) -> usize {
        self.u_tilde.first().map_or(0, Vec::len)
    }

    fn threshold(&self) -> f64 {
        BREAKDOWN_TOL * self.scale
    }

    fn terminate(&mut self, k: usize) {
        self.terminated = true;
        self.k_t = Some(k);
    }
}

/// `(sᵀGs)^{1/2}` and `Gs`. The value is taken from `‖(MA; L) s‖₂`, which
/// avoids the square-root-of-roundoff floor of the quadratic form; the form
/// itself is still checked for negativity beyond roundoff.
fn g_norm(prob: &GlsProblem, s: &[f64], step: usize) -> Result<(f64, Vec<f64>)> {
    let g = prob.g();
    let gs = g.matvec(s);
    let rad = vector::dot(s, &gs);
    let ss = vector::dot(s, s);
    if rad < -1e-14 * g.norm_fro() * ss {
        return Err(GlsError::NumericalBreakdown {
            step,
            what: format!("sᵀGs = {rad:e} is negative"),
        });
    }
    Ok((prob.g_norm(s), gs))
}

/// Two passes of modified Gram-Schmidt in the inner product whose images are `images`.
fn reorth(x: &mut [f64], basis: &[Vec<f64>], images: &[Vec<f64>]) {
    for _ in 0..2 {
        for (q, wq) in basis.iter().zip(images) {
            let h = vector::dot(wq, x);
            vector::axpy(-h, q, x);
        }
    }
}

pub fn ggkb_init(prob: &GlsProblem, strategy: &GdagStrategy) -> Result<BidiagState> {
    ggkb_init_with(prob, strategy, true)
}

pub fn ggkb_init_with(
    prob: &GlsProblem,
    strategy: &GdagStrategy,
    reorthogonalize: bool,
) -> Result<BidiagState> {
    let b = prob.b();
    let pb = prob.p().matvec(b);
    let beta = prob.p_norm(b);
    let mut state = BidiagState {
        alphas: Vec::new(),
        betas: vec![beta],
        v: Vec::new(),
        u_tilde: Vec::new(),
        terminated: false,
        k_t: None,
        inner_cap_hits: 0,
        reorthogonalize,
        gv: Vec::new(),
        pu: Vec::new(),
        scale: 1.0,
    };
    let b_scale = prob.p().norm_fro().sqrt() * vector::norm2(b);
    if beta <= BREAKDOWN_TOL * b_scale || beta == 0.0 {
        state.alphas.push(0.0);
        state.terminate(0);
        return Ok(state);
    }
    let u = vector::scaled(1.0 / beta, b);
    let pu = vector::scaled(1.0 / beta, &pb);
    let (s, capped) = strategy.apply(prob.g(), &prob.a().tr_matvec(&pu));
    state.inner_cap_hits += capped as usize;
    let (alpha, gs) = g_norm(prob, &s, 1)?;
    state.alphas.push(alpha);
    state.u_tilde.push(u);
    state.pu.push(pu);
    // α₁ ≤ ‖𝒜‖ ≤ 1
    if alpha <= BREAKDOWN_TOL {
        state.terminate(0);
        return Ok(state);
    }
    state.scale = alpha;
    state.v.push(vector::scaled(1.0 / alpha, &s));
    state.gv.push(vector::scaled(1.0 / alpha, &gs));
    Ok(state)
}

/// Advances from `k` to `k + 1` completed steps. A no-op once terminated.
pub fn ggkb_step(state: &mut BidiagState, prob: &GlsProblem, strategy: &GdagStrategy) -> Result<()> {
    if state.terminated {
        return Ok(());
    }
    let i = state.v.len();
    let alpha = state.alphas[i - 1];
    let v_i = &state.v[i - 1];

    let mut r = prob.a().matvec(v_i);
    vector::axpy(-alpha, &state.u_tilde[i - 1], &mut r);
    if state.reorthogonalize {
        reorth(&mut r, &state.u_tilde, &state.pu);
    }
    let pr = prob.p().matvec(&r);
    let beta = prob.p_norm(&r);
    state.betas.push(beta);
    if beta <= state.threshold() {
        state.alphas.push(0.0);
        state.terminate(i);
        return Ok(());
    }
    state.scale = state.scale.max(beta);
    let u = vector::scaled(1.0 / beta, &r);
    let pu = vector::scaled(1.0 / beta, &pr);

    let (mut s, capped) = strategy.apply(prob.g(), &prob.a().tr_matvec(&pu));
    state.inner_cap_hits += capped as usize;
    vector::axpy(-beta, &state.v[i - 1], &mut s);
    if state.reorthogonalize {
        reorth(&mut s, &state.v, &state.gv);
    }
    let (alpha_next, gs) = g_norm(prob, &s, i + 1)?;
    state.alphas.push(alpha_next);
    state.u_tilde.push(u);
    state.pu.push(pu);
    if alpha_next <= state.threshold() {
        state.terminate(i);
        return Ok(());
    }
    state.scale = state.scale.max(alpha_next);
    state.v.push(vector::scaled(1.0 / alpha_next, &s));
    state.gv.push(vector::scaled(1.0 / alpha_next, &gs));
    Ok(())
}

/// Runs until termination or `max_steps` completed steps.
pub fn ggkb_run(
    prob: &GlsProblem,
    strategy: &GdagStrategy,
    max_steps: usize,
    reorthogonalize: bool,
) -> Result<BidiagState> {
    let mut state = ggkb_init_with(prob, strategy, reorthogonalize)?;
    while !state.terminated && state.steps() < max_steps {
        ggkb_step(&mut state, prob, strategy)?;
    }
    Ok(state)
}

/// Largest principal angle between `span{v_1 … v_k}` and the Krylov space
/// `K_k(G†AᵀPA, G†AᵀPb)`, the latter built by Arnoldi with a dense `G†`.
pub fn krylov_subspace_check(state: &BidiagState, prob: &GlsProblem, k: usize) -> Result<f64> {
    if k == 0 || k > state.v.len() {
        return Err(GlsError::InvalidArgument(format!(
            "k = {k} outside 1..={} generated vectors",
            state.v.len()
        )));
    }
    let g_pinv = pinv(prob.g(), prob.rank_tol())?;
    let op = g_pinv.matmul(&prob.a().tr_matmul(&prob.p().matmul(prob.a())));
    let mut q = g_pinv.matvec(&prob.at_p(prob.b()));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        for _ in 0..2 {
            for prev in &basis {
                let h = vector::dot(prev, &q);
                vector::axpy(-h, prev, &mut q);
            }
        }
        let nrm = vector::norm2(&q);
        if nrm == 0.0 {
            return Err(GlsError::InvalidArgument(format!(
                "Krylov space has dimension below {k}"
            )));
        }
        vector::scale(1.0 / nrm, &mut q);
        basis.push(q.clone());
        q = op.matvec(&q);
    }
    let n = prob.ncols();
    let qk = DenseMatrix::from_columns(n, &basis);
    let (qv, _) = qr_householder(&state.v_matrix(k))?;
    // sin θ_max = ‖(I − Q_V Q_Vᵀ) Q_K‖₂
    let resid = &qk - &qv.matmul(&qv.tr_matmul(&qk));
    Ok(svd(&resid)?.sigma_max().min(1.0).asin())
}

/// `rank(G)` and `rank(P)`, the two quantities bounding the termination step.
pub fn termination_bound(prob: &GlsProblem) -> Result<usize> {
    let tol = prob.rank_tol();
    let n = prob.ncols();
    let m = prob.nrows();
    let rg = n - nullspace_basis(prob.g(), tol)?.cols();
    let rp = m - nullspace_basis(prob.p(), tol)?.cols();
    Ok(rg.min(rp))
}
