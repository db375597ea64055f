//! Direct computation of the weighted pseudoinverse `A_ML†` and the
//! generalized Moore-Penrose certificate.
//!
//! Three routes are provided and are expected to agree:
//!
//! * [`wpinv_elden`]: `(I − (L P_N(MA))† L) (MA)† M`;
//! * [`crate::gsvd::wpinv_via_gsvd`]: `P_R(G) X Σ_A† U_Aᵀ` (only for `M = I`);
//! * [`wpinv_limit`]: `(AᵀPA + δG)† AᵀP`, which tends to `A_ML†` as `δ → 0`.
//!
//! [`wpinv_limit_zero`] extrapolates the limit route to `δ = 0` so the three
//! can be compared at full accuracy.

use serde::Serialize;

use crate::error::{GlsError, Result};
use crate::gsvd::{gsvd_pair, wpinv_via_gsvd};
use crate::linalg::{nullspace_basis, pinv, projector_range, psd_sqrt, vector};
use crate::linalg::{DenseMatrix, RankTolerance};

/// `min ‖L x‖₂  s.t.  ‖M (A x − b)‖₂ = min`, with `P = MᵀM`, `Q = LᵀL` and
/// `G = AᵀPA + Q` formed once at construction.
#[derive(Debug, Clone)]
pub struct GlsProblem {
    a: DenseMatrix,
    /// `None` stands for the identity weight.
    m: Option<DenseMatrix>,
    l: DenseMatrix,
    b: Vec<f64>,
    p: DenseMatrix,
    q: DenseMatrix,
    g: DenseMatrix,
    ma: DenseMatrix,
    rank_tol: RankTolerance,
}

impl GlsProblem {
    pub fn new(
        a: DenseMatrix,
        m: Option<DenseMatrix>,
        l: DenseMatrix,
        b: Vec<f64>,
    ) -> Result<Self> {
        let (rows, n) = a.shape();
        if l.cols() != n {
            return Err(GlsError::DimensionMismatch(format!(
                "L has {} columns, A has {n}",
                l.cols()
            )));
        }
        if b.len() != rows {
            return Err(GlsError::DimensionMismatch(format!(
                "b has length {}, A has {rows} rows",
                b.len()
            )));
        }
        if let Some(w) = &m {
            if w.cols() != rows {
                return Err(GlsError::DimensionMismatch(format!(
                    "M has {} columns, A has {rows} rows",
                    w.cols()
                )));
            }
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(GlsError::InvalidArgument("b has non-finite entries".into()));
        }
        let p = match &m {
            Some(w) => w.tr_matmul(w).symmetrize(),
            None => DenseMatrix::identity(rows),
        };
        let q = l.tr_matmul(&l).symmetrize();
        let ma = match &m {
            Some(w) => w.matmul(&a),
            None => a.clone(),
        };
        let g = (&ma.tr_matmul(&ma) + &q).symmetrize();
        Ok(Self {
            a,
            m,
            l,
            b,
            p,
            q,
            g,
            ma,
            rank_tol: RankTolerance::Auto,
        })
    }

    /// Identity-weighted problem `min ‖Lx‖ s.t. ‖Ax − b‖ = min`.
    pub fn unweighted(a: DenseMatrix, l: DenseMatrix, b: Vec<f64>) -> Result<Self> {
        Self::new(a, None, l, b)
    }

    pub fn with_rank_tolerance(mut self, tol: RankTolerance) -> Self {
        self.rank_tol = tol;
        self
    }

    /// Same matrices, new right-hand side.
    pub fn with_rhs(&self, b: Vec<f64>) -> Result<Self> {
        if b.len() != self.a.rows() {
            return Err(GlsError::DimensionMismatch(format!(
                "b has length {}, A has {} rows",
                b.len(),
                self.a.rows()
            )));
        }
        Ok(Self { b, ..self.clone() })
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn l(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn p(&self) -> &DenseMatrix {
        &self.p
    }

    pub fn q(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn g(&self) -> &DenseMatrix {
        &self.g
    }

    pub fn rank_tol(&self) -> RankTolerance {
        self.rank_tol
    }

    /// The explicit weight, if one was given.
    pub fn weight(&self) -> Option<&DenseMatrix> {
        self.m.as_ref()
    }

    /// `M`, materializing the identity when no weight was given.
    pub fn m_matrix(&self) -> DenseMatrix {
        self.m
            .clone()
            .unwrap_or_else(|| DenseMatrix::identity(self.a.rows()))
    }

    /// True when `M` is absent or exactly the identity.
    pub fn weight_is_identity(&self) -> bool {
        match &self.m {
            None => true,
            Some(w) => w.is_square() && *w == DenseMatrix::identity(w.rows()),
        }
    }

    pub fn ma(&self) -> &DenseMatrix {
        &self.ma
    }

    pub fn nrows(&self) -> usize {
        self.a.rows()
    }

    pub fn ncols(&self) -> usize {
        self.a.cols()
    }

    /// `Aᵀ P y`
    pub fn at_p(&self, y: &[f64]) -> Vec<f64> {
        self.a.tr_matvec(&self.p.matvec(y))
    }

    /// `(yᵀ P y)^{1/2}`, evaluated as `‖M y‖₂`.
    pub fn p_norm(&self, y: &[f64]) -> f64 {
        match &self.m {
            Some(w) => vector::norm2(&w.matvec(y)),
            None => vector::norm2(y),
        }
    }

    /// `(xᵀ G x)^{1/2}`, evaluated as `‖(MA; L) x‖₂`.
    pub fn g_norm(&self, x: &[f64]) -> f64 {
        vector::norm2(&self.ma.matvec(x)).hypot(vector::norm2(&self.l.matvec(x)))
    }
}

/// `A_ML† = (I − (L P_N(MA))† L) (MA)† M`.
pub fn wpinv_elden(prob: &GlsProblem) -> Result<DenseMatrix> {
    let tol = prob.rank_tol();
    let n = prob.ncols();
    let ma = prob.ma();
    let ma_pinv = pinv(ma, tol)?;
    // P_N(MA) = N Nᵀ with orthonormal N, and (L N Nᵀ)† = N (L N)†
    let null = nullspace_basis(ma, tol)?;
    // The cutoff is scaled by ‖L‖ rather than by ‖L N‖: when N(MA) ∩ N(L) is
    // nontrivial, L N carries pure roundoff that a self-relative cutoff would invert.
    let l = prob.l();
    let cut = tol
        .threshold(l.norm_fro(), l.rows(), l.cols(), f64::EPSILON)
        .max(f64::MIN_POSITIVE);
    let lpn_pinv = null.matmul(&pinv(&l.matmul(&null), RankTolerance::Absolute(cut))?);
    let left = &DenseMatrix::identity(n) - &lpn_pinv.matmul(l);
    let core = left.matmul(&ma_pinv);
    Ok(match prob.weight() {
        Some(w) => core.matmul(w),
        None => core,
    })
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(GlsError::InvalidArgument(format!(
            "delta must be positive, got {delta}"
        )))
    }
}

/// `(wa·MA; wl·L)† (I; 0) M`, which equals `wa·(wa²AᵀPA + wl²Q)† AᵀP`.
/// Working on the stacked matrix keeps the condition number unsquared.
fn stacked_shift(prob: &GlsProblem, wa: f64, wl: f64) -> Result<DenseMatrix> {
    // MA has as many rows as M, not as A
    let q = prob.ma().rows();
    let k = prob.ma().scale(wa).vcat(&prob.l().scale(wl));
    let top = pinv(&k, prob.rank_tol())?.col_range(0, q);
    Ok(match prob.weight() {
        Some(w) => top.matmul(w),
        None => top,
    })
}

/// `(AᵀPA + δG)† AᵀP` for a fixed `δ > 0`.
///
/// Since `AᵀPA + δG = KᵀK` with `K = (√(1+δ)·MA; √δ·L)`, this is evaluated
/// as `K† (I; 0) M / √(1+δ)`, without forming the normal matrix.
pub fn wpinv_limit(prob: &GlsProblem, delta: f64) -> Result<DenseMatrix> {
    check_delta(delta)?;
    let wa = (1.0 + delta).sqrt();
    Ok(stacked_shift(prob, wa, delta.sqrt())?.scale(1.0 / wa))
}

/// `(AᵀPA + δ'Q)† AᵀP`, the Q-shifted variant of [`wpinv_limit`].
pub fn wpinv_limit_q(prob: &GlsProblem, delta: f64) -> Result<DenseMatrix> {
    check_delta(delta)?;
    stacked_shift(prob, 1.0, delta.sqrt())
}

/// Number of halvings combined by [`wpinv_limit_extrapolated`].
const RICHARDSON_LEVELS: usize = 5;

/// Richardson extrapolation of [`wpinv_limit`] to `δ → 0` from
/// `δ, δ/2, …, δ/16`; removes the terms in `δ` through `δ⁴`.
pub fn wpinv_limit_extrapolated(prob: &GlsProblem, delta: f64) -> Result<DenseMatrix> {
    richardson(delta, |d| wpinv_limit(prob, d))
}

fn richardson(delta: f64, f: impl Fn(f64) -> Result<DenseMatrix>) -> Result<DenseMatrix> {
    check_delta(delta)?;
    let mut table = (0..RICHARDSON_LEVELS)
        .map(|k| f(delta / 2f64.powi(k as i32)))
        .collect::<Result<Vec<_>>>()?;
    for j in 1..RICHARDSON_LEVELS {
        let w = 2f64.powi(j as i32);
        for k in (j..RICHARDSON_LEVELS).rev() {
            table[k] = (&table[k].scale(w) - &table[k - 1]).scale(1.0 / (w - 1.0));
        }
    }
    Ok(table.pop().expect("at least one level"))
}

/// Result of [`wpinv_limit_zero`].
#[derive(Debug, Clone)]
pub struct LimitExtrapolation {
    pub x: DenseMatrix,
    /// Starting shift `δ'` of the selected extrapolant.
    pub delta: f64,
    /// Relative distance to the extrapolant one decade further down.
    pub estimate: f64,
}

/// `A_ML†` as the `δ → 0` limit, without any factorization beyond `pinv`.
///
/// Extrapolates [`wpinv_limit_q`] with `δ' = t·‖MA‖²_F/‖L‖²_F` for
/// `t = 1, 1e-1, …, 1e-9` and keeps the extrapolant that agrees best with its
/// successor. The scaling makes the scan invariant under rescaling `MA` or `L`.
/// The G-shift is avoided here because it cannot be balanced this way: when
/// `‖MA‖ ≫ ‖L‖` its regularization drowns in the roundoff of `MA`.
/// Large `t` leaves truncation error; small `t` amplifies roundoff-level
/// singular values of `MA`.
pub fn wpinv_limit_zero(prob: &GlsProblem) -> Result<LimitExtrapolation> {
    let l_fro = prob.l().norm_fro();
    let balance = if l_fro > 0.0 {
        (prob.ma().norm_fro() / l_fro).powi(2).max(f64::MIN_POSITIVE)
    } else {
        1.0
    };
    let deltas: Vec<f64> = (0..=9).map(|k| balance * 10f64.powi(-k)).collect();
    let mut table = deltas
        .iter()
        .map(|&d| richardson(d, |x| wpinv_limit_q(prob, x)))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    let mut best_gap = f64::INFINITY;
    for k in 0..table.len() - 1 {
        let scale = table[k].norm_fro().max(f64::MIN_POSITIVE);
        let gap = (&table[k] - &table[k + 1]).norm_fro() / scale;
        if gap < best_gap {
            best_gap = gap;
            best = k;
        }
    }
    Ok(LimitExtrapolation {
        x: table.swap_remove(best),
        delta: deltas[best],
        estimate: best_gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WpinvMethod {
    Elden,
    Gsvd,
    Limit(f64),
}

/// Minimum 2-norm solution `x† = A_ML† b`.
pub fn wpinv_apply(prob: &GlsProblem, method: WpinvMethod) -> Result<Vec<f64>> {
    let x = wpinv_matrix(prob, method)?;
    Ok(x.matvec(prob.b()))
}

/// The full `A_ML†` by the chosen route.
pub fn wpinv_matrix(prob: &GlsProblem, method: WpinvMethod) -> Result<DenseMatrix> {
    match method {
        WpinvMethod::Elden => wpinv_elden(prob),
        WpinvMethod::Limit(delta) => wpinv_limit(prob, delta),
        WpinvMethod::Gsvd => {
            if !prob.weight_is_identity() {
                return Err(GlsError::MethodUnsupported(
                    "the GSVD route requires M = I".into(),
                ));
            }
            let f = gsvd_pair(prob.a(), prob.l())?;
            wpinv_via_gsvd(&f, prob.g())
        }
    }
}

/// One normalized residual of the generalized Moore-Penrose system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub residual: f64,
    pub passed: bool,
}

/// Residuals of the five identities
///
/// 1. `XAX = X`
/// 2. `MAXA = MA`
/// 3. `(MᵀMAX)ᵀ = MᵀMAX`
/// 4. `(G X A G†)ᵀ = XA`
/// 5. `X M† M = X`
///
/// each normalized by the Frobenius norm of its reference side.
#[derive(Debug, Clone, Serialize)]
pub struct MpeReport {
    pub identities: [IdentityResidual; 5],
    pub tol: f64,
    /// Residual of `(LᵀLXA)ᵀ = LᵀLXA`; informational only.
    #[serde(skip)]
    pub elden_fourth_residual: f64,
}

impl MpeReport {
    pub fn all_passed(&self) -> bool {
        self.identities.iter().all(|r| r.passed)
    }

    pub fn residuals(&self) -> [f64; 5] {
        self.identities.map(|r| r.residual)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Evaluates the generalized Moore-Penrose equations for a candidate `X` (n×m).
pub fn check_gmpe(prob: &GlsProblem, x: &DenseMatrix, tol: f64) -> Result<MpeReport> {
    let (m, n) = prob.a().shape();
    if x.shape() != (n, m) {
        return Err(GlsError::DimensionMismatch(format!(
            "candidate is {}x{}, expected {n}x{m}",
            x.rows(),
            x.cols()
        )));
    }
    let a = prob.a();
    let rank_tol = prob.rank_tol();
    let xa = x.matmul(a);
    let ax = a.matmul(x);
    let ma = prob.ma();
    let x_norm = x.norm_fro();

    let r1 = ratio((&xa.matmul(x) - x).norm_fro(), x_norm);

    let maxa = match prob.weight() {
        Some(w) => w.matmul(&ax).matmul(a),
        None => ax.matmul(a),
    };
    let r2 = ratio((&maxa - ma).norm_fro(), ma.norm_fro());

    let pax = prob.p().matmul(&ax);
    let r3 = ratio(pax.asymmetry(), pax.norm_fro());

    let g_pinv = pinv(prob.g(), rank_tol)?;
    let gxag = prob.g().matmul(&xa).matmul(&g_pinv);
    let r4 = ratio((&gxag.transpose() - &xa).norm_fro(), xa.norm_fro());

    let r5 = match prob.weight() {
        Some(w) => {
            let proj = pinv(w, rank_tol)?.matmul(w);
            ratio((&x.matmul(&proj) - x).norm_fro(), x_norm)
        }
        None => 0.0,
    };

    let lxa = prob.q().matmul(&xa);
    let elden_fourth_residual = ratio(lxa.asymmetry(), lxa.norm_fro());

    let wrap = |residual: f64| IdentityResidual {
        residual,
        passed: residual <= tol,
    };
    Ok(MpeReport {
        identities: [wrap(r1), wrap(r2), wrap(r3), wrap(r4), wrap(r5)],
        tol,
        elden_fourth_residual,
    })
}

/// Outcome of the optimality test for a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlsCriterion {
    /// `‖AᵀP(Ax − b)‖ / ‖AᵀPb‖`
    pub normal_residual: f64,
    /// `max_j |xᵀ G z_j| / ‖x‖_G` over a basis `z_j` of `N(AᵀPA)`.
    pub orthogonality_residual: f64,
    /// `‖(I − P_R(G)) x‖ / ‖x‖`
    pub range_residual: f64,
    pub tol: f64,
}

impl GlsCriterion {
    /// `x` solves the GLS problem.
    pub fn holds(&self) -> bool {
        self.normal_residual <= self.tol && self.orthogonality_residual <= self.tol
    }

    /// `x` lies in `R(G)`; together with [`Self::holds`] this makes it the minimum-norm solution.
    pub fn in_range_g(&self) -> bool {
        self.range_residual <= self.tol
    }

    pub fn is_min_norm_solution(&self) -> bool {
        self.holds() && self.in_range_g()
    }
}

/// Checks `AᵀP(Ax − b) = 0` and `xᵀGz = 0` for all `z ∈ N(AᵀPA)`, and reports
/// whether `x ∈ R(G)`.
pub fn check_gls_criterion(prob: &GlsProblem, x: &[f64], tol: f64) -> Result<GlsCriterion> {
    let n = prob.ncols();
    if x.len() != n {
        return Err(GlsError::DimensionMismatch(format!(
            "x has length {}, expected {n}",
            x.len()
        )));
    }
    let rank_tol = prob.rank_tol();
    let ax_b = vector::sub(&prob.a().matvec(x), prob.b());
    let normal = vector::norm2(&prob.at_p(&ax_b));
    let atpb = vector::norm2(&prob.at_p(prob.b()));
    let normal_residual = if atpb > 0.0 {
        normal / atpb
    } else {
        // AᵀPb = 0: fall back to the scale of the operator applied to x
        let atpa = prob.a().tr_matmul(&prob.p().matmul(prob.a()));
        ratio(normal, atpa.norm_fro() * vector::norm2(x))
    };

    // N(AᵀPA) = N(L_P A) with P = L_Pᵀ L_P
    let lp_a = psd_sqrt(prob.p())?.matmul(prob.a());
    let z = nullspace_basis(&lp_a, rank_tol)?;
    let gx = prob.g().matvec(x);
    let x_g = prob.g_norm(x);
    let worst = z
        .columns()
        .map(|zj| vector::dot(&gx, zj).abs())
        .fold(0.0_f64, f64::max);
    let orthogonality_residual = ratio(worst, x_g);

    let proj = projector_range(prob.g(), rank_tol)?;
    let outside = vector::sub(x, &proj.matvec(x));
    let range_residual = ratio(vector::norm2(&outside), vector::norm2(x));

    Ok(GlsCriterion {
        normal_residual,
        orthogonality_residual,
        range_residual,
        tol,
    })
}
