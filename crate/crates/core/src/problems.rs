//! Test problems with a planted minimum 2-norm solution.
//!
//! Given `A` and `L` (with `M = I`), a target `w ∈ R(G)` is made from grid
//! samples of a smooth function and corrected along `N(A)`:
//!
//! ```text
//! x† = w − B (BᵀGB)⁻¹ BᵀG w,   B an orthonormal basis of N(A)
//! ```
//!
//! and `b = A x† + z` with `z ∈ R(A)^⊥`, so that `x†` is the exact solution.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{GlsError, Result};
use crate::linalg::{
    nullspace_basis, pinv, projector_range, vector, DenseMatrix,
    RankTolerance, SparseMatrix,
};
use crate::rng::SeededRng;
use crate::wpinv::{check_gls_criterion, GlsProblem};

/// Tolerance a planted solution must meet before it is handed out.
pub const VALIDATION_TOL: f64 = 1e-8;

/// First-difference stencil `(1, −1)`, (n−1)×n.
pub fn make_l1(n: usize) -> Result<SparseMatrix> {
    if n < 2 {
        return Err(GlsError::InvalidArgument(format!("L1 needs n >= 2, got {n}")));
    }
    let mut t = Vec::with_capacity(2 * (n - 1));
    for i in 0..n - 1 {
        t.push((i, i, 1.0));
        t.push((i, i + 1, -1.0));
    }
    SparseMatrix::new(n - 1, n, t)
}

/// Second-difference stencil `(−1, 2, −1)`, (n−2)×n.
pub fn make_l2(n: usize) -> Result<SparseMatrix> {
    if n < 3 {
        return Err(GlsError::InvalidArgument(format!("L2 needs n >= 3, got {n}")));
    }
    let mut t = Vec::with_capacity(3 * (n - 2));
    for i in 0..n - 2 {
        t.push((i, i, -1.0));
        t.push((i, i + 1, 2.0));
        t.push((i, i + 2, -1.0));
    }
    SparseMatrix::new(n - 2, n, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    /// `t` on `[0, 1]`
    Ramp,
    /// `t³ − t²` on `[−1, 1]`
    Cubic,
    /// `sin 5t − 2 cos t` on `[−π, π]`
    Trig,
}

impl FunctionKind {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Self::Ramp => t,
            Self::Cubic => t * t * t - t * t,
            Self::Trig => (5.0 * t).sin() - 2.0 * t.cos(),
        }
    }

    pub fn default_interval(self) -> (f64, f64) {
        match self {
            Self::Ramp => (0.0, 1.0),
            Self::Cubic => (-1.0, 1.0),
            Self::Trig => (-PI, PI),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Ramp => "ramp",
            Self::Cubic => "cubic",
            Self::Trig => "trig",
        }
    }
}

impl fmt::Display for FunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionKind {
    type Err = GlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ramp" => Ok(Self::Ramp),
            "cubic" => Ok(Self::Cubic),
            "trig" => Ok(Self::Trig),
            other => Err(GlsError::InvalidArgument(format!(
                "unknown function {other:?} (expected ramp, cubic or trig)"
            ))),
        }
    }
}

/// `f` on `n` equispaced points of `[a, b]`, endpoints included.
pub fn sample_function(func: FunctionKind, n: usize, interval: (f64, f64)) -> Result<Vec<f64>> {
    let (a, b) = interval;
    if n == 0 {
        return Err(GlsError::InvalidArgument("grid needs at least one point".into()));
    }
    if !(a < b) {
        return Err(GlsError::InvalidArgument(format!("empty interval [{a}, {b}]")));
    }
    if n == 1 {
        return Ok(vec![func.eval(a)]);
    }
    let h = (b - a) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            let t = if i == n - 1 { b } else { a + i as f64 * h };
            func.eval(t)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegularizerKind {
    L1,
    L2,
    Identity,
    Custom(SparseMatrix),
}

impl RegularizerKind {
    pub fn build(&self, n: usize) -> Result<SparseMatrix> {
        match self {
            Self::L1 => make_l1(n),
            Self::L2 => make_l2(n),
            Self::Identity => SparseMatrix::new(n, n, (0..n).map(|i| (i, i, 1.0)).collect()),
            Self::Custom(l) => {
                if l.cols() != n {
                    return Err(GlsError::DimensionMismatch(format!(
                        "custom L has {} columns, expected {n}",
                        l.cols()
                    )));
                }
                Ok(l.clone())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::L1 => "l1",
            Self::L2 => "l2",
            Self::Identity => "identity",
            Self::Custom(_) => "custom",
        }
    }
}

impl FromStr for RegularizerKind {
    type Err = GlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Self::L1),
            "l2" => Ok(Self::L2),
            "identity" | "id" => Ok(Self::Identity),
            other => Err(GlsError::InvalidArgument(format!(
                "unknown regularizer {other:?} (expected l1, l2 or identity)"
            ))),
        }
    }
}

/// Seeded sparse Gaussian matrix of the given rank. Roughly `density·m·n`
/// nonzeros when `rank = min(m, n)`; lower ranks come from a product of two
/// sparse factors, so the density is only indicative.
pub fn sprandn_like(m: usize, n: usize, density: f64, rank: usize, seed: u64) -> Result<DenseMatrix> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(GlsError::InvalidArgument(format!(
            "density must lie in (0, 1], got {density}"
        )));
    }
    if rank > m.min(n) {
        return Err(GlsError::InvalidArgument(format!(
            "rank {rank} exceeds min({m}, {n})"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let sparse = |rows: usize, cols: usize, d: f64, rng: &mut SeededRng| {
        let mut out = DenseMatrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                if rng.uniform() < d {
                    out.set(i, j, rng.normal());
                }
            }
        }
        out
    };
    if rank == m.min(n) {
        let mut a = sparse(m, n, density, &mut rng);
        // keep the diagonal alive so the rank is not lost to empty rows or columns
        for i in 0..rank {
            if a.get(i, i) == 0.0 {
                a.set(i, i, rng.normal());
            }
        }
        return Ok(a);
    }
    let d = density.sqrt();
    let mut left = sparse(m, rank, d, &mut rng);
    let mut right = sparse(rank, n, d, &mut rng);
    for k in 0..rank {
        left.set(rng.range(0, m), k, rng.normal());
        right.set(k, rng.range(0, n), rng.normal());
    }
    Ok(left.matmul(&right))
}

#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub problem: GlsProblem,
    pub x_true: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub seed: u64,
    pub func: FunctionKind,
    pub l_kind: &'static str,
}

/// Plants `x†` for `min ‖Lx‖ s.t. ‖Ax − b‖ = min` and checks it before returning.
pub fn generate(
    a: DenseMatrix,
    l_kind: &RegularizerKind,
    func: FunctionKind,
    seed: u64,
) -> Result<GeneratedProblem> {
    let (m, n) = a.shape();
    let l = l_kind.build(n)?.to_dense();
    let tol = RankTolerance::Auto;
    let problem = GlsProblem::unweighted(a, l, vec![0.0; m])?;
    let g = problem.g();

    let f = sample_function(func, n, func.default_interval())?;
    let w = projector_range(g, tol)?.matvec(&f);
    if vector::norm2(&w) <= f64::EPSILON.sqrt() * vector::norm2(&f) {
        return Err(GlsError::InvalidArgument(format!(
            "{} lies in N(A) ∩ N(L); the planted solution would be zero",
            func.name()
        )));
    }

    let basis = nullspace_basis(problem.a(), tol)?;
    let x_true = if basis.cols() == 0 {
        w.clone()
    } else {
        let gb = g.matmul(&basis);
        let bgb = basis.tr_matmul(&gb).symmetrize();
        let rhs = gb.tr_matvec(&w);
        // BᵀGB is singular exactly on N(A) ∩ N(L), where it holds only roundoff;
        // the cutoff is measured against G, since a Cholesky pivot test or a
        // cutoff relative to BᵀGB itself would invert that roundoff
        let floor = (n as f64 * f64::EPSILON * g.norm_fro()).max(f64::MIN_POSITIVE);
        let coef = pinv(&bgb, RankTolerance::absolute(floor)?)?.matvec(&rhs);
        vector::sub(&w, &basis.matvec(&coef))
    };

    let mut rng = SeededRng::new(seed);
    let noise = rng.normal_vec(m);
    let z = vector::sub(&noise, &projector_range(problem.a(), tol)?.matvec(&noise));
    let b = vector::add(&problem.a().matvec(&x_true), &z);
    let problem = problem.with_rhs(b)?;

    let crit = check_gls_criterion(&problem, &x_true, VALIDATION_TOL)?;
    if !crit.is_min_norm_solution() {
        return Err(GlsError::ValidationFailure {
            normal: crit.normal_residual,
            orthogonality: crit.orthogonality_residual.max(crit.range_residual),
        });
    }
    Ok(GeneratedProblem {
        problem,
        x_true,
        w,
        z,
        seed,
        func,
        l_kind: l_kind.name(),
    })
}
