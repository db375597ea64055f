//! Generalized SVD of a pair `{A, L}` sharing a column count:
//!
//! ```text
//! A X = U_A Σ_A,   L X = U_L Σ_L,   Σ_A = (C_A 0),  Σ_L = (S_L 0)
//! ```
//!
//! with `C_AᵀC_A + S_LᵀS_L = I_r`. The `r` leading columns split into a block
//! with `c = 1` (`q1`), a block with `c, s ∈ (0, 1)` (`q2`) and a block with
//! `c = 0` (`q3`); the trailing `n − r` columns span `N(A) ∩ N(L)`.
//!
//! Construction: a thin SVD of the stacked `K = (A; L) = Z Σ_K Wᵀ`, a Jacobi
//! SVD of the top block `Z_A = U_A C V̂ᵀ`, and a QR of `Z_L V̂` for `U_L`.

use crate::error::{GlsError, Result};
use crate::linalg::svd::svd_by_columns;
use crate::linalg::{projector_range, qr_householder_full, svd_with, vector};
use crate::linalg::{DenseMatrix, LinalgConfig, RankTolerance};

/// Generalized singular values closer than this to 0 are snapped to the
/// `q1` (for `s`) or `q3` (for `c`) block.
pub const CLUSTER_TOL: f64 = 1e-12;

/// Relative reconstruction bound checked before factors are returned.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct GsvdFactors {
    pub u_a: DenseMatrix,
    pub u_l: DenseMatrix,
    pub x: DenseMatrix,
    /// m×r, `c_j` at `(j, j)`.
    pub c_a: DenseMatrix,
    /// p×r, `s_j` at `(p − r + j, j)`.
    pub s_l: DenseMatrix,
    /// Cosines, nonincreasing, length `r`.
    pub c: Vec<f64>,
    /// Sines, nondecreasing, length `r`.
    pub s: Vec<f64>,
    pub r: usize,
    pub q1: usize,
    pub q2: usize,
    pub q3: usize,
}

impl GsvdFactors {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    /// `Σ_A = (C_A 0)`, m×n.
    pub fn sigma_a(&self) -> DenseMatrix {
        pad_columns(&self.c_a, self.n())
    }

    /// `Σ_L = (S_L 0)`, p×n.
    pub fn sigma_l(&self) -> DenseMatrix {
        pad_columns(&self.s_l, self.n())
    }

    /// `‖A X − U_A Σ_A‖_F` and `‖L X − U_L Σ_L‖_F`.
    pub fn residuals(&self, a: &DenseMatrix, l: &DenseMatrix) -> (f64, f64) {
        let ra = (&a.matmul(&self.x) - &self.u_a.matmul(&self.sigma_a())).norm_fro();
        let rl = (&l.matmul(&self.x) - &self.u_l.matmul(&self.sigma_l())).norm_fro();
        (ra, rl)
    }
}

fn pad_columns(block: &DenseMatrix, n: usize) -> DenseMatrix {
    block.hcat(&DenseMatrix::zeros(block.rows(), n - block.cols()))
}

/// Column blocks of `X` with widths `(q1, q2, q3, n − r)`.
#[derive(Debug, Clone)]
pub struct XPartition {
    pub x1: DenseMatrix,
    pub x2: DenseMatrix,
    pub x3: DenseMatrix,
    pub x4: DenseMatrix,
}

impl XPartition {
    pub fn widths(&self) -> (usize, usize, usize, usize) {
        (self.x1.cols(), self.x2.cols(), self.x3.cols(), self.x4.cols())
    }

    pub fn concat(&self) -> DenseMatrix {
        self.x1.hcat(&self.x2).hcat(&self.x3).hcat(&self.x4)
    }
}

pub fn partition_x(f: &GsvdFactors) -> XPartition {
    let a = f.q1;
    let b = a + f.q2;
    let c = b + f.q3;
    XPartition {
        x1: f.x.col_range(0, a),
        x2: f.x.col_range(a, b),
        x3: f.x.col_range(b, c),
        x4: f.x.col_range(c, f.n()),
    }
}

/// Largest diagonal entry of `C_A`; the norm of the operator `v ↦ Av` from
/// `(R(G), ‖·‖_G)` to `(R^m, ‖·‖₂)`.
pub fn sigma_max_ca(f: &GsvdFactors) -> f64 {
    f.c.iter().take(f.q1 + f.q2).copied().fold(0.0, f64::max)
}

pub fn gsvd_pair(a: &DenseMatrix, l: &DenseMatrix) -> Result<GsvdFactors> {
    gsvd_pair_with(a, l, &LinalgConfig::default())
}

pub fn gsvd_pair_with(a: &DenseMatrix, l: &DenseMatrix, cfg: &LinalgConfig) -> Result<GsvdFactors> {
    let (m, n) = a.shape();
    let p = l.rows();
    if l.cols() != n {
        return Err(GlsError::DimensionMismatch(format!(
            "A has {n} columns, L has {}",
            l.cols()
        )));
    }
    if n == 0 {
        return Err(GlsError::InvalidArgument("pair has no columns".into()));
    }

    let k = a.vcat(l);
    let ks = svd_with(&k, RankTolerance::Auto, cfg)?;
    let r = ks.rank;
    let z = ks.u.col_range(0, r);
    let z_a = z.row_range(0, m);
    let z_l = z.row_range(m, m + p);

    // Z_A V̂ = U_A C
    let (u_a, mut c, v_hat) = svd_by_columns(&z_a, cfg)?;
    c.truncate(r);
    let y = z_l.matmul(&v_hat);
    let s_raw: Vec<f64> = y.columns().map(vector::norm2).collect();

    // at most p sines can be nonzero; any excess is roundoff and joins q1
    let mut q1 = r.saturating_sub(p);
    while q1 < r && s_raw[q1] <= CLUSTER_TOL {
        q1 += 1;
    }
    let mut q3 = 0;
    while q3 < r - q1 && c[r - 1 - q3] <= CLUSTER_TOL {
        q3 += 1;
    }
    let q2 = r - q1 - q3;

    // U_L: QR of the nonzero-sine columns taken in decreasing-s order
    let tail: Vec<usize> = (q1..r).rev().collect();
    let (q, rr) = qr_householder_full(&y.select_columns(&tail));
    let mut u_l = DenseMatrix::zeros(p, p);
    let mut s = vec![0.0; r];
    for (pos, j) in (r - q1..p).enumerate() {
        u_l.col_mut(pos).copy_from_slice(q.col(j));
    }
    for (kk, &j) in tail.iter().enumerate() {
        let d = rr.get(kk, kk);
        let sign = if d < 0.0 { -1.0 } else { 1.0 };
        vector::axpy(sign, q.col(kk), u_l.col_mut(p + j - r));
        s[j] = d.abs();
    }

    for j in 0..q1 {
        c[j] = 1.0;
        s[j] = 0.0;
    }
    for j in q1 + q2..r {
        c[j] = 0.0;
        s[j] = 1.0;
    }

    let mut c_a = DenseMatrix::zeros(m, r);
    for j in 0..r.min(m) {
        c_a.set(j, j, c[j]);
    }
    let mut s_l = DenseMatrix::zeros(p, r);
    for j in q1..r {
        s_l.set(p + j - r, j, s[j]);
    }

    // X = (W_r Σ_r⁻¹ V̂, W_null)
    let mut w_scaled = ks.v.col_range(0, r);
    for j in 0..r {
        vector::scale(1.0 / ks.singular_values[j], w_scaled.col_mut(j));
    }
    let x = w_scaled.matmul(&v_hat).hcat(&ks.v.col_range(r, n));

    let f = GsvdFactors {
        u_a,
        u_l,
        x,
        c_a,
        s_l,
        c,
        s,
        r,
        q1,
        q2,
        q3,
    };
    let (ra, rl) = f.residuals(a, l);
    let bound = RECONSTRUCTION_TOL * (a.norm_fro() + l.norm_fro());
    if ra.max(rl) > bound {
        return Err(GlsError::FactorizationFailure {
            what: "GSVD reconstruction residual above tolerance",
            residual: ra.max(rl),
        });
    }
    Ok(f)
}

/// `A_IL† = P_R(G) X Σ_A† U_Aᵀ` with `X Σ_A† = (X1, X2 C_q2⁻¹, 0)`.
pub fn wpinv_via_gsvd(f: &GsvdFactors, g: &DenseMatrix) -> Result<DenseMatrix> {
    let n = f.n();
    if g.shape() != (n, n) {
        return Err(GlsError::DimensionMismatch(format!(
            "G is {}x{}, factors have n = {n}",
            g.rows(),
            g.cols()
        )));
    }
    let m = f.u_a.rows();
    let mut xs = DenseMatrix::zeros(n, m);
    for j in 0..f.q1 + f.q2 {
        vector::axpy(1.0 / f.c[j], f.x.col(j), xs.col_mut(j));
    }
    let core = xs.matmul(&f.u_a.transpose());
    Ok(projector_range(g, RankTolerance::Auto)?.matmul(&core))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{nullspace_basis, svd};
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn orth_err(q: &DenseMatrix) -> f64 {
        (&q.tr_matmul(q) - &DenseMatrix::identity(q.cols())).max_abs()
    }

    fn gram(x: &DenseMatrix, g: &DenseMatrix) -> DenseMatrix {
        x.tr_matmul(&g.matmul(x))
    }

    fn g_of(a: &DenseMatrix, l: &DenseMatrix) -> DenseMatrix {
        (&a.tr_matmul(a) + &l.tr_matmul(l)).symmetrize()
    }

    fn check_invariants(a: &DenseMatrix, l: &DenseMatrix, f: &GsvdFactors) {
        assert_eq!(f.q1 + f.q2 + f.q3, f.r);
        assert_eq!(f.r, svd(&a.vcat(l)).unwrap().rank);
        let cs = &f.c_a.tr_matmul(&f.c_a) + &f.s_l.tr_matmul(&f.s_l);
        assert!((&cs - &DenseMatrix::identity(f.r)).max_abs() <= 1e-12);
        assert!(orth_err(&f.u_a) <= 1e-10, "{}", orth_err(&f.u_a));
        assert!(orth_err(&f.u_l) <= 1e-10, "{}", orth_err(&f.u_l));
        for j in f.q1..f.q1 + f.q2 {
            assert!(f.c[j] > 0.0 && f.c[j] < 1.0 && f.s[j] > 0.0 && f.s[j] < 1.0);
        }
        for w in f.c.windows(2) {
            assert!(w[0] >= w[1]);
        }
        // reconstruction through X⁻¹
        let xinv = crate::linalg::pinv(&f.x, RankTolerance::Auto).unwrap();
        let ra = (a - &f.u_a.matmul(&f.sigma_a()).matmul(&xinv)).norm_fro();
        let rl = (l - &f.u_l.matmul(&f.sigma_l()).matmul(&xinv)).norm_fro();
        assert!(ra <= 1e-10 * a.norm_fro().max(1e-300), "{ra}");
        assert!(rl <= 1e-10 * l.norm_fro().max(1e-300), "{rl}");

        let g = g_of(a, l);
        let part = partition_x(f);
        let lead = part.x1.hcat(&part.x2).hcat(&part.x3);
        assert!((&gram(&lead, &g) - &DenseMatrix::identity(f.r)).max_abs() <= 1e-10);
        assert!(g.matmul(&part.x4).norm_fro() <= 1e-10 * g.norm_fro());
        assert_eq!(part.concat(), f.x);
    }

    #[test]
    fn l_zero_is_all_first_block() {
        let f = gsvd_pair(&DenseMatrix::identity(2), &DenseMatrix::zeros(1, 2)).unwrap();
        assert_eq!((f.r, f.q1, f.q2, f.q3), (2, 2, 0, 0));
        assert!((&f.c_a - &DenseMatrix::identity(2)).max_abs() < 1e-15);
        assert_eq!(partition_x(&f).x4.cols(), 0);
        assert_eq!(sigma_max_ca(&f), 1.0);
    }

    #[test]
    fn a_zero_is_all_third_block() {
        let f = gsvd_pair(&DenseMatrix::zeros(1, 2), &DenseMatrix::identity(2)).unwrap();
        assert_eq!((f.r, f.q1, f.q2, f.q3), (2, 0, 0, 2));
        assert!((&f.s_l - &DenseMatrix::identity(2)).max_abs() < 1e-15);
        assert_eq!(sigma_max_ca(&f), 0.0);
    }

    #[test]
    fn diagonal_pair() {
        let a = DenseMatrix::from_diag(2, 2, &[2.0, 1.0]);
        let l = DenseMatrix::identity(2);
        let f = gsvd_pair(&a, &l).unwrap();
        assert_eq!((f.r, f.q1, f.q2, f.q3), (2, 0, 2, 0));
        assert!((f.c[0] - 2.0 / 5f64.sqrt()).abs() < 1e-14);
        assert!((f.c[1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
        assert!((sigma_max_ca(&f) - 2.0 / 5f64.sqrt()).abs() < 1e-14);
        assert_eq!(partition_x(&f).widths(), (0, 2, 0, 0));
        check_invariants(&a, &l, &f);
    }

    #[test]
    fn planted_joint_null_space() {
        let mut rng = SeededRng::new(17);
        let null = DenseMatrix::column(&rng.normal_vec(4));
        let proj = &DenseMatrix::identity(4) - &null.matmul(&null.transpose()).scale(1.0 / null.norm_fro().powi(2));
        let a = rng.normal_matrix(6, 4).matmul(&proj);
        let l = rng.normal_matrix(3, 4).matmul(&proj);
        let f = gsvd_pair(&a, &l).unwrap();
        let part = partition_x(&f);
        assert_eq!(part.x4.cols(), 1);
        let g = g_of(&a, &l);
        assert!(g.matmul(&part.x4).norm_fro() <= 1e-10 * g.norm_fro());
        assert!((vector::norm2(part.x4.col(0)) - 1.0).abs() < 1e-14);
        check_invariants(&a, &l, &f);
    }

    #[test]
    fn wide_and_rank_deficient_shapes() {
        let mut rng = SeededRng::new(23);
        let cases = [
            (rng.normal_matrix(3, 6), rng.normal_matrix(2, 6)),
            (rng.rank_deficient(7, 5, 2), rng.normal_matrix(5, 5)),
            (rng.normal_matrix(8, 5), rng.rank_deficient(4, 5, 1)),
            (rng.normal_matrix(4, 4), DenseMatrix::identity(4)),
        ];
        for (a, l) in &cases {
            let f = gsvd_pair(a, l).unwrap();
            check_invariants(a, l, &f);
        }
    }

    #[test]
    fn wpinv_examples() {
        let a = DenseMatrix::identity(3);
        let l = DenseMatrix::zeros(1, 3);
        let f = gsvd_pair(&a, &l).unwrap();
        let x = wpinv_via_gsvd(&f, &g_of(&a, &l)).unwrap();
        assert!((&x - &a).max_abs() < 1e-14);

        let a = DenseMatrix::from_rows(&[&[1.0, 0.0]]);
        let l = DenseMatrix::from_rows(&[&[0.0, 1.0]]);
        let f = gsvd_pair(&a, &l).unwrap();
        let x = wpinv_via_gsvd(&f, &g_of(&a, &l)).unwrap();
        assert!((&x - &DenseMatrix::column(&[1.0, 0.0])).max_abs() < 1e-14);
    }

    #[test]
    fn wpinv_matches_elden_route() {
        use crate::wpinv::{wpinv_elden, GlsProblem};
        let mut rng = SeededRng::new(91);
        let a = rng.normal_matrix(5, 4);
        let l = rng.normal_matrix(3, 4);
        let prob = GlsProblem::unweighted(a.clone(), l.clone(), vec![0.0; 5]).unwrap();
        let f = gsvd_pair(&a, &l).unwrap();
        let x = wpinv_via_gsvd(&f, prob.g()).unwrap();
        let e = wpinv_elden(&prob).unwrap();
        assert!((&x - &e).norm_fro() <= 1e-10 * e.norm_fro());
    }

    #[test]
    fn wpinv_output_lies_in_range_of_g() {
        let mut rng = SeededRng::new(92);
        let null = nullspace_basis(&rng.normal_matrix(2, 6), RankTolerance::Auto).unwrap();
        let a = rng.normal_matrix(4, 4).matmul(&null.transpose());
        let l = rng.normal_matrix(2, 4).matmul(&null.transpose());
        let g = g_of(&a, &l);
        let f = gsvd_pair(&a, &l).unwrap();
        let x = wpinv_via_gsvd(&f, &g).unwrap();
        let proj = projector_range(&g, RankTolerance::Auto).unwrap();
        let out = &x - &proj.matmul(&x);
        assert!(out.norm_fro() <= 1e-10 * x.norm_fro());
    }

    #[test]
    fn sigma_max_bounds_sampled_ratio() {
        let mut rng = SeededRng::new(93);
        let a = rng.normal_matrix(6, 5);
        let l = rng.rank_deficient(3, 5, 2);
        let g = g_of(&a, &l);
        let f = gsvd_pair(&a, &l).unwrap();
        let value = sigma_max_ca(&f);
        let mut best = 0.0_f64;
        for _ in 0..1000 {
            let v = rng.normal_vec(5);
            let num = vector::norm2(&a.matvec(&v));
            let den = vector::seminorm(&g, &v);
            best = best.max(num / den);
        }
        assert!(best <= value * (1.0 + 1e-12));
        // the maximizer is x_1
        let x1 = f.x.col(0);
        let top = vector::norm2(&a.matvec(x1)) / vector::seminorm(&g, x1);
        assert!((top - value).abs() <= 1e-6 * value);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn random_pairs_satisfy_invariants(
            seed in 0u64..10_000,
            m in 1usize..12,
            p in 1usize..10,
            n in 1usize..10,
        ) {
            let mut rng = SeededRng::new(seed);
            let a = rng.normal_matrix(m, n);
            let l = rng.normal_matrix(p, n);
            let f = gsvd_pair(&a, &l).unwrap();
            check_invariants(&a, &l, &f);
        }
    }
}
