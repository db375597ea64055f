//! Column-major dense matrix used as the carrier for every factorization.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use crate::error::{GlsError, Result};
use crate::linalg::vector;

/// Real dense matrix stored column by column.
///
/// Public constructors reject NaN and infinite entries.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from column-major data.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(GlsError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(GlsError::NonFinite {
                row: pos % rows.max(1),
                col: pos / rows.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices, mostly for tests and small literals.
    ///
    /// Panics if the rows are ragged or contain non-finite values.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == n), "ragged rows");
        let mat = Self::from_fn(m, n, |i, j| rows[i][j]);
        assert!(mat.data.iter().all(|v| v.is_finite()), "non-finite literal");
        mat
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            out.data[i * n + i] = 1.0;
        }
        out
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// `rows x cols` matrix with `diag` on its main diagonal.
    pub fn from_diag(rows: usize, cols: usize, diag: &[f64]) -> Self {
        let mut out = Self::zeros(rows, cols);
        for (i, &d) in diag.iter().enumerate().take(rows.min(cols)) {
            out.data[i * rows + i] = d;
        }
        out
    }

    /// Single-column matrix.
    pub fn column(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    /// Builds a matrix whose columns are the given vectors (all of length `rows`).
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            assert_eq!(c.len(), rows, "column length mismatch");
            data.extend_from_slice(c);
        }
        Self {
            rows,
            cols: columns.len(),
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Column-major backing slice.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub(crate) fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Mutable access to two distinct columns at once.
    pub(crate) fn col_pair_mut(&mut self, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
        assert!(p < q);
        let m = self.rows;
        let (left, right) = self.data.split_at_mut(q * m);
        (&mut left[p * m..(p + 1) * m], &mut right[..m])
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.cols).map(move |j| self.col(j))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Columns `range` as a new matrix.
    pub fn col_range(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.cols);
        Self {
            rows: self.rows,
            cols: end - start,
            data: self.data[start * self.rows..end * self.rows].to_vec(),
        }
    }

    /// Rows `start..end` as a new matrix.
    pub fn row_range(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.rows);
        Self::from_fn(end - start, self.cols, |i, j| self.get(start + i, j))
    }

    /// `[self other]`
    pub fn hcat(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "hcat row mismatch");
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self {
            rows: self.rows,
            cols: self.cols + other.cols,
            data,
        }
    }

    /// `[self; other]`
    pub fn vcat(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols, "vcat column mismatch");
        let m = self.rows;
        Self::from_fn(m + other.rows, self.cols, |i, j| {
            if i < m {
                self.get(i, j)
            } else {
                other.get(i - m, j)
            }
        })
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Self::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let b = rhs.get(k, j);
                if b != 0.0 {
                    vector::axpy(b, self.col(k), dst);
                }
            }
        }
        out
    }

    /// `selfᵀ · rhs` without forming the transpose.
    pub fn tr_matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows, "tr_matmul row mismatch");
        Self::from_fn(self.cols, rhs.cols, |i, j| {
            vector::dot(self.col(i), rhs.col(j))
        })
    }

    /// `self · x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec length mismatch");
        let mut y = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                vector::axpy(xj, self.col(j), &mut y);
            }
        }
        y
    }

    /// `selfᵀ · x`
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len(), "tr_matvec length mismatch");
        (0..self.cols).map(|j| vector::dot(self.col(j), x)).collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        vector::norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `(self + selfᵀ) / 2`.
    pub fn symmetrize(&self) -> Self {
        assert!(self.is_square(), "symmetrize needs a square matrix");
        Self::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self.get(i, j) + self.get(j, i))
        })
    }

    /// Frobenius norm of `self - selfᵀ`.
    pub fn asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let mut s = 0.0;
        for j in 0..self.cols {
            for i in 0..self.rows {
                let d = self.get(i, j) - self.get(j, i);
                s += d * d;
            }
        }
        s.sqrt()
    }

    /// Keeps only the listed columns, in order.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let cols: Vec<Vec<f64>> = idx.iter().map(|&j| self.col(j).to_vec()).collect();
        Self::from_columns(self.rows, &cols)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[j * self.rows + i]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(12) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(8) {
                write!(f, "{:>12.5e} ", self.get(i, j))?;
            }
            if self.cols > 8 {
                write!(f, "...")?;
            }
            writeln!(f)?;
        }
        if self.rows > 12 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

impl<'a> Mul<&'a DenseMatrix> for &'a DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: &'a DenseMatrix) -> DenseMatrix {
        self.matmul(rhs)
    }
}

impl<'a> Add<&'a DenseMatrix> for &'a DenseMatrix {
    type Output = DenseMatrix;
    fn add(self, rhs: &'a DenseMatrix) -> DenseMatrix {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a DenseMatrix> for &'a DenseMatrix {
    type Output = DenseMatrix;
    fn sub(self, rhs: &'a DenseMatrix) -> DenseMatrix {
        assert_eq!(self.shape(), rhs.shape(), "sub shape mismatch");
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &DenseMatrix {
    type Output = DenseMatrix;
    fn neg(self) -> DenseMatrix {
        self.scale(-1.0)
    }
}
