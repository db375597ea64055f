//! Coordinate-format sparse matrix.
//!
//! Entries are kept sorted by `(row, col)` with duplicates summed and exact
//! zeros dropped, so two matrices with the same nonzeros compare equal.

use crate::error::{GlsError, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn new(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, v) in &triplets {
            if i >= rows || j >= cols {
                return Err(GlsError::DimensionMismatch(format!(
                    "entry ({i}, {j}) outside a {rows}x{cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(GlsError::NonFinite { row: i, col: j });
            }
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            match entries.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => entries.push((i, j, v)),
            }
        }
        entries.retain(|e| e.2 != 0.0);
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn from_dense(a: &DenseMatrix) -> Self {
        let mut entries = Vec::new();
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                let v = a.get(i, j);
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self {
            rows: a.rows(),
            cols: a.cols(),
            entries,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            out.set(i, j, v);
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let t = self.entries.iter().map(|&(i, j, v)| (j, i, v)).collect();
        Self::new(self.cols, self.rows, t).expect("transpose of a valid matrix")
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for &(i, j, v) in &self.entries {
            y[j] += v * x[i];
        }
        y
    }
}
