//! Matrix Market reading and writing, plus the on-disk layouts for GSVD
//! factors, generated problems and bidiagonalization dumps.
//!
//! Supported headers: `matrix {coordinate|array} {real|integer|double} {general|symmetric}`.
//! Vectors are stored as `n×1` arrays.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{GlsError, Result};
use crate::ggkb::BidiagState;
use crate::gsvd::GsvdFactors;
use crate::linalg::{DenseMatrix, SparseMatrix};
use crate::problems::{GeneratedProblem, VALIDATION_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmFormat {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmSymmetry {
    General,
    Symmetric,
}

/// Contents of a Matrix Market file: coordinate files give a sparse matrix,
/// array files a dense one.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixMarketData {
    Sparse(SparseMatrix),
    Dense(DenseMatrix),
}

impl MatrixMarketData {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Self::Sparse(s) => s.shape(),
            Self::Dense(d) => d.shape(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Self::Sparse(s) => s.to_dense(),
            Self::Dense(d) => d.clone(),
        }
    }

    pub fn into_dense(self) -> DenseMatrix {
        match self {
            Self::Sparse(s) => s.to_dense(),
            Self::Dense(d) => d,
        }
    }

    /// Entries of an `n×1` or `1×n` matrix.
    pub fn into_vector(self) -> Option<Vec<f64>> {
        let (r, c) = self.shape();
        if c == 1 || r == 1 {
            Some(self.into_dense().into_vec())
        } else {
            None
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> GlsError {
    GlsError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_matrix_market(path: &Path) -> Result<MatrixMarketData> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_matrix_market(&text, path)
}

/// Parses Matrix Market text; `origin` is only used in error messages.
pub fn parse_matrix_market(text: &str, origin: &Path) -> Result<MatrixMarketData> {
    let err = |line: usize, msg: String| GlsError::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(err(1, format!("malformed header {header:?}")));
    }
    if tokens[1] != "matrix" {
        return Err(err(1, format!("unsupported object {:?}", tokens[1])));
    }
    let format = match tokens[2].as_str() {
        "coordinate" => MmFormat::Coordinate,
        "array" => MmFormat::Array,
        other => return Err(err(1, format!("unsupported format {other:?}"))),
    };
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(err(1, format!("unsupported field {other:?}; only real data is accepted"))),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => MmSymmetry::General,
        "symmetric" => MmSymmetry::Symmetric,
        other => return Err(err(1, format!("unsupported symmetry {other:?}"))),
    };

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = body.next().ok_or_else(|| err(1, "missing size line".into()))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| err(size_line, format!("bad size line: {e}")))?;

    let parse_value = |line: usize, t: &str| -> Result<f64> {
        let v: f64 = t
            .parse()
            .map_err(|_| err(line, format!("bad value {t:?}")))?;
        if !v.is_finite() {
            return Err(err(line, format!("non-finite value {t:?}")));
        }
        Ok(v)
    };

    match format {
        MmFormat::Coordinate => {
            let [rows, cols, nnz] = dims[..] else {
                return Err(err(size_line, "coordinate size line needs rows cols nnz".into()));
            };
            if rows.checked_mul(cols).is_none() {
                return Err(err(size_line, format!("dimensions {rows}x{cols} overflow")));
            }
            if symmetry == MmSymmetry::Symmetric && rows != cols {
                return Err(err(size_line, "symmetric matrix must be square".into()));
            }
            let mut trips = Vec::with_capacity(nnz * if symmetry == MmSymmetry::Symmetric { 2 } else { 1 });
            let mut seen = 0;
            for (ln, line) in body {
                let t: Vec<&str> = line.split_whitespace().collect();
                if t.len() != 3 {
                    return Err(err(ln, format!("expected 'row col value', got {line:?}")));
                }
                let idx = |s: &str, bound: usize| -> Result<usize> {
                    let i: usize = s.parse().map_err(|_| err(ln, format!("bad index {s:?}")))?;
                    if i == 0 || i > bound {
                        return Err(err(ln, format!("index {i} outside 1..={bound}")));
                    }
                    Ok(i - 1)
                };
                let (i, j) = (idx(t[0], rows)?, idx(t[1], cols)?);
                let v = parse_value(ln, t[2])?;
                if symmetry == MmSymmetry::Symmetric {
                    if j > i {
                        return Err(err(ln, "symmetric storage must be lower triangular".into()));
                    }
                    if i != j {
                        trips.push((j, i, v));
                    }
                }
                trips.push((i, j, v));
                seen += 1;
                if seen > nnz {
                    return Err(err(ln, format!("more than the declared {nnz} entries")));
                }
            }
            if seen != nnz {
                return Err(err(size_line, format!("declared {nnz} entries, found {seen}")));
            }
            Ok(MatrixMarketData::Sparse(SparseMatrix::new(rows, cols, trips)?))
        }
        MmFormat::Array => {
            let [rows, cols] = dims[..] else {
                return Err(err(size_line, "array size line needs rows cols".into()));
            };
            let total = rows
                .checked_mul(cols)
                .ok_or_else(|| err(size_line, format!("dimensions {rows}x{cols} overflow")))?;
            if symmetry == MmSymmetry::Symmetric && rows != cols {
                return Err(err(size_line, "symmetric matrix must be square".into()));
            }
            let expected = match symmetry {
                MmSymmetry::General => total,
                MmSymmetry::Symmetric => rows * (rows + 1) / 2,
            };
            let mut values = Vec::with_capacity(expected);
            for (ln, line) in body {
                for t in line.split_whitespace() {
                    if values.len() == expected {
                        return Err(err(ln, format!("more than the declared {expected} values")));
                    }
                    values.push(parse_value(ln, t)?);
                }
            }
            if values.len() != expected {
                return Err(err(size_line, format!("declared {expected} values, found {}", values.len())));
            }
            let dense = match symmetry {
                MmSymmetry::General => DenseMatrix::new(rows, cols, values)?,
                MmSymmetry::Symmetric => {
                    let mut d = DenseMatrix::zeros(rows, cols);
                    let mut it = values.into_iter();
                    for j in 0..cols {
                        for i in j..rows {
                            let v = it.next().expect("counted above");
                            d.set(i, j, v);
                            d.set(j, i, v);
                        }
                    }
                    d
                }
            };
            Ok(MatrixMarketData::Dense(dense))
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn format_sparse(s: &SparseMatrix) -> String {
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    out.push_str(&format!("{} {} {}\n", s.rows(), s.cols(), s.nnz()));
    // column-major entry order, as most readers expect
    let mut entries = s.entries().to_vec();
    entries.sort_by_key(|e| (e.1, e.0));
    for (i, j, v) in entries {
        out.push_str(&format!("{} {} {:e}\n", i + 1, j + 1, v));
    }
    out
}

pub fn format_dense(d: &DenseMatrix) -> String {
    let mut out = String::from("%%MatrixMarket matrix array real general\n");
    out.push_str(&format!("{} {}\n", d.rows(), d.cols()));
    for v in d.as_slice() {
        out.push_str(&format!("{v:e}\n"));
    }
    out
}

pub fn write_sparse(path: &Path, s: &SparseMatrix) -> Result<()> {
    write_text(path, &format_sparse(s))
}

pub fn write_dense(path: &Path, d: &DenseMatrix) -> Result<()> {
    write_text(path, &format_dense(d))
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    write_dense(path, &DenseMatrix::column(v))
}

pub fn read_dense(path: &Path) -> Result<DenseMatrix> {
    Ok(read_matrix_market(path)?.into_dense())
}

/// Reads an `n×1` (or `1×n`) matrix as a vector.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let data = read_matrix_market(path)?;
    let (r, c) = data.shape();
    data.into_vector().ok_or_else(|| GlsError::Parse {
        path: path.to_path_buf(),
        line: 2,
        msg: format!("expected a vector, found a {r}x{c} matrix"),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    write_text(path, &(text + "\n"))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct GsvdSidecar {
    pub r: usize,
    pub q1: usize,
    pub q2: usize,
    pub q3: usize,
}

impl From<&GsvdFactors> for GsvdSidecar {
    fn from(f: &GsvdFactors) -> Self {
        Self {
            r: f.r,
            q1: f.q1,
            q2: f.q2,
            q3: f.q3,
        }
    }
}

/// Writes `U_A.mtx`, `U_L.mtx`, `X.mtx`, `CA.mtx`, `SL.mtx` and `gsvd.json`.
pub fn export_gsvd(dir: &Path, f: &GsvdFactors) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let files = [
        ("U_A.mtx", &f.u_a),
        ("U_L.mtx", &f.u_l),
        ("X.mtx", &f.x),
        ("CA.mtx", &f.c_a),
        ("SL.mtx", &f.s_l),
    ];
    let mut written = Vec::new();
    for (name, m) in files {
        let p = dir.join(name);
        write_dense(&p, m)?;
        written.push(p);
    }
    let p = dir.join("gsvd.json");
    write_json(&p, &GsvdSidecar::from(f))?;
    written.push(p);
    Ok(written)
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
struct ProblemMeta<'a> {
    seed: u64,
    func: &'a str,
    l_kind: &'a str,
    m: usize,
    n: usize,
    tolerances_used: Tolerances,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
struct Tolerances {
    validation: f64,
    rank: &'static str,
}

/// Writes `A.mtx`, `L.mtx`, `b.mtx`, `x_true.mtx` and `meta.json`.
pub fn export_problem(dir: &Path, gp: &GeneratedProblem) -> Result<()> {
    ensure_dir(dir)?;
    let prob = &gp.problem;
    write_sparse(&dir.join("A.mtx"), &SparseMatrix::from_dense(prob.a()))?;
    write_sparse(&dir.join("L.mtx"), &SparseMatrix::from_dense(prob.l()))?;
    write_vector(&dir.join("b.mtx"), prob.b())?;
    write_vector(&dir.join("x_true.mtx"), &gp.x_true)?;
    let meta = ProblemMeta {
        seed: gp.seed,
        func: gp.func.name(),
        l_kind: gp.l_kind,
        m: prob.nrows(),
        n: prob.ncols(),
        tolerances_used: Tolerances {
            validation: VALIDATION_TOL,
            rank: "max(m,n)*eps*sigma_max",
        },
    };
    write_json(&dir.join("meta.json"), &meta)
}

/// Writes `alphas_betas.csv`, `V.mtx` and `U_tilde.mtx`.
pub fn dump_bidiag(dir: &Path, state: &BidiagState) -> Result<()> {
    ensure_dir(dir)?;
    let path = dir.join("alphas_betas.csv");
    let io_err = |e: csv::Error| io_error(&path, e.into());
    let mut w = csv::Writer::from_path(&path).map_err(io_err)?;
    w.write_record(["i", "alpha", "beta"]).map_err(io_err)?;
    for i in 0..state.alphas.len().max(state.betas.len()) {
        let cell = |v: &[f64]| v.get(i).map(|x| format!("{x:e}")).unwrap_or_default();
        w.write_record([(i + 1).to_string(), cell(&state.alphas), cell(&state.betas)])
            .map_err(io_err)?;
    }
    w.flush().map_err(|e| io_error(&path, e))?;
    write_dense(&dir.join("V.mtx"), &state.v_matrix(state.v.len()))?;
    write_dense(&dir.join("U_tilde.mtx"), &state.u_tilde_matrix(state.u_tilde.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<MatrixMarketData> {
        parse_matrix_market(text, Path::new("test.mtx"))
    }

    #[test]
    fn minimal_coordinate_file() {
        let data = parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 3.0\n").unwrap();
        let MatrixMarketData::Sparse(s) = data else { panic!("expected sparse") };
        assert_eq!(s.shape(), (2, 2));
        assert_eq!(s.entries(), &[(0, 0, 3.0)]);
    }

    #[test]
    fn array_column() {
        let data = parse("%%MatrixMarket matrix array real general\n% note\n2 1\n1\n2\n").unwrap();
        assert_eq!(data, MatrixMarketData::Dense(DenseMatrix::column(&[1.0, 2.0])));
    }

    #[test]
    fn symmetric_storage_is_expanded() {
        let text = "%%MatrixMarket matrix coordinate integer symmetric\n3 3 3\n1 1 4\n3 1 -1\n2 2 5\n";
        let d = parse(text).unwrap().into_dense();
        assert_eq!(d.get(0, 2), -1.0);
        assert_eq!(d.get(2, 0), -1.0);
        assert_eq!(d.get(1, 1), 5.0);
        let text = "%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n";
        let d = parse(text).unwrap().into_dense();
        assert_eq!(d, DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 3.0]]));
    }

    #[test]
    fn duplicates_are_summed() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 1.5\n1 2 2.5\n";
        let MatrixMarketData::Sparse(s) = parse(text).unwrap() else { panic!() };
        assert_eq!(s.entries(), &[(0, 1, 4.0)]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n", 1),
            ("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n", 3),
            ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n", 2),
            ("%%MatrixMarket matrix array real general\n2 2\n1\nx\n", 4),
            ("%%MatrixMarket matrix coordinate pattern general\n1 1 1\n1 1\n", 1),
            ("garbage\n", 1),
            ("%%MatrixMarket matrix array real general\n99999999999 99999999999\n", 2),
        ];
        for (text, line) in cases {
            match parse(text) {
                Err(GlsError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn dense_roundtrip_is_bit_exact() {
        let d = SeededRng::new(3).normal_matrix(7, 4);
        let back = parse(&format_dense(&d)).unwrap().into_dense();
        assert_eq!(back, d);
    }

    #[test]
    fn random_sparse_roundtrip() {
        let mut rng = SeededRng::new(50);
        let mut trips = Vec::new();
        for _ in 0..300 {
            trips.push((rng.range(0, 50), rng.range(0, 40), rng.normal()));
        }
        let s = SparseMatrix::new(50, 40, trips).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.mtx");
        write_sparse(&p, &s).unwrap();
        assert_eq!(read_matrix_market(&p).unwrap(), MatrixMarketData::Sparse(s));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_matrix_market(Path::new("/nonexistent/dir/a.mtx")),
            Err(GlsError::Io { .. })
        ));
    }

    #[test]
    fn vectors_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.mtx");
        write_vector(&p, &[1.0, -0.1, 3e-300]).unwrap();
        assert_eq!(read_vector(&p).unwrap(), vec![1.0, -0.1, 3e-300]);
        write_dense(&p, &DenseMatrix::zeros(2, 2)).unwrap();
        assert!(read_vector(&p).is_err());
    }

    proptest! {
        #[test]
        fn sparse_text_roundtrip(
            trips in prop::collection::vec((0usize..9, 0usize..7, -1e3f64..1e3), 0..30)
        ) {
            let s = SparseMatrix::new(9, 7, trips).unwrap();
            let back = parse(&format_sparse(&s)).unwrap();
            prop_assert_eq!(back, MatrixMarketData::Sparse(s));
        }
    }
}
