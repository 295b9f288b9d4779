//! Assembly of the representation matrix `C` and the affinity `W`.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::aols::{solve_column, ColumnSolution, SolverConfig, Termination};
use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::omp::{omp_solve_column, OmpConfig};

/// Largest `N` for which a dense `N × N` copy is materialized.
pub const MAX_DENSE_POINTS: usize = 20_000;

/// Column solver used to build `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum SolverKind {
    Aols(SolverConfig),
    Omp(OmpConfig),
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Aols(_) => "aols",
            SolverKind::Omp(_) => "omp",
        }
    }

    pub fn solve(&self, data: &DataMatrix, j: usize) -> Result<ColumnSolution> {
        match self {
            SolverKind::Aols(cfg) => solve_column(data, j, cfg),
            SolverKind::Omp(cfg) => omp_solve_column(data, j, cfg),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SolverKind::Aols(cfg) => cfg.validate(),
            SolverKind::Omp(cfg) => cfg.validate(),
        }
    }
}

/// Per-column solver record.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMeta {
    pub iterations: usize,
    pub residual_sq_norm: f64,
    pub termination: Termination,
    pub skipped: usize,
    pub wall_time: Duration,
}

/// `N × N` coefficient matrix in compressed-column form.
#[derive(Debug, Clone)]
pub struct RepresentationMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    columns: Vec<ColumnMeta>,
    wall_time: Duration,
}

impl PartialEq for RepresentationMatrix {
    /// Compares the coefficients only; timings are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.col_ptr == other.col_ptr
            && self.row_idx == other.row_idx
            && self
                .values
                .iter()
                .map(|v| v.to_bits())
                .eq(other.values.iter().map(|v| v.to_bits()))
    }
}

impl RepresentationMatrix {
    /// Builds `C` from per-column `(row, value)` lists. Rows are sorted and
    /// the diagonal must be absent.
    pub fn from_columns(columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = columns.len();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for (j, mut col) in columns.into_iter().enumerate() {
            col.sort_by_key(|&(i, _)| i);
            for w in col.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::validation(format!(
                        "duplicate entry ({}, {})",
                        w[0].0 + 1,
                        j + 1
                    )));
                }
            }
            for (i, v) in col {
                if i >= n {
                    return Err(Error::validation(format!("row {} out of range", i + 1)));
                }
                if i == j && v != 0.0 {
                    return Err(Error::validation(format!("nonzero diagonal at {}", j + 1)));
                }
                if i != j {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        let meta = ColumnMeta {
            iterations: 0,
            residual_sq_norm: f64::NAN,
            termination: Termination::MaxIterations,
            skipped: 0,
            wall_time: Duration::ZERO,
        };
        Ok(Self {
            n,
            col_ptr,
            row_idx,
            values,
            columns: vec![meta; n],
            wall_time: Duration::ZERO,
        })
    }

    pub fn from_dense(c: &DMatrix<f64>) -> Result<Self> {
        if !c.is_square() {
            return Err(Error::validation("representation matrix must be square"));
        }
        let cols = (0..c.ncols())
            .map(|j| {
                (0..c.nrows())
                    .filter(|&i| c[(i, j)] != 0.0)
                    .map(|i| (i, c[(i, j)]))
                    .collect()
            })
            .collect();
        Self::from_columns(cols)
    }

    pub fn num_points(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzero pattern of column `j`: `(rows, values)` sorted by row.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (rows, vals) = self.column(j);
        rows.binary_search(&i).map_or(0.0, |k| vals[k])
    }

    /// `(row, col, value)` for every stored entry, column by column.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |j| {
            let (rows, vals) = self.column(j);
            rows.iter().zip(vals).map(move |(&i, &v)| (i, j, v))
        })
    }

    pub fn column_meta(&self) -> &[ColumnMeta] {
        &self.columns
    }

    /// Columns that ended with an empty support.
    pub fn warnings(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&j| self.col_ptr[j] == self.col_ptr[j + 1])
            .collect()
    }

    /// Wall-clock time of the whole build.
    pub fn wall_time(&self) -> Duration {
        self.wall_time
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.n > MAX_DENSE_POINTS {
            return Err(Error::validation(format!(
                "refusing dense {0}×{0} matrix (limit {MAX_DENSE_POINTS})",
                self.n
            )));
        }
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        Ok(m)
    }

    pub fn write_triplets<W: Write>(&self, out: W) -> io::Result<()> {
        write_triplets(self.n, self.triplets(), out)
    }
}

/// Solves every column of `data` with `kind` and assembles `C`.
///
/// Columns run in parallel on the current rayon pool; the result does not
/// depend on the number of workers.
pub fn build_representation(data: &DataMatrix, kind: &SolverKind) -> Result<RepresentationMatrix> {
    kind.validate()?;
    let n = data.num_points();
    if n < 2 {
        return Err(Error::validation("need at least two points"));
    }
    let start = Instant::now();
    let solved: Vec<(ColumnSolution, Duration)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let t0 = Instant::now();
            kind.solve(data, j).map(|s| (s, t0.elapsed()))
        })
        .collect::<Result<_>>()?;
    let wall_time = start.elapsed();

    let mut columns = Vec::with_capacity(n);
    let mut meta = Vec::with_capacity(n);
    for (sol, t) in solved {
        let col: Vec<(usize, f64)> = sol
            .support
            .iter()
            .copied()
            .zip(sol.coefficients.iter().copied())
            .filter(|&(_, v)| v != 0.0)
            .collect();
        columns.push(col);
        meta.push(ColumnMeta {
            iterations: sol.iterations,
            residual_sq_norm: sol.residual_sq_norm,
            termination: sol.termination,
            skipped: sol.skipped,
            wall_time: t,
        });
    }
    let mut c = RepresentationMatrix::from_columns(columns)?;
    c.columns = meta;
    c.wall_time = wall_time;
    Ok(c)
}

/// Symmetric nonnegative affinity `W = |C| + |C|ᵀ`, compressed-column.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn num_points(&self) -> usize {
        self.n
    }

    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (rows, vals) = self.column(j);
        rows.binary_search(&i).map_or(0.0, |k| vals[k])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |j| {
            let (rows, vals) = self.column(j);
            rows.iter().zip(vals).map(move |(&i, &v)| (i, j, v))
        })
    }

    /// Row sums (equal to column sums).
    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.column(j).1.iter().sum()).collect()
    }

    /// Wraps a dense matrix, checking symmetry, nonnegativity and a zero
    /// diagonal.
    pub fn from_dense(w: &DMatrix<f64>) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::validation("similarity matrix must be square"));
        }
        let n = w.nrows();
        for j in 0..n {
            if w[(j, j)] != 0.0 {
                return Err(Error::validation(format!("nonzero diagonal at {}", j + 1)));
            }
            for i in 0..n {
                let v = w[(i, j)];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::validation(format!(
                        "entry ({}, {}) = {v} is not a finite nonnegative number",
                        i + 1,
                        j + 1
                    )));
                }
                if v != w[(j, i)] {
                    return Err(Error::validation("similarity matrix is not symmetric"));
                }
            }
        }
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..n {
            for i in 0..n {
                if w[(i, j)] != 0.0 {
                    row_idx.push(i);
                    values.push(w[(i, j)]);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self {
            n,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.n > MAX_DENSE_POINTS {
            return Err(Error::validation(format!(
                "refusing dense {0}×{0} matrix (limit {MAX_DENSE_POINTS})",
                self.n
            )));
        }
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        Ok(m)
    }

    pub fn write_triplets<W: Write>(&self, out: W) -> io::Result<()> {
        write_triplets(self.n, self.triplets(), out)
    }
}

/// `W_ij = |C_ij| + |C_ji|`.
pub fn build_similarity(c: &RepresentationMatrix) -> SimilarityMatrix {
    let n = c.num_points();
    let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * c.nnz());
    for (i, j, v) in c.triplets() {
        let a = v.abs();
        if a != 0.0 {
            entries.push((j, i, a));
            entries.push((i, j, a));
        }
    }
    // (col, row) order; at most two terms per position and their sum is
    // order-independent, so W is exactly symmetric
    entries.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
    let mut col_ptr = vec![0usize; n + 1];
    let mut row_idx: Vec<usize> = Vec::with_capacity(entries.len());
    let mut values: Vec<f64> = Vec::with_capacity(entries.len());
    let mut last: Option<(usize, usize)> = None;
    for (row, col, v) in entries {
        if last == Some((row, col)) {
            *values.last_mut().unwrap() += v;
        } else {
            row_idx.push(row);
            values.push(v);
            col_ptr[col + 1] += 1;
            last = Some((row, col));
        }
    }
    for j in 0..n {
        col_ptr[j + 1] += col_ptr[j];
    }
    SimilarityMatrix {
        n,
        col_ptr,
        row_idx,
        values,
    }
}

/// Sparse triplet text: a `# N=<int>` header, then `row,col,value` lines
/// with 1-based indices.
pub fn write_triplets<W: Write>(
    n: usize,
    entries: impl Iterator<Item = (usize, usize, f64)>,
    mut out: W,
) -> io::Result<()> {
    let mut buf = String::new();
    let _ = writeln!(buf, "# N={n}");
    for (i, j, v) in entries {
        let _ = writeln!(buf, "{},{},{v:.16e}", i + 1, j + 1);
    }
    out.write_all(buf.as_bytes())
}

/// Reads the format produced by [`write_triplets`]; indices come back
/// 0-based.
pub fn read_triplets<R: BufRead>(input: R) -> Result<(usize, Vec<(usize, usize, f64)>)> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(1, 1, "empty file"))??;
    let n = header
        .strip_prefix("# N=")
        .and_then(|s| s.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::parse(1, 1, "expected `# N=<int>` header"))?;
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        let ln = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(ln, 1, "expected `row,col,value`"));
        }
        let idx = |f: &str, col: usize| -> Result<usize> {
            match f.trim().parse::<usize>() {
                Ok(v) if v >= 1 && v <= n => Ok(v - 1),
                _ => Err(Error::parse(ln, col, format!("bad index `{f}`"))),
            }
        };
        let i = idx(fields[0], 1)?;
        let j = idx(fields[1], 2)?;
        let v = fields[2]
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::parse(ln, 3, format!("bad value `{}`", fields[2])))?;
        out.push((i, j, v));
    }
    Ok((n, out))
}
