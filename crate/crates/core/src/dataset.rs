//! Union-of-subspaces datasets: generation, perturbation and a plain-text
//! file format.
//!
//! A dataset file looks like
//!
//! ```text
//! # D=3 N=4 n=2
//! 1,1,2,2
//! <row 1 of Y, N comma-separated values>
//! <row 2 of Y>
//! <row 3 of Y>
//! ```
//!
//! Values are written with 17 significant digits so a save/load cycle is
//! bit-exact. The ground-truth bases go to a sidecar file
//! (`<stem>.bases.csv`, see [`bases_path`]) with a `# D=<int> n=<int>` header
//! followed by one `# subspace <i>` block of `D` rows per subspace.
//!
//! A header may carry a trailing `unnormalized` token; such files skip the
//! unit-norm check on load (they come from `--no-renormalize` perturbation).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::sq_norm;

/// Tolerance on `| ‖y_j‖₂ − 1 |` for unit-norm columns.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// Parameters of a synthetic union-of-subspaces instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceSpec {
    pub n_subspaces: usize,
    pub subspace_dim: usize,
    pub ambient_dim: usize,
    pub points_per_subspace: usize,
    /// Upper bound `q` of the `Q ~ U(0, q)` shift added along the all-ones
    /// direction. `None` means noiseless points.
    pub perturbation: Option<f64>,
    /// Rescale perturbed columns back to unit norm.
    pub renormalize: bool,
    pub seed: u64,
}

impl SubspaceSpec {
    pub fn new(
        n_subspaces: usize,
        subspace_dim: usize,
        ambient_dim: usize,
        points_per_subspace: usize,
        seed: u64,
    ) -> Self {
        Self {
            n_subspaces,
            subspace_dim,
            ambient_dim,
            points_per_subspace,
            perturbation: None,
            renormalize: true,
            seed,
        }
    }

    pub fn with_perturbation(mut self, q: f64) -> Self {
        self.perturbation = Some(q);
        self
    }

    pub fn total_points(&self) -> usize {
        self.n_subspaces * self.points_per_subspace
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subspaces == 0
            || self.subspace_dim == 0
            || self.ambient_dim == 0
            || self.points_per_subspace == 0
        {
            return Err(Error::validation(format!(
                "all counts must be >= 1 (n={}, d={}, D={}, per={})",
                self.n_subspaces, self.subspace_dim, self.ambient_dim, self.points_per_subspace
            )));
        }
        if self.subspace_dim > self.ambient_dim {
            return Err(Error::validation(format!(
                "subspace dimension {} exceeds ambient dimension {}",
                self.subspace_dim, self.ambient_dim
            )));
        }
        if let Some(q) = self.perturbation {
            validate_bound(q)?;
        }
        Ok(())
    }
}

fn validate_bound(q: f64) -> Result<()> {
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::validation(format!(
            "perturbation bound must be finite and >= 0, got {q}"
        )));
    }
    Ok(())
}

/// Ground truth for a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceModel {
    pub n_subspaces: usize,
    /// One `D × d_i` orthonormal basis per subspace. Empty when the model was
    /// loaded without its sidecar file.
    pub bases: Vec<DMatrix<f64>>,
    /// Subspace id of every point, 1-based.
    pub labels: Vec<usize>,
}

impl SubspaceModel {
    pub fn new(n_subspaces: usize, bases: Vec<DMatrix<f64>>, labels: Vec<usize>) -> Result<Self> {
        let model = Self {
            n_subspaces,
            bases,
            labels,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subspaces == 0 {
            return Err(Error::validation("model needs at least one subspace"));
        }
        let mut counts = vec![0usize; self.n_subspaces];
        for (j, &l) in self.labels.iter().enumerate() {
            if l == 0 || l > self.n_subspaces {
                return Err(Error::validation(format!(
                    "label {l} of point {} outside 1..={}",
                    j + 1,
                    self.n_subspaces
                )));
            }
            counts[l - 1] += 1;
        }
        if let Some(i) = counts.iter().position(|&c| c == 0) {
            return Err(Error::validation(format!(
                "subspace {} has no points",
                i + 1
            )));
        }
        if !self.bases.is_empty() && self.bases.len() != self.n_subspaces {
            return Err(Error::validation(format!(
                "expected {} bases, got {}",
                self.n_subspaces,
                self.bases.len()
            )));
        }
        for (i, b) in self.bases.iter().enumerate() {
            let gram = b.transpose() * b;
            let err = (gram - DMatrix::identity(b.ncols(), b.ncols())).amax();
            if err > 1e-10 {
                return Err(Error::validation(format!(
                    "basis {} is not orthonormal (max |BᵀB − I| = {err:e})",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn subspace_dims(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.ncols()).collect()
    }
}

/// `D × N` matrix of data points stored column-major; column `j` is `y_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    unit_norm: bool,
    sq_norms: Vec<f64>,
}

impl DataMatrix {
    /// Wraps `values`, requiring finite entries and unit-norm columns.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        check_shape_and_finite(&values)?;
        for (j, col) in values.column_iter().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NormViolation {
                    column: j + 1,
                    norm,
                });
            }
        }
        Ok(Self {
            sq_norms: column_sq_norms(&values),
            values,
            unit_norm: true,
        })
    }

    /// Wraps `values` without the unit-norm requirement; columns must still
    /// be finite and nonzero.
    pub fn new_unnormalized(values: DMatrix<f64>) -> Result<Self> {
        check_shape_and_finite(&values)?;
        for (j, col) in values.column_iter().enumerate() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(Error::NormViolation {
                    column: j + 1,
                    norm,
                });
            }
        }
        let unit_norm = values
            .column_iter()
            .all(|c| (c.norm() - 1.0).abs() <= UNIT_NORM_TOL);
        Ok(Self {
            sq_norms: column_sq_norms(&values),
            values,
            unit_norm,
        })
    }

    /// Scales every column to unit norm.
    pub fn normalized(mut values: DMatrix<f64>) -> Result<Self> {
        check_shape_and_finite(&values)?;
        for (j, mut col) in values.column_iter_mut().enumerate() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(Error::NormViolation {
                    column: j + 1,
                    norm,
                });
            }
            col /= norm;
        }
        Self::new(values)
    }

    pub fn ambient_dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_points(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_unit_norm(&self) -> bool {
        self.unit_norm
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        let d = self.values.nrows();
        &self.values.as_slice()[j * d..(j + 1) * d]
    }

    /// `‖y_j‖²` for every column.
    pub fn sq_norms(&self) -> &[f64] {
        &self.sq_norms
    }

    /// Column-major backing storage.
    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Submatrix with the given columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> DMatrix<f64> {
        self.values.select_columns(cols)
    }
}

fn column_sq_norms(values: &DMatrix<f64>) -> Vec<f64> {
    values.column_iter().map(|c| c.norm_squared()).collect()
}

fn check_shape_and_finite(values: &DMatrix<f64>) -> Result<()> {
    if values.nrows() == 0 || values.ncols() == 0 {
        return Err(Error::validation("data matrix must be non-empty"));
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        let d = values.nrows();
        return Err(Error::validation(format!(
            "non-finite entry at row {}, column {}",
            pos % d + 1,
            pos / d + 1
        )));
    }
    Ok(())
}

/// Draws a dataset according to `spec`.
///
/// Each subspace gets an orthonormal basis from the QR factor of a Gaussian
/// `D × d` matrix; each point is `B·g / ‖B·g‖` with `g` standard Gaussian,
/// i.e. uniform on the unit sphere of the subspace. Points are grouped by
/// subspace. With `spec.perturbation = Some(q)` the result goes through
/// [`perturb_with`] on an independent random stream.
pub fn generate(spec: &SubspaceSpec) -> Result<(DataMatrix, SubspaceModel)> {
    spec.validate()?;
    let (big_d, d, per) = (
        spec.ambient_dim,
        spec.subspace_dim,
        spec.points_per_subspace,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut values = DMatrix::<f64>::zeros(big_d, spec.total_points());
    let mut bases = Vec::with_capacity(spec.n_subspaces);
    let mut labels = Vec::with_capacity(spec.total_points());
    let mut col = 0;
    for i in 0..spec.n_subspaces {
        let gaussian = DMatrix::<f64>::from_fn(big_d, d, |_, _| rng.sample(StandardNormal));
        let basis = gaussian.qr().q();
        for _ in 0..per {
            let g = nalgebra::DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
            let mut y = &basis * g;
            let norm = y.norm();
            if norm == 0.0 {
                return Err(Error::Numeric("drew a zero point".into()));
            }
            y /= norm;
            values.set_column(col, &y);
            labels.push(i + 1);
            col += 1;
        }
        bases.push(basis);
    }

    let model = SubspaceModel::new(spec.n_subspaces, bases, labels)?;
    let data = DataMatrix::new(values)?;
    let data = match spec.perturbation {
        Some(q) => {
            let mut prng = ChaCha8Rng::seed_from_u64(spec.seed);
            prng.set_stream(1);
            perturb_rng(&data, q, &mut prng, spec.renormalize)?
        }
        None => data,
    };
    Ok((data, model))
}

/// Adds `Q·𝟙` with `Q ~ U(0, q)` drawn independently per column, then
/// renormalizes each column.
pub fn perturb(data: &DataMatrix, q: f64, seed: u64) -> Result<DataMatrix> {
    perturb_with(data, q, seed, true)
}

pub fn perturb_with(data: &DataMatrix, q: f64, seed: u64, renormalize: bool) -> Result<DataMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perturb_rng(data, q, &mut rng, renormalize)
}

fn perturb_rng(
    data: &DataMatrix,
    q: f64,
    rng: &mut ChaCha8Rng,
    renormalize: bool,
) -> Result<DataMatrix> {
    validate_bound(q)?;
    if q == 0.0 {
        return Ok(data.clone());
    }
    let mut values = data.as_matrix().clone();
    let d = values.nrows();
    for col in values.as_mut_slice().chunks_mut(d) {
        let shift = q * rng.random::<f64>();
        shift_column(col, shift, renormalize);
    }
    if renormalize {
        DataMatrix::new(values)
    } else {
        DataMatrix::new_unnormalized(values)
    }
}

/// `col ← col + shift·𝟙`, optionally rescaled to unit norm.
pub fn shift_column(col: &mut [f64], shift: f64, renormalize: bool) {
    for v in col.iter_mut() {
        *v += shift;
    }
    if renormalize {
        let norm = sq_norm(col).sqrt();
        if norm > 0.0 {
            for v in col.iter_mut() {
                *v /= norm;
            }
        }
    }
}

/// Sidecar path holding the bases of the dataset stored at `path`.
pub fn bases_path(path: &Path) -> PathBuf {
    path.with_extension("bases.csv")
}

fn fmt_value(out: &mut String, v: f64) {
    // 17 significant digits round-trip every finite double.
    let _ = write!(out, "{v:.16e}");
}

fn fmt_row<I: IntoIterator<Item = f64>>(out: &mut String, values: I) {
    for (k, v) in values.into_iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        fmt_value(out, v);
    }
    out.push('\n');
}

/// Renders the dataset file contents.
pub fn format_dataset(data: &DataMatrix, model: &SubspaceModel) -> String {
    let (big_d, n) = (data.ambient_dim(), data.num_points());
    let mut out = String::new();
    let _ = write!(out, "# D={big_d} N={n} n={}", model.n_subspaces);
    if !data.is_unit_norm() {
        out.push_str(" unnormalized");
    }
    out.push('\n');
    let labels: Vec<String> = model.labels.iter().map(|l| l.to_string()).collect();
    out.push_str(&labels.join(","));
    out.push('\n');
    let m = data.as_matrix();
    for r in 0..big_d {
        fmt_row(&mut out, m.row(r).iter().copied());
    }
    out
}

/// Renders the bases sidecar contents.
pub fn format_bases(model: &SubspaceModel, ambient_dim: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# D={ambient_dim} n={}", model.n_subspaces);
    for (i, b) in model.bases.iter().enumerate() {
        let _ = writeln!(out, "# subspace {}", i + 1);
        for r in 0..b.nrows() {
            fmt_row(&mut out, b.row(r).iter().copied());
        }
    }
    out
}

/// Writes the dataset to `path` and, when the model has bases, the sidecar
/// next to it.
pub fn save(data: &DataMatrix, model: &SubspaceModel, path: &Path) -> Result<()> {
    if model.labels.len() != data.num_points() {
        return Err(Error::validation(format!(
            "{} labels for {} points",
            model.labels.len(),
            data.num_points()
        )));
    }
    fs::write(path, format_dataset(data, model))?;
    if !model.bases.is_empty() {
        fs::write(bases_path(path), format_bases(model, data.ambient_dim()))?;
    }
    Ok(())
}

/// Reads a dataset and, if present, its bases sidecar.
pub fn load(path: &Path) -> Result<(DataMatrix, SubspaceModel)> {
    let text = fs::read_to_string(path)?;
    let (data, n_subspaces, labels) = parse_dataset(&text)?;
    let side = bases_path(path);
    let bases = if side.exists() {
        parse_bases(&fs::read_to_string(&side)?, data.ambient_dim())?
    } else {
        Vec::new()
    };
    let model = SubspaceModel::new(n_subspaces, bases, labels)?;
    Ok((data, model))
}

struct Header {
    fields: Vec<(String, usize)>,
    unnormalized: bool,
}

impl Header {
    fn get(&self, key: &str, line: usize) -> Result<usize> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::parse(line, 1, format!("header is missing `{key}=`")))
    }
}

fn parse_header(line: &str, lineno: usize) -> Result<Header> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(lineno, 1, "expected header starting with `#`"))?;
    let mut fields = Vec::new();
    let mut unnormalized = false;
    for (k, tok) in body.split_whitespace().enumerate() {
        if tok == "unnormalized" {
            unnormalized = true;
            continue;
        }
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| Error::parse(lineno, k + 1, format!("bad header token `{tok}`")))?;
        let val = val
            .parse::<usize>()
            .map_err(|_| Error::parse(lineno, k + 1, format!("bad integer in `{tok}`")))?;
        fields.push((key.to_string(), val));
    }
    Ok(Header {
        fields,
        unnormalized,
    })
}

fn parse_row<T: std::str::FromStr>(line: &str, lineno: usize, expected: usize) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(expected);
    for (k, field) in line.split(',').enumerate() {
        let v = field
            .trim()
            .parse::<T>()
            .map_err(|_| Error::parse(lineno, k + 1, format!("cannot parse `{}`", field.trim())))?;
        out.push(v);
    }
    if out.len() != expected {
        return Err(Error::parse(
            lineno,
            out.len().min(expected) + 1,
            format!("expected {expected} entries, found {}", out.len()),
        ));
    }
    Ok(out)
}

/// Parses dataset file contents into `(Y, n, labels)`.
pub fn parse_dataset(text: &str) -> Result<(DataMatrix, usize, Vec<usize>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (ln, first) = lines
        .next()
        .ok_or_else(|| Error::parse(1, 1, "empty file"))?;
    let header = parse_header(first, ln)?;
    let big_d = header.get("D", ln)?;
    let n_points = header.get("N", ln)?;
    let n_subspaces = header.get("n", ln)?;
    if big_d == 0 || n_points == 0 {
        return Err(Error::parse(ln, 1, "D and N must be positive"));
    }

    let (ln, label_line) = lines
        .next()
        .ok_or_else(|| Error::parse(2, 1, "missing label line"))?;
    let labels: Vec<usize> = parse_row(label_line, ln, n_points)?;

    let mut values = DMatrix::<f64>::zeros(big_d, n_points);
    for r in 0..big_d {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::parse(r + 3, 1, format!("missing data row {}", r + 1)))?;
        let row: Vec<f64> = parse_row(line, ln, n_points)?;
        for (c, v) in row.into_iter().enumerate() {
            values[(r, c)] = v;
        }
    }
    if let Some((ln, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::parse(
            ln,
            1,
            format!("unexpected trailing content `{}`", extra.trim()),
        ));
    }

    let data = if header.unnormalized {
        DataMatrix::new_unnormalized(values)?
    } else {
        DataMatrix::new(values)?
    };
    Ok((data, n_subspaces, labels))
}

/// Parses bases sidecar contents.
pub fn parse_bases(text: &str, ambient_dim: usize) -> Result<Vec<DMatrix<f64>>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
    let (ln, first) = lines
        .next()
        .ok_or_else(|| Error::parse(1, 1, "empty file"))?;
    let header = parse_header(first, ln)?;
    let big_d = header.get("D", ln)?;
    let n = header.get("n", ln)?;
    if big_d != ambient_dim {
        return Err(Error::parse(
            ln,
            1,
            format!("bases have D={big_d} but dataset has D={ambient_dim}"),
        ));
    }
    let mut bases = Vec::with_capacity(n);
    for i in 0..n {
        let (ln, marker) = lines
            .next()
            .ok_or_else(|| Error::parse(0, 1, format!("missing block for subspace {}", i + 1)))?;
        if marker.trim() != format!("# subspace {}", i + 1) {
            return Err(Error::parse(
                ln,
                1,
                format!("expected `# subspace {}`", i + 1),
            ));
        }
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(big_d);
        for _ in 0..big_d {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::parse(ln, 1, "truncated basis block"))?;
            let width = rows
                .first()
                .map_or_else(|| line.split(',').count(), Vec::len);
            rows.push(parse_row(line, ln, width)?);
        }
        let d = rows[0].len();
        bases.push(DMatrix::from_fn(big_d, d, |r, c| rows[r][c]));
    }
    Ok(bases)
}
