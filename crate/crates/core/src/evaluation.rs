//! Clustering and representation quality metrics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::representation::RepresentationMatrix;
use crate::spectral::ClusterLabels;

/// Default magnitude above which a coefficient counts as part of the support.
pub const SUPPORT_TOL: f64 = 1e-8;

fn check_labels(c: &RepresentationMatrix, truth: &[usize]) -> Result<()> {
    if c.num_points() != truth.len() {
        return Err(Error::validation(format!(
            "representation has {} columns but truth has {} labels",
            c.num_points(),
            truth.len()
        )));
    }
    Ok(())
}

/// Fraction of columns whose support (entries with `|C_ij| > tol`) stays in
/// the column's own subspace.
pub fn preserving_rate(c: &RepresentationMatrix, truth: &[usize], tol: f64) -> Result<f64> {
    check_labels(c, truth)?;
    let n = truth.len();
    let preserving = (0..n)
        .filter(|&j| {
            let (rows, vals) = c.column(j);
            rows.iter()
                .zip(vals)
                .all(|(&i, v)| v.abs() <= tol || truth[i] == truth[j])
        })
        .count();
    Ok(preserving as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PreservingError {
    pub value: f64,
    /// Columns with `‖c_j‖₁ = 0`; they contribute zero to `value`.
    pub zero_columns: usize,
}

/// `(1/N) Σ_j Σ_{i ∈ O_j} |C_ij| / ‖c_j‖₁`, where `O_j` holds the points
/// from other subspaces.
pub fn preserving_error(c: &RepresentationMatrix, truth: &[usize]) -> Result<PreservingError> {
    check_labels(c, truth)?;
    let n = truth.len();
    let mut total = 0.0;
    let mut zero_columns = 0;
    for j in 0..n {
        let (rows, vals) = c.column(j);
        let l1: f64 = vals.iter().map(|v| v.abs()).sum();
        if l1 == 0.0 {
            zero_columns += 1;
            continue;
        }
        let off: f64 = rows
            .iter()
            .zip(vals)
            .filter(|(&i, _)| truth[i] != truth[j])
            .map(|(_, v)| v.abs())
            .sum();
        total += off / l1;
    }
    Ok(PreservingError {
        value: total / n as f64,
        zero_columns,
    })
}

/// Best-permutation agreement between predicted and true labels, via an
/// optimal assignment on the confusion matrix.
pub fn clustering_accuracy(pred: &ClusterLabels, truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::validation(format!(
            "{} predicted labels for {} points",
            pred.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::validation("no labels"));
    }
    let index = |labels: &[usize]| {
        let mut ids: Vec<usize> = labels.to_vec();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    let p_ids = index(pred.as_slice());
    let t_ids = index(truth);
    let size = p_ids.len().max(t_ids.len());
    let mut confusion = vec![vec![0i64; size]; size];
    for (p, t) in pred.as_slice().iter().zip(truth) {
        let a = p_ids.binary_search(p).unwrap();
        let b = t_ids.binary_search(t).unwrap();
        confusion[a][b] += 1;
    }
    let cost: Vec<Vec<i64>> = confusion
        .iter()
        .map(|row| row.iter().map(|&c| -c).collect())
        .collect();
    let assignment = hungarian(&cost);
    let matched: i64 = assignment
        .iter()
        .enumerate()
        .map(|(r, &c)| confusion[r][c])
        .sum();
    Ok(matched as f64 / truth.len() as f64)
}

/// Minimum-cost perfect matching on a square cost matrix (Kuhn–Munkres with
/// potentials, `O(n³)`). Returns the column assigned to each row.
pub fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; index 0 is the virtual source
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Wall-clock seconds spent in each stage of one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RuntimeBreakdown {
    pub representation: f64,
    pub spectral: f64,
    pub total: f64,
}

/// Scores of a single pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub method: String,
    pub seed: u64,
    pub n_points: usize,
    pub subspace_preserving_rate: f64,
    pub subspace_preserving_error: f64,
    pub clustering_accuracy: f64,
    pub zero_columns: usize,
    pub runtime_seconds: RuntimeBreakdown,
}

impl MetricsReport {
    /// Computes all metrics for `c` and `pred` against `truth`.
    pub fn evaluate(
        c: &RepresentationMatrix,
        pred: &ClusterLabels,
        truth: &[usize],
        runtime: RuntimeBreakdown,
    ) -> Result<Self> {
        let err = preserving_error(c, truth)?;
        Ok(Self {
            scenario: String::new(),
            method: String::new(),
            seed: 0,
            n_points: truth.len(),
            subspace_preserving_rate: preserving_rate(c, truth, SUPPORT_TOL)?,
            subspace_preserving_error: err.value,
            clustering_accuracy: clustering_accuracy(pred, truth)?,
            zero_columns: err.zero_columns,
            runtime_seconds: runtime,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
