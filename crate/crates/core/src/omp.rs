//! Orthogonal matching pursuit, the greedy baseline for the representation
//! step.

use nalgebra::DVector;
use serde::Serialize;

use crate::aols::{ColumnSolution, Termination};
use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::{dot, least_squares, sq_norm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmpConfig {
    /// Largest support size; clamped to `N − 1`.
    pub max_sparsity: usize,
    /// Stop once `‖r‖² < epsilon`.
    pub epsilon: f64,
}

impl Default for OmpConfig {
    fn default() -> Self {
        Self {
            max_sparsity: 10,
            epsilon: 1e-6,
        }
    }
}

impl OmpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sparsity == 0 {
            return Err(Error::validation("max sparsity must be >= 1"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::validation(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Sparse-codes column `j` against the other columns by OMP.
///
/// Each step adds the point with the largest `|y_lᵀ r|` (ties to the lower
/// index) and refits `r = y_j − Y_A Y_A† y_j`.
pub fn omp_solve_column(data: &DataMatrix, j: usize, config: &OmpConfig) -> Result<ColumnSolution> {
    config.validate()?;
    let n = data.num_points();
    if n < 2 {
        return Err(Error::validation("need at least two points"));
    }
    if j >= n {
        return Err(Error::validation(format!(
            "column {j} out of range (N = {n})"
        )));
    }
    let max_support = config.max_sparsity.min(n - 1);
    let y_j = data.column(j);
    let mut residual = y_j.to_vec();
    let mut used = vec![false; n];
    used[j] = true;
    let mut support = Vec::with_capacity(max_support);
    let mut coefficients: Vec<f64> = Vec::new();
    let mut termination = Termination::MaxIterations;

    while sq_norm(&residual) >= config.epsilon {
        if support.len() >= max_support {
            break;
        }
        let mut best: Option<(f64, usize)> = None;
        for l in (0..n).filter(|&l| !used[l]) {
            let c = dot(data.column(l), &residual).abs();
            if best.map_or(true, |(b, _)| c > b) {
                best = Some((c, l));
            }
        }
        let Some((_, pick)) = best else {
            termination = Termination::NoCandidates;
            break;
        };
        used[pick] = true;
        support.push(pick);
        let y_a = data.select_columns(&support);
        let c = least_squares(&y_a, y_j)?;
        let r = DVector::from_column_slice(y_j) - &y_a * &c;
        residual.copy_from_slice(r.as_slice());
        coefficients = c.iter().copied().collect();
    }
    let residual_sq_norm = sq_norm(&residual);
    if residual_sq_norm < config.epsilon {
        termination = Termination::ResidualBelowEpsilon;
    }
    Ok(ColumnSolution {
        target: j,
        iterations: support.len(),
        support,
        coefficients,
        residual_sq_norm,
        termination,
        skipped: 0,
    })
}
