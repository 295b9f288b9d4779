//! Small dense helpers shared by the column solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sq_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// `y ← y − alpha·x`
#[inline]
pub fn axpy_neg(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi -= alpha * xi;
    }
}

/// Minimum-norm least-squares solution of `min_c ‖target − a·c‖₂`.
///
/// Singular values below `max(rows, cols)·σ_max·ε` are treated as zero, so a
/// column-rank-deficient `a` yields the pseudo-inverse solution.
pub fn least_squares(a: &DMatrix<f64>, target: &[f64]) -> Result<DVector<f64>> {
    if a.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    if a.nrows() != target.len() {
        return Err(Error::validation(format!(
            "least squares: matrix has {} rows but target has {} entries",
            a.nrows(),
            target.len()
        )));
    }
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    if !sigma_max.is_finite() {
        return Err(Error::Numeric("non-finite singular value".into()));
    }
    let cutoff = (a.nrows().max(a.ncols()) as f64) * sigma_max * f64::EPSILON;
    let b = DVector::from_column_slice(target);
    if sigma_max == 0.0 {
        return Ok(DVector::zeros(a.ncols()));
    }
    svd.solve(&b, cutoff)
        .map_err(|e| Error::Numeric(format!("least squares: {e}")))
}

/// Number of singular values above `tol · σ_max`.
pub fn numerical_rank(a: &DMatrix<f64>, tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}
