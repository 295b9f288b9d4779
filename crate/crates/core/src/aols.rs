//! Accelerated orthogonal least-squares (AOLS) for one column of the
//! self-expressive representation.
//!
//! For a target point `y_j` the solver keeps
//!
//! * the residual `r = P⊥_A y_j` of `y_j` against the selected points `A`,
//! * for every other point `l` the projection `t_l = P⊥_A y_l`,
//! * the orthogonal vectors `u` spanning the selected directions.
//!
//! Each iteration picks the `L` candidates with the largest
//! `(y_lᵀ r / y_lᵀ t_l)² · ‖t_l‖²`, i.e. the largest drop in residual energy,
//! peels them off the residual one at a time and then projects the new `u`
//! vectors out of every remaining `t_l`. Coefficients are recovered at the
//! end by a least-squares fit on the selected columns.
//!
//! The `t_l` are kept implicitly through the norms and correlations the score
//! needs, which makes an iteration cost one dot product per candidate and new
//! direction, the same as a matching-pursuit correlation step.
//!
//! Within an iteration the `k`-th selected projection is first made
//! orthogonal to the `u` vectors already produced in that iteration. For
//! `L = 1` this is a no-op; for `L > 1` it keeps the `u` vectors mutually
//! orthogonal so that `r` and every `t_l` remain exact orthogonal-complement
//! projections.

use nalgebra::DVector;
use serde::Serialize;

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::{axpy_neg, dot, least_squares, sq_norm};

/// Parameters of the AOLS column solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Number of points `L` added to the support per iteration.
    pub block_size: usize,
    /// Stop once `‖r‖² < epsilon`.
    pub epsilon: f64,
    /// Iteration cap `T`.
    pub max_iterations: usize,
    /// Candidates with `‖t_l‖²` or `|y_lᵀ t_l|` at or below this are skipped.
    /// For unit-norm data `‖t_l‖²` is the squared sine of the angle between
    /// `y_l` and the selected span, so the default `1e-2` drops points within
    /// about 6° of that span. Such points, typically the second of two
    /// near-parallel picks in one iteration, leave the final fit with large
    /// cancelling coefficients.
    pub degeneracy_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            block_size: 1,
            epsilon: 1e-6,
            max_iterations: 10,
            degeneracy_tol: 1e-2,
        }
    }
}

impl SolverConfig {
    pub fn with_block_size(mut self, l: usize) -> Self {
        self.block_size = l;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 {
            return Err(Error::validation("block size L must be >= 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation("max iterations T must be >= 1"));
        }
        if !(self.epsilon >= 0.0) || self.epsilon.is_nan() {
            return Err(Error::validation(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.degeneracy_tol >= 0.0) {
            return Err(Error::validation(format!(
                "degeneracy tolerance must be >= 0, got {}",
                self.degeneracy_tol
            )));
        }
        Ok(())
    }

    /// Iteration cap after enforcing `L·T ≤ N − 1`.
    pub fn effective_iterations(&self, n_points: usize) -> usize {
        let budget = n_points.saturating_sub(1) / self.block_size;
        self.max_iterations.min(budget.max(1))
    }
}

/// Why a column solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ResidualBelowEpsilon,
    MaxIterations,
    /// No usable candidate was left. With an empty support this is the
    /// degenerate-column diagnostic.
    NoCandidates,
}

/// Sparse representation of one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSolution {
    pub target: usize,
    /// Selected indices in selection order; never contains `target`.
    pub support: Vec<usize>,
    /// Least-squares coefficients aligned with `support`.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    /// `‖y_j − Y_A c‖²` of the final fit.
    pub residual_sq_norm: f64,
    pub termination: Termination,
    /// Selected candidates dropped mid-iteration as degenerate.
    pub skipped: usize,
}

impl ColumnSolution {
    /// Coefficient vector of length `n` with zeros off the support.
    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; n];
        for (&i, &v) in self.support.iter().zip(&self.coefficients) {
            c[i] = v;
        }
        c
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

/// Relative margin below which two selection scores are treated as equal.
pub const TIE_RTOL: f64 = 1e-9;

fn beats(s: f64, b: f64) -> bool {
    s - b > TIE_RTOL * s.abs().max(b.abs())
}

/// Working state of the solver for one target column.
///
/// The selected directions are kept as an orthonormal set `q_1, q_2, …`, so
/// `t_l = y_l − Σ_i (y_lᵀ q_i) q_i` is never stored: the solver only tracks
/// `‖t_l‖²` and `y_lᵀ r`, each updated with one dot product per new
/// direction. [`projection`](Self::projection) rebuilds `t_l` on demand.
#[derive(Debug, Clone)]
pub struct AolsState<'a> {
    data: &'a DataMatrix,
    target: usize,
    dim: usize,
    residual: Vec<f64>,
    /// `‖t_l‖²`, which equals `y_lᵀ t_l`.
    proj_sq_norm: Vec<f64>,
    /// `y_lᵀ r`
    residual_corr: Vec<f64>,
    /// Target, support and skipped candidates.
    excluded: Vec<bool>,
    /// `u` vectors, flattened.
    basis: Vec<f64>,
    /// Orthonormal directions of the `u` vectors, flattened.
    directions: Vec<f64>,
    /// `q_iᵀ r` at the moment direction `i` was added, so `u_i = β_i q_i`.
    direction_weight: Vec<f64>,
    /// Directions already folded into the cached candidate statistics.
    projected: usize,
    /// Index into `direction_weight` where each iteration's directions start.
    iteration_starts: Vec<usize>,
    support: Vec<usize>,
    skipped: usize,
}

impl<'a> AolsState<'a> {
    /// `r₀ = y_j`, `A = ∅`, `t_l = y_l`.
    pub fn new(data: &'a DataMatrix, target: usize) -> Self {
        let n = data.num_points();
        let dim = data.ambient_dim();
        let y_j = data.column(target);
        let residual_corr = data
            .as_slice()
            .chunks_exact(dim)
            .map(|y_l| dot(y_l, y_j))
            .collect();
        let mut excluded = vec![false; n];
        excluded[target] = true;
        Self {
            data,
            target,
            dim,
            residual: y_j.to_vec(),
            proj_sq_norm: data.sq_norms().to_vec(),
            residual_corr,
            excluded,
            basis: Vec::new(),
            directions: Vec::new(),
            direction_weight: Vec::new(),
            projected: 0,
            iteration_starts: Vec::new(),
            support: Vec::new(),
            skipped: 0,
        }
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn iteration(&self) -> usize {
        self.iteration_starts.len()
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn residual_sq_norm(&self) -> f64 {
        sq_norm(&self.residual)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// `t_l`, the component of `y_l` orthogonal to every direction produced
    /// so far (modified Gram-Schmidt).
    pub fn projection(&self, l: usize) -> Vec<f64> {
        let mut t = self.data.column(l).to_vec();
        for q in self.directions.chunks_exact(self.dim) {
            axpy_neg(dot(&t, q), q, &mut t);
        }
        t
    }

    /// All `u` vectors produced so far, in order.
    pub fn orthogonal_set(&self) -> impl Iterator<Item = &[f64]> {
        self.basis.chunks(self.dim)
    }

    pub fn is_candidate(&self, l: usize) -> bool {
        !self.excluded[l]
    }

    /// Selection score `(y_lᵀ r / y_lᵀ t_l)² · ‖t_l‖²` of candidate `l`, or
    /// `None` if it is excluded or degenerate.
    pub fn score(&self, l: usize, degeneracy_tol: f64) -> Option<f64> {
        if self.excluded[l] {
            return None;
        }
        // y_lᵀ t_l = ‖t_l‖², so both exclusion tests and the score reduce to
        // the cached squared norm
        let tt = self.proj_sq_norm[l];
        if tt <= degeneracy_tol {
            return None;
        }
        let yr = self.residual_corr[l];
        Some(yr * yr / tt)
    }

    /// Up to `L` candidates with the largest scores, best first; ties go to
    /// the lower index. Scores within a relative [`TIE_RTOL`] count as tied,
    /// so candidates that are equivalent in exact arithmetic (e.g. every
    /// candidate once the residual lies in a one-dimensional complement) are
    /// ordered by index rather than by rounding noise.
    pub fn select_candidates(&self, config: &SolverConfig) -> Vec<usize> {
        let cap = config.block_size;
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(cap + 1);
        for l in 0..self.excluded.len() {
            let Some(s) = self.score(l, config.degeneracy_tol) else {
                continue;
            };
            if best.len() == cap && !beats(s, best[cap - 1].0) {
                continue;
            }
            // indices arrive in ascending order, so a later candidate only
            // moves ahead when it wins by more than the tie margin
            let pos = best
                .iter()
                .position(|&(b, _)| beats(s, b))
                .unwrap_or(best.len());
            best.insert(pos, (s, l));
            best.truncate(cap);
        }
        best.into_iter().map(|(_, l)| l).collect()
    }

    /// Applies the residual update once per selected index, in order:
    /// `u = (y_sᵀ r / y_sᵀ t_s) t_s`, `r ← r − u`.
    ///
    /// Returns the number of indices actually added to the support; a
    /// candidate whose (in-iteration orthogonalized) projection is degenerate
    /// is skipped and excluded from later selection.
    pub fn advance_iteration(&mut self, selected: &[usize], config: &SolverConfig) -> usize {
        let tol = config.degeneracy_tol;
        self.iteration_starts.push(self.direction_weight.len());
        let mut applied = 0;
        for &s in selected {
            assert!(
                !self.excluded[s],
                "candidate {s} is the target or already selected"
            );
            self.excluded[s] = true;
            let mut t = self.projection(s);
            let y_s = self.data.column(s);
            let den = dot(y_s, &t);
            let tt = sq_norm(&t);
            if den.abs() <= tol || tt <= tol {
                self.skipped += 1;
                continue;
            }
            let alpha = dot(y_s, &self.residual) / den;
            let scale = tt.sqrt();
            self.directions.extend(t.iter().map(|v| v / scale));
            self.direction_weight.push(alpha * scale);
            for v in t.iter_mut() {
                *v *= alpha;
            }
            axpy_neg(1.0, &t, &mut self.residual);
            self.basis.extend_from_slice(&t);
            self.support.push(s);
            applied += 1;
        }
        applied
    }

    /// `t_l ← t_l − Σ_k (t_lᵀ u_k / ‖u_k‖²) u_k` over the `u` vectors not yet
    /// applied, for every remaining candidate. With `u_k = β_k q_k` this is
    /// `‖t_l‖² −= (y_lᵀ q_k)²` and `y_lᵀ r −= β_k (y_lᵀ q_k)`; a `u` that
    /// vanished because `y_sᵀ r = 0` still removes its direction. Calling it
    /// twice in a row changes nothing.
    pub fn project_out(&mut self) {
        let dim = self.dim;
        let fresh = self.projected..self.direction_weight.len();
        if fresh.is_empty() {
            return;
        }
        let qs = &self.directions[fresh.start * dim..];
        let weights = &self.direction_weight[fresh.clone()];
        let ys = self.data.as_slice();
        for (l, y_l) in ys.chunks_exact(dim).enumerate() {
            if self.excluded[l] {
                continue;
            }
            let (mut tt, mut yr) = (self.proj_sq_norm[l], self.residual_corr[l]);
            for (q, beta) in qs.chunks_exact(dim).zip(weights) {
                let c = dot(y_l, q);
                tt -= c * c;
                yr -= beta * c;
            }
            self.proj_sq_norm[l] = tt;
            self.residual_corr[l] = yr;
        }
        self.projected = fresh.end;
    }
}

/// Runs AOLS for column `j` of `data` and fits the coefficients.
pub fn solve_column(data: &DataMatrix, j: usize, config: &SolverConfig) -> Result<ColumnSolution> {
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
    let max_iter = config.effective_iterations(n);
    let mut state = AolsState::new(data, j);
    let mut termination = Termination::MaxIterations;
    while state.residual_sq_norm() >= config.epsilon && state.iteration() < max_iter {
        let selected = state.select_candidates(config);
        if selected.is_empty() {
            termination = Termination::NoCandidates;
            break;
        }
        state.advance_iteration(&selected, config);
        state.project_out();
    }
    if state.residual_sq_norm() < config.epsilon {
        termination = Termination::ResidualBelowEpsilon;
    }
    finish(
        data,
        j,
        state.support,
        state.iteration_starts.len(),
        termination,
        state.skipped,
    )
}

pub(crate) fn finish(
    data: &DataMatrix,
    j: usize,
    support: Vec<usize>,
    iterations: usize,
    termination: Termination,
    skipped: usize,
) -> Result<ColumnSolution> {
    let y_j = data.column(j);
    let (coefficients, residual_sq_norm) = if support.is_empty() {
        (Vec::new(), sq_norm(y_j))
    } else {
        let y_a = data.select_columns(&support);
        let c = least_squares(&y_a, y_j)?;
        let fit = &y_a * &c;
        let r = DVector::from_column_slice(y_j) - fit;
        (c.iter().copied().collect(), r.norm_squared())
    };
    Ok(ColumnSolution {
        target: j,
        support,
        coefficients,
        iterations,
        residual_sq_norm,
        termination,
        skipped,
    })
}
