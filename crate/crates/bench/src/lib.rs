//! Shared fixtures for the pipeline benchmarks.

use assc_core::{dataset, DataMatrix, Result, SubspaceModel, SubspaceSpec};

/// Five 6-dimensional subspaces in `R^9`, `per` points each.
pub fn random_scenario(per: usize, seed: u64) -> Result<(DataMatrix, SubspaceModel)> {
    dataset::generate(&SubspaceSpec::new(5, 6, 9, per, seed))
}

/// Same as [`random_scenario`] with every entry shifted by `U(0, 1)`.
pub fn perturbed_scenario(per: usize, seed: u64) -> Result<(DataMatrix, SubspaceModel)> {
    dataset::generate(&SubspaceSpec::new(5, 6, 9, per, seed).with_perturbation(1.0))
}
