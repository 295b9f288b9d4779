//! Sparse subspace clustering with accelerated orthogonal least-squares.
//!
//! The pipeline has three stages:
//!
//! 1. every point `y_j` is written as a sparse combination of the other
//!    points ([`aols::solve_column`], or the [`omp`] baseline),
//! 2. the coefficients are assembled into `C` and symmetrized into the
//!    affinity `W = |C| + |C|ᵀ` ([`representation`]),
//! 3. spectral clustering on the normalized Laplacian of `W` yields the
//!    final labels ([`spectral`]).
//!
//! [`dataset`] generates union-of-subspaces benchmarks and [`evaluation`]
//! scores the results against ground truth.
//!
//! ```
//! use assc_core::{dataset, aols::SolverConfig, representation, spectral, evaluation};
//!
//! let spec = dataset::SubspaceSpec::new(3, 2, 9, 10, 7);
//! let (data, model) = dataset::generate(&spec).unwrap();
//! let kind = representation::SolverKind::Aols(SolverConfig::default());
//! let c = representation::build_representation(&data, &kind).unwrap();
//! let w = representation::build_similarity(&c);
//! let labels = spectral::cluster(&w, 3, 0).unwrap();
//! let acc = evaluation::clustering_accuracy(&labels, &model.labels).unwrap();
//! assert!(acc > 0.99);
//! ```

pub mod aols;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod omp;
pub mod representation;
pub mod spectral;

pub use aols::{AolsState, ColumnSolution, SolverConfig, Termination};
pub use dataset::{DataMatrix, SubspaceModel, SubspaceSpec};
pub use error::{Error, Result};
pub use evaluation::MetricsReport;
pub use omp::OmpConfig;
pub use representation::{RepresentationMatrix, SimilarityMatrix, SolverKind};
pub use spectral::{ClusterLabels, SpectralConfig};
