//! Spectral clustering of the affinity `W` (Ng–Jordan–Weiss).
//!
//! `L_sym = I − Δ^{-1/2} W Δ^{-1/2}` is diagonalized densely, the
//! eigenvectors of the `n` smallest eigenvalues are stacked, each row is
//! scaled to unit length and the rows are grouped with k-means.
//!
//! The dense eigensolve is `O(N³)`; graphs above [`MAX_SPECTRAL_POINTS`]
//! vertices are refused.

mod kmeans;

pub use kmeans::{kmeans, KMeansResult};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representation::SimilarityMatrix;

pub const MAX_SPECTRAL_POINTS: usize = 10_000;

/// Cluster assignment of every point, ids in `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterLabels(pub Vec<usize>);

impl ClusterLabels {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Compact JSON array, e.g. `[1,1,2]`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("labels serialize")
    }

    /// Single CSV column with a `label` header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("label\n");
        for l in &self.0 {
            s.push_str(&l.to_string());
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralConfig {
    pub clusters: usize,
    pub seed: u64,
    pub restarts: usize,
}

impl SpectralConfig {
    pub fn new(clusters: usize) -> Self {
        Self {
            clusters,
            seed: 0,
            restarts: 20,
        }
    }
}

/// `I − Δ^{-1/2} W Δ^{-1/2}`; zero-degree vertices get a zero scaling, so
/// their row is the identity row.
pub fn normalized_laplacian(w: &SimilarityMatrix) -> Result<DMatrix<f64>> {
    let n = w.num_points();
    if n > MAX_SPECTRAL_POINTS {
        return Err(Error::validation(format!(
            "dense spectral clustering is limited to {MAX_SPECTRAL_POINTS} points, got {n}"
        )));
    }
    let scale: Vec<f64> = w
        .degrees()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut lap = DMatrix::identity(n, n);
    for (i, j, v) in w.triplets() {
        // scale product first so (i, j) and (j, i) round identically
        lap[(i, j)] -= v * (scale[i] * scale[j]);
    }
    Ok(lap)
}

/// Eigenvalues of a symmetric matrix in ascending order with matching
/// eigenvector columns.
pub fn sorted_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let max_sweeps = 100 * m.nrows() + 100;
    let eig = nalgebra::SymmetricEigen::try_new(m.clone(), f64::EPSILON, max_sweeps)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = eig.eigenvectors.select_columns(&order);
    Ok((values, vectors))
}

/// `N × n` matrix of the eigenvectors for the `n` smallest eigenvalues, each
/// row scaled to unit length (zero rows stay zero).
pub fn spectral_embedding(laplacian: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    let size = laplacian.nrows();
    if n == 0 || n > size {
        return Err(Error::validation(format!(
            "cluster count {n} must be in 1..={size}"
        )));
    }
    let (_, vectors) = sorted_eigen(laplacian)?;
    let mut emb = vectors.columns(0, n).into_owned();
    for mut row in emb.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    if emb.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("embedding has non-finite entries".into()));
    }
    Ok(emb)
}

/// Full pipeline with default seed handling: `n` clusters, 20 k-means
/// restarts.
pub fn cluster(w: &SimilarityMatrix, n: usize, seed: u64) -> Result<ClusterLabels> {
    cluster_with(
        w,
        &SpectralConfig {
            seed,
            ..SpectralConfig::new(n)
        },
    )
}

pub fn cluster_with(w: &SimilarityMatrix, config: &SpectralConfig) -> Result<ClusterLabels> {
    let lap = normalized_laplacian(w)?;
    let emb = spectral_embedding(&lap, config.clusters)?;
    Ok(kmeans(&emb, config.clusters, config.seed, config.restarts)?.labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cliques(sizes: &[usize]) -> SimilarityMatrix {
        let n: usize = sizes.iter().sum();
        let mut w = DMatrix::zeros(n, n);
        let mut off = 0;
        for &s in sizes {
            for i in off..off + s {
                for j in off..off + s {
                    if i != j {
                        w[(i, j)] = 1.0;
                    }
                }
            }
            off += s;
        }
        SimilarityMatrix::from_dense(&w).unwrap()
    }

    #[test]
    fn two_cliques_have_two_zero_eigenvalues() {
        let lap = normalized_laplacian(&cliques(&[3, 3])).unwrap();
        let (vals, _) = sorted_eigen(&lap).unwrap();
        assert_eq!(vals.iter().filter(|v| v.abs() < 1e-8).count(), 2);
    }

    #[test]
    fn empty_graph_gives_identity() {
        let w = SimilarityMatrix::from_dense(&DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(normalized_laplacian(&w).unwrap(), DMatrix::identity(4, 4));
    }

    #[test]
    fn laplacian_is_exactly_symmetric() {
        let mut w = DMatrix::zeros(5, 5);
        let vals = [0.3, 1.7, 0.01, 2.2, 0.9, 0.45, 1.1];
        let mut k = 0;
        for i in 0..5 {
            for j in i + 1..5 {
                if (i + j) % 3 != 0 {
                    w[(i, j)] = vals[k % vals.len()];
                    w[(j, i)] = w[(i, j)];
                    k += 1;
                }
            }
        }
        let lap = normalized_laplacian(&SimilarityMatrix::from_dense(&w).unwrap()).unwrap();
        assert_eq!(lap, lap.transpose());
    }

    #[test]
    fn embedding_is_constant_per_component() {
        let w = cliques(&[4, 3, 5]);
        let emb = spectral_embedding(&normalized_laplacian(&w).unwrap(), 3).unwrap();
        for block in [0..4, 4..7, 7..12] {
            let first = emb.row(block.start).into_owned();
            for r in block {
                assert!((emb.row(r) - &first).amax() < 1e-8);
            }
        }
        let labels = cluster(&w, 3, 0).unwrap();
        assert_eq!(labels.0, vec![1, 1, 1, 1, 2, 2, 2, 3, 3, 3, 3, 3]);
    }

    #[test]
    fn full_embedding_is_orthonormal() {
        let w = cliques(&[3, 4]);
        let emb = spectral_embedding(&normalized_laplacian(&w).unwrap(), 7).unwrap();
        let gram = emb.transpose() * &emb;
        assert!((gram - DMatrix::identity(7, 7)).amax() < 1e-10);
    }

    #[test]
    fn perturbed_blocks_match_dense_oracle() {
        // two blocks joined by weak edges
        let mut w = cliques(&[5, 5]).to_dense().unwrap();
        w[(0, 7)] = 0.05;
        w[(7, 0)] = 0.05;
        w[(3, 9)] = 0.02;
        w[(9, 3)] = 0.02;
        let sw = SimilarityMatrix::from_dense(&w).unwrap();
        let emb = spectral_embedding(&normalized_laplacian(&sw).unwrap(), 2).unwrap();

        // oracle: dense L_sym built directly and solved by an unsorted eigensolve
        let d: Vec<f64> = (0..10).map(|i| w.row(i).sum()).collect();
        let lap = DMatrix::from_fn(10, 10, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - w[(i, j)] / (d[i] * d[j]).sqrt()
        });
        let eig = nalgebra::SymmetricEigen::new(lap);
        let mut idx: Vec<usize> = (0..10).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let sub = eig.eigenvectors.select_columns(&idx[..2]);
        // same span: projector difference
        let p1 = &sub * sub.transpose();
        let (_, vecs) = sorted_eigen(&normalized_laplacian(&sw).unwrap()).unwrap();
        let v2 = vecs.columns(0, 2).into_owned();
        let p2 = &v2 * v2.transpose();
        assert!((p1 - p2).amax() < 1e-8);

        // rows from different blocks are far apart, same block close
        let dist = |a: usize, b: usize| (emb.row(a) - emb.row(b)).norm();
        assert!(dist(1, 2) < 0.1 && dist(6, 8) < 0.1);
        assert!(dist(1, 6) > 1.0);
        let labels = cluster(&sw, 2, 3).unwrap();
        assert_eq!(labels.0, vec![1, 1, 1, 1, 1, 2, 2, 2, 2, 2]);
    }

    #[test]
    fn rejects_bad_cluster_count() {
        let lap = normalized_laplacian(&cliques(&[2, 2])).unwrap();
        assert!(spectral_embedding(&lap, 0).is_err());
        assert!(spectral_embedding(&lap, 5).is_err());
    }

    #[test]
    fn label_serialization() {
        let l = ClusterLabels(vec![1, 2, 2]);
        assert_eq!(l.to_json(), "[1,2,2]");
        assert_eq!(l.to_csv(), "label\n1\n2\n2\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn laplacian_spectrum_in_zero_two(
            raw in proptest::collection::vec(0.0f64..2.0, 36),
            mask in proptest::collection::vec(any::<bool>(), 36),
        ) {
            let w = DMatrix::from_fn(6, 6, |i, j| {
                let (a, b) = (i.min(j), i.max(j));
                if a == b || !mask[a * 6 + b] { 0.0 } else { raw[a * 6 + b] }
            });
            let lap = normalized_laplacian(&SimilarityMatrix::from_dense(&w).unwrap()).unwrap();
            let (vals, _) = sorted_eigen(&lap).unwrap();
            for v in vals {
                prop_assert!((-1e-10..=2.0 + 1e-10).contains(&v));
            }
        }
    }
}
