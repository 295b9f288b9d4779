//! Lloyd's k-means with k-means++ seeding and best-of-restarts selection.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ClusterLabels;
use crate::error::{Error, Result};

const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: ClusterLabels,
    /// Within-cluster sum of squared distances.
    pub cost: f64,
    /// Restart that produced the result.
    pub restart: usize,
}

/// Clusters the rows of `points` into `n` groups.
///
/// Restart `r` draws from its own ChaCha stream `r` under `seed`, so runs are
/// reproducible. The lowest-cost restart wins, ties to the earliest. Labels
/// are renumbered in order of first appearance.
pub fn kmeans(points: &DMatrix<f64>, n: usize, seed: u64, restarts: usize) -> Result<KMeansResult> {
    let count = points.nrows();
    if n == 0 || n > count {
        return Err(Error::validation(format!(
            "cluster count {n} must be in 1..={count}"
        )));
    }
    let dim = points.ncols();
    // row-major copy for contiguous point access
    let rows: Vec<f64> = (0..count)
        .flat_map(|i| points.row(i).iter().copied().collect::<Vec<_>>())
        .collect();
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    for r in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let (assign, cost) = lloyd(&rows, dim, n, &mut rng);
        if best.as_ref().map_or(true, |(c, _, _)| cost < *c) {
            best = Some((cost, r, assign));
        }
    }
    let (cost, restart, assign) = best.expect("at least one restart");
    Ok(KMeansResult {
        labels: canonical_labels(&assign),
        cost,
        restart,
    })
}

fn canonical_labels(assign: &[usize]) -> ClusterLabels {
    let mut map: Vec<Option<usize>> = Vec::new();
    let mut next = 1;
    let labels = assign
        .iter()
        .map(|&a| {
            if map.len() <= a {
                map.resize(a + 1, None);
            }
            *map[a].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect();
    ClusterLabels(labels)
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn seed_plus_plus(rows: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let count = rows.len() / dim;
    let point = |i: usize| &rows[i * dim..(i + 1) * dim];
    let mut centers = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..count);
    centers.extend_from_slice(point(first));
    let mut d2: Vec<f64> = (0..count).map(|i| dist2(point(i), point(first))).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = count - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // floating leftovers can land on a zero-weight tail
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..count)
        };
        centers.extend_from_slice(point(pick));
        for (i, v) in d2.iter_mut().enumerate() {
            *v = v.min(dist2(point(i), point(pick)));
        }
    }
    centers
}

fn lloyd(rows: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let count = rows.len() / dim;
    let point = |i: usize| &rows[i * dim..(i + 1) * dim];
    let mut centers = seed_plus_plus(rows, dim, k, rng);
    let mut assign = vec![usize::MAX; count];

    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut changed = false;
        for i in 0..count {
            let p = point(i);
            let mut best = (f64::INFINITY, 0);
            for c in 0..k {
                let d = dist2(p, &centers[c * dim..(c + 1) * dim]);
                if d < best.0 {
                    best = (d, c);
                }
            }
            if assign[i] != best.1 {
                assign[i] = best.1;
                changed = true;
            }
        }
        repair_empty(rows, dim, k, &mut assign, &mut centers);
        update_centers(rows, dim, k, &assign, &mut centers);
        if !changed {
            break;
        }
    }
    let cost = (0..count)
        .map(|i| dist2(point(i), &centers[assign[i] * dim..(assign[i] + 1) * dim]))
        .sum();
    (assign, cost)
}

fn update_centers(rows: &[f64], dim: usize, k: usize, assign: &[usize], centers: &mut [f64]) {
    let mut sums = vec![0.0; k * dim];
    let mut sizes = vec![0usize; k];
    for (i, &a) in assign.iter().enumerate() {
        sizes[a] += 1;
        for (s, v) in sums[a * dim..(a + 1) * dim]
            .iter_mut()
            .zip(&rows[i * dim..(i + 1) * dim])
        {
            *s += v;
        }
    }
    for c in 0..k {
        if sizes[c] > 0 {
            for (dst, s) in centers[c * dim..(c + 1) * dim]
                .iter_mut()
                .zip(&sums[c * dim..(c + 1) * dim])
            {
                *dst = s / sizes[c] as f64;
            }
        }
    }
}

/// Moves the point of the largest cluster farthest from that cluster's
/// centroid into each empty cluster.
fn repair_empty(rows: &[f64], dim: usize, k: usize, assign: &mut [usize], centers: &mut [f64]) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assign.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        update_centers(rows, dim, k, assign, centers);
        let largest = (0..k)
            .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
            .unwrap();
        if sizes[largest] < 2 {
            return;
        }
        let centroid = centers[largest * dim..(largest + 1) * dim].to_vec();
        let mut far = (f64::NEG_INFINITY, usize::MAX);
        for (i, &a) in assign.iter().enumerate() {
            if a == largest {
                let d = dist2(&rows[i * dim..(i + 1) * dim], &centroid);
                if d > far.0 {
                    far = (d, i);
                }
            }
        }
        assign[far.1] = empty;
        centers[empty * dim..(empty + 1) * dim]
            .copy_from_slice(&rows[far.1 * dim..(far.1 + 1) * dim]);
    }
}
