//! Descriptor correspondence between consecutive frames: exhaustive KNN
//! with the ratio test, then RANSAC affine verification.

mod ransac;

pub use ransac::{ransac_affine, AffineModel, RansacParams};

use crate::sift::Descriptor;

/// A query-to-train correspondence with its Euclidean descriptor distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    /// Index into the previous frame's feature list.
    pub query_index: usize,
    /// Index into the current frame's feature list.
    pub train_index: usize,
    pub distance: f32,
}

/// Exhaustive k-nearest-neighbor matching.
///
/// For every query descriptor, returns the `k` train descriptors with the
/// smallest Euclidean distance, ascending, ties broken by train index.
/// `k` is clamped to the train set size; empty sets give empty results.
pub fn knn_match(queries: &[Descriptor], trains: &[Descriptor], k: usize) -> Vec<Vec<Match>> {
    if queries.is_empty() || trains.is_empty() || k == 0 {
        return vec![Vec::new(); queries.len()];
    }
    // Unit descriptors make |a-b|^2 = |a|^2 + |b|^2 - 2ab cheap; the norms
    // are carried explicitly so the identity also holds for synthetic
    // non-normalized inputs.
    let q_norms: Vec<f32> = queries.iter().map(|d| sq_norm(&d.values)).collect();
    let t_norms: Vec<f32> = trains.iter().map(|d| sq_norm(&d.values)).collect();

    let k = k.min(trains.len());
    let mut results: Vec<Vec<Match>> = Vec::with_capacity(queries.len());
    for (qi, (q, &qn)) in queries.iter().zip(q_norms.iter()).enumerate() {
        // (distance^2, train index), ascending, at most k entries.
        let mut best: Vec<(f32, usize)> = Vec::with_capacity(k + 1);
        for (j, (t, &tn)) in trains.iter().zip(t_norms.iter()).enumerate() {
            let d2 = (qn + tn - 2.0 * dot(&q.values, &t.values)).max(0.0);
            if best.len() == k && (d2, j) >= (best[k - 1].0, best[k - 1].1) {
                continue;
            }
            let pos = best.partition_point(|&(bd, bj)| (bd, bj) < (d2, j));
            best.insert(pos, (d2, j));
            best.truncate(k);
        }
        results.push(
            best.into_iter()
                .map(|(d2, j)| Match { query_index: qi, train_index: j, distance: d2.sqrt() })
                .collect(),
        );
    }
    results
}

#[inline]
fn sq_norm(v: &[f32]) -> f32 {
    dot(v, v)
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    // Eight independent accumulators break the add dependency chain so the
    // loop vectorizes, without changing the result across runs.
    let mut acc = [0.0f32; 8];
    let (a8, ar) = a.split_at(a.len() & !7);
    let (b8, br) = b.split_at(b.len() & !7);
    for (ca, cb) in a8.chunks_exact(8).zip(b8.chunks_exact(8)) {
        for i in 0..8 {
            acc[i] += ca[i] * cb[i];
        }
    }
    let mut sum = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in ar.iter().zip(br.iter()) {
        sum += x * y;
    }
    sum
}

/// Lowe ratio filter: keeps a query's best match iff its distance is
/// strictly below `ratio` times the second-best distance. Queries with
/// fewer than two candidates are dropped.
pub fn ratio_filter(knn: &[Vec<Match>], ratio: f32) -> Vec<Match> {
    knn.iter()
        .filter_map(|row| {
            if row.len() < 2 {
                return None;
            }
            (row[0].distance < ratio * row[1].distance).then_some(row[0])
        })
        .collect()
}
