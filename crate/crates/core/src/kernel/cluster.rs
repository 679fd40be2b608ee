//! Deterministic K-Means (Lloyd) and brute-force k-nearest-neighbor graphs.
//!
//! Both use squared Euclidean distance and break ties toward the lower
//! index, so identical inputs always give identical outputs.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClusterError {
    #[error("k = {k} is too large for {n} points")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("iteration count must be at least 1")]
    NoIterations,
    #[error("points have inconsistent dimensions")]
    RaggedPoints,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dims(points: &[Vec<f64>]) -> Result<(), ClusterError> {
    match points.first() {
        Some(p) if points.iter().any(|q| q.len() != p.len()) => Err(ClusterError::RaggedPoints),
        _ => Ok(()),
    }
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Within-cluster sum of squared distances.
pub fn sse(points: &[Vec<f64>], labels: &[u32], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l as usize]))
        .sum()
}

/// Mean of each cluster's members. Empty clusters keep their previous
/// centroid.
fn update_centroids(points: &[Vec<f64>], labels: &[u32], centroids: &mut [Vec<f64>]) {
    let dim = centroids.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &l) in points.iter().zip(labels) {
        let l = l as usize;
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    for ((c, s), n) in centroids.iter_mut().zip(sums).zip(counts) {
        if n > 0 {
            *c = s.into_iter().map(|v| v / n as f64).collect();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansRun {
    pub labels: Vec<u32>,
    pub centroids: Vec<Vec<f64>>,
    /// SSE after each assignment step.
    pub sse_trace: Vec<f64>,
}

/// Farthest-first seeding: start at point 0, then repeatedly take the point
/// whose nearest chosen seed is farthest away (lowest index on ties).
fn farthest_first(points: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let mut chosen = vec![0usize];
    let mut gap: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[0])).collect();
    while chosen.len() < k {
        let mut best = None;
        for (i, &d) in gap.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let (next, _) = best.expect("k <= n leaves a candidate");
        chosen.push(next);
        for (g, p) in gap.iter_mut().zip(points) {
            *g = g.min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// Renumbers clusters in order of first appearance; unused centroids go last.
fn canonicalize(labels: &mut [u32], centroids: &mut Vec<Vec<f64>>) {
    let mut order: Vec<usize> = Vec::with_capacity(centroids.len());
    for &l in labels.iter() {
        if !order.contains(&(l as usize)) {
            order.push(l as usize);
        }
    }
    let unused: Vec<usize> = (0..centroids.len()).filter(|c| !order.contains(c)).collect();
    order.extend(unused);
    let mut map = vec![0u32; centroids.len()];
    for (new, &old) in order.iter().enumerate() {
        map[old] = new as u32;
    }
    for l in labels.iter_mut() {
        *l = map[*l as usize];
    }
    *centroids = order.iter().map(|&c| centroids[c].clone()).collect();
}

/// Lloyd's algorithm with farthest-first seeding.
///
/// Runs at most `iters` assignment steps and stops early once assignments
/// no longer change. Cluster labels are numbered by first appearance.
pub fn kmeans_run(points: &[Vec<f64>], k: usize, iters: usize) -> Result<KMeansRun, ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if iters == 0 {
        return Err(ClusterError::NoIterations);
    }
    if k > points.len() {
        return Err(ClusterError::KTooLarge { k, n: points.len() });
    }
    check_dims(points)?;

    let mut centroids = farthest_first(points, k);
    let mut labels: Vec<u32> = Vec::new();
    let mut sse_trace = Vec::new();
    for _ in 0..iters {
        let next: Vec<u32> = points.iter().map(|p| nearest(p, &centroids) as u32).collect();
        sse_trace.push(sse(points, &next, &centroids));
        let converged = next == labels;
        labels = next;
        if converged {
            break;
        }
        update_centroids(points, &labels, &mut centroids);
    }
    canonicalize(&mut labels, &mut centroids);
    Ok(KMeansRun {
        labels,
        centroids,
        sse_trace,
    })
}

pub fn kmeans(points: &[Vec<f64>], k: usize, iters: usize) -> Result<Vec<u32>, ClusterError> {
    kmeans_run(points, k, iters).map(|r| r.labels)
}

/// Directed k-nearest-neighbor edges, grouped by source node and ordered by
/// distance within each group. Requires `k < points.len()`.
pub fn knn_graph(points: &[Vec<f64>], k: usize) -> Result<Vec<(usize, usize)>, ClusterError> {
    if k >= points.len() && !(k == 0 && points.is_empty()) {
        return Err(ClusterError::KTooLarge { k, n: points.len() });
    }
    check_dims(points)?;
    let mut edges = Vec::with_capacity(points.len() * k);
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        candidates.clear();
        candidates.extend(
            points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(j, q)| (sq_dist(p, q), j)),
        );
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        edges.extend(candidates.iter().take(k).map(|&(_, j)| (i, j)));
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[&[f64]]) -> Vec<Vec<f64>> {
        v.iter().map(|p| p.to_vec()).collect()
    }

    #[test]
    fn kmeans_corner_points() {
        let p = pts(&[&[0.0, 0.0], &[0.0, 1.0], &[10.0, 0.0], &[10.0, 1.0]]);
        assert_eq!(kmeans(&p, 2, 100).unwrap(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn kmeans_degenerate_k() {
        let p = pts(&[&[0.0], &[5.0], &[9.0]]);
        assert_eq!(kmeans(&p, 3, 10).unwrap(), vec![0, 1, 2]);
        assert_eq!(kmeans(&p, 1, 10).unwrap(), vec![0, 0, 0]);
        assert_eq!(kmeans(&p, 4, 10), Err(ClusterError::KTooLarge { k: 4, n: 3 }));
        assert_eq!(kmeans(&p, 0, 10), Err(ClusterError::ZeroK));
        assert_eq!(kmeans(&p, 1, 0), Err(ClusterError::NoIterations));
        assert_eq!(
            kmeans(&pts(&[&[0.0], &[1.0, 2.0]]), 1, 1),
            Err(ClusterError::RaggedPoints)
        );
    }

    #[test]
    fn kmeans_sse_never_increases() {
        let p: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![((i * 37) % 11) as f64, ((i * 13) % 7) as f64 * 0.5])
            .collect();
        for k in 1..6 {
            let run = kmeans_run(&p, k, 50).unwrap();
            assert!(run.sse_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));
            assert_eq!(run.labels[0], 0);
        }
    }

    #[test]
    fn kmeans_duplicate_points() {
        let p = pts(&[&[1.0], &[1.0], &[1.0]]);
        assert_eq!(kmeans(&p, 2, 10).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn knn_collinear() {
        let p = pts(&[&[0.0], &[1.0], &[3.0]]);
        assert_eq!(knn_graph(&p, 1).unwrap(), vec![(0, 1), (1, 0), (2, 1)]);
        let full = knn_graph(&p, 2).unwrap();
        assert_eq!(full.len(), 6);
        assert!(full.iter().all(|(a, b)| a != b));
        assert!(knn_graph(&p, 3).is_err());
    }

    #[test]
    fn knn_ties_prefer_lower_index() {
        let p = pts(&[&[0.0], &[-1.0], &[1.0]]);
        assert_eq!(knn_graph(&p, 1).unwrap()[0], (0, 1));
    }
}
