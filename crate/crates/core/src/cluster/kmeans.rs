use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::labels::PartitionLabels;
use crate::error::{Error, Result};
use crate::numcore::{Matrix, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

/// Result of [`kmeans`]: labels, centroids (`K x d`) and the within-cluster
/// sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub labels: PartitionLabels,
    pub centroids: Matrix,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(point, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn seed_plus_plus(x: &Matrix, k: usize, rng: &mut RngStream) -> Matrix {
    let n = x.rows();
    let mut centroids = Matrix::zeros(k, x.cols());
    centroids.row_mut(0).copy_from_slice(x.row(rng.below(n)));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in dist.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.below(n)
        };
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), centroids.row(c)));
        }
    }
    centroids
}

fn means(x: &Matrix, labels: &[usize], k: usize) -> (Matrix, Vec<usize>) {
    let mut centroids = Matrix::zeros(k, x.cols());
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (c, v) in centroids.row_mut(l).iter_mut().zip(x.row(i)) {
            *c += v;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            let inv = 1.0 / count as f64;
            centroids.row_mut(c).iter_mut().for_each(|v| *v *= inv);
        }
    }
    (centroids, counts)
}

fn inertia(x: &Matrix, labels: &[usize], centroids: &Matrix) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(x.row(i), centroids.row(l)))
        .sum()
}

/// Lloyd iterations from `centroids`, then single-point transfer refinement.
fn refine(x: &Matrix, mut centroids: Matrix, cfg: &KMeansConfig) -> (Vec<usize>, Matrix) {
    let (n, k) = (x.rows(), centroids.rows());
    let mut labels = vec![0usize; n];
    for _ in 0..cfg.max_iter.max(1) {
        let mut dist = vec![0.0; n];
        for i in 0..n {
            (labels[i], dist[i]) = nearest(x.row(i), &centroids);
        }
        let (mut next, counts) = means(x, &labels, k);
        let mut taken = vec![false; n];
        for c in (0..k).filter(|&c| counts[c] == 0) {
            // Empty cluster: move its centroid onto the worst-fit point.
            let far = (0..n)
                .filter(|&i| !taken[i])
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .expect("n >= k");
            taken[far] = true;
            next.row_mut(c).copy_from_slice(x.row(far));
            dist[far] = 0.0;
        }
        let shift = (0..k)
            .map(|c| sq_dist(centroids.row(c), next.row(c)))
            .fold(0.0f64, f64::max)
            .sqrt();
        centroids = next;
        if shift < cfg.tol {
            break;
        }
    }
    for i in 0..n {
        labels[i] = nearest(x.row(i), &centroids).0;
    }
    hartigan(x, &mut labels, k, cfg.max_iter);
    let (centroids, _) = means(x, &labels, k);
    (labels, centroids)
}

/// Moves single points between clusters while that strictly lowers the
/// within-cluster sum of squares (exact cost change with moving means).
fn hartigan(x: &Matrix, labels: &mut [usize], k: usize, max_sweeps: usize) {
    let (mut centroids, mut counts) = means(x, labels, k);
    for _ in 0..max_sweeps.max(1) {
        let mut moved = false;
        for i in 0..x.rows() {
            let from = labels[i];
            if counts[from] <= 1 {
                continue;
            }
            let p = x.row(i);
            let nf = counts[from] as f64;
            let leave = nf / (nf - 1.0) * sq_dist(p, centroids.row(from));
            let mut best = (from, 0.0);
            for to in (0..k).filter(|&c| c != from) {
                let nt = counts[to] as f64;
                let gain = nt / (nt + 1.0) * sq_dist(p, centroids.row(to)) - leave;
                if gain < best.1 - 1e-12 * leave.max(1e-300) {
                    best = (to, gain);
                }
            }
            let to = best.0;
            if to == from {
                continue;
            }
            let nt = counts[to] as f64;
            for (c, v) in centroids.row_mut(from).iter_mut().zip(p) {
                *c = (*c * nf - v) / (nf - 1.0);
            }
            for (c, v) in centroids.row_mut(to).iter_mut().zip(p) {
                *c = (*c * nt + v) / (nt + 1.0);
            }
            counts[from] -= 1;
            counts[to] += 1;
            labels[i] = to;
            moved = true;
        }
        if !moved {
            break;
        }
    }
}

/// k-means on the rows of `x` (`n x d`): k-means++ seeding, Lloyd
/// iterations and single-point transfer refinement; best of `restarts` by
/// inertia, ties to the lower restart. Restart `r` draws from stream `r`
/// keyed by one word of `rng`, so the result does not depend on thread count.
pub fn kmeans(x: &Matrix, k: usize, cfg: &KMeansConfig, rng: &mut RngStream) -> Result<KMeansFit> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("k-means needs 1 <= K <= n, got K={k}, n={n}")));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("k-means input contains non-finite values".into()));
    }
    let nonce = rng.next_u64();
    let runs: Vec<(Vec<usize>, Matrix, f64)> = (0..cfg.restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| {
            let mut sub = RngStream::new(nonce, r);
            let init = seed_plus_plus(x, k, &mut sub);
            let (labels, centroids) = refine(x, init, cfg);
            let score = inertia(x, &labels, &centroids);
            (labels, centroids, score)
        })
        .collect();
    let (labels, centroids, score) = runs
        .into_iter()
        .reduce(|best, run| if run.2 < best.2 { run } else { best })
        .expect("at least one restart");
    Ok(KMeansFit {
        labels: PartitionLabels::new(labels, k)?,
        centroids,
        inertia: score,
    })
}
