use super::kmeans::{kmeans, KMeansConfig};
use super::labels::PartitionLabels;
use crate::error::{Error, Result};
use crate::numcore::{sym_eig_smallest, Matrix, RngStream, SYMMETRY_TOL};

/// Added to every vertex degree so isolated vertices stay finite.
pub const DEGREE_EPS: f64 = 1e-8;

/// `I - D^{-1/2} A D^{-1/2}` with `A = (|S| + |S|ᵀ) / 2`.
pub fn normalized_laplacian(s: &Matrix) -> Result<Matrix> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::shape("affinity", "square", format!("{}x{}", n, s.cols())));
    }
    s.ensure_symmetric(SYMMETRY_TOL * s.max_abs().max(1.0))?;
    let a = Matrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)].abs() + s[(j, i)].abs()));
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / (a.row(i).iter().sum::<f64>() + DEGREE_EPS).sqrt())
        .collect();
    Ok(Matrix::from_fn(n, n, |i, j| {
        let off = a[(i, j)] * (inv_sqrt[i] * inv_sqrt[j]);
        if i == j {
            1.0 - off
        } else {
            -off
        }
    }))
}

/// Spectral clustering of a symmetric affinity with the default k-means settings.
pub fn spectral_cluster(s: &Matrix, k: usize, rng: &mut RngStream) -> Result<PartitionLabels> {
    spectral_cluster_with(s, k, &KMeansConfig::default(), rng)
}

/// Normalized-Laplacian embedding into the `k` smallest eigenvectors,
/// rows scaled to unit length (zero rows stay zero), then k-means.
pub fn spectral_cluster_with(
    s: &Matrix,
    k: usize,
    cfg: &KMeansConfig,
    rng: &mut RngStream,
) -> Result<PartitionLabels> {
    let lap = normalized_laplacian(s)?;
    let n = lap.rows();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("cluster count {k} outside [1, {n}]")));
    }
    if k == 1 {
        return PartitionLabels::new(vec![0; n], 1);
    }
    let mut embedding = sym_eig_smallest(&lap, k)?.vectors;
    for i in 0..n {
        let row = embedding.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok(kmeans(&embedding, k, cfg, rng)?.labels)
}
