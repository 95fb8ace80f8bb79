use crate::cluster::{spectral_cluster_with, ClusterMetrics, PartitionLabels};
use crate::error::Result;
use crate::numcore::{Matrix, RngStream};

use super::config::TrainConfig;

/// Predicted partition, plus metrics when ground truth was supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub labels: PartitionLabels,
    pub metrics: Option<ClusterMetrics>,
}

/// Spectral clustering of `s` into `k` groups, scored against `truth` if given.
pub fn evaluate(
    s: &Matrix,
    k: usize,
    truth: Option<&[usize]>,
    cfg: &TrainConfig,
    rng: &mut RngStream,
) -> Result<Evaluation> {
    let labels = spectral_cluster_with(s, k, &cfg.kmeans(), rng)?;
    let metrics = truth
        .map(|t| ClusterMetrics::compute(labels.labels(), t))
        .transpose()?;
    Ok(Evaluation { labels, metrics })
}
