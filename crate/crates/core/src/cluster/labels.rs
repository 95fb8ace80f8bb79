use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Hard assignment of `n` samples to `k` clusters.
///
/// The partition masks `labels == c` are never materialized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionLabels {
    labels: Vec<usize>,
    k: usize,
}

impl PartitionLabels {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(Error::BadLabel {
                index,
                label: label as i64,
                k,
            });
        }
        Ok(Self { labels, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Row-wise argmax of an `n x K` assignment matrix, ties to the lowest index.
pub fn pseudo_labels(q: &Matrix) -> PartitionLabels {
    let labels = (0..q.rows())
        .map(|i| {
            let row = q.row(i);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    PartitionLabels {
        labels,
        k: q.cols(),
    }
}
