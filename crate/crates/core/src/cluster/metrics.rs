use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::hungarian::hungarian;
use crate::error::{Error, Result};

/// Clustering quality against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClusterMetrics {
    pub acc: f64,
    pub nmi: f64,
    pub pur: f64,
    pub fscore: f64,
}

impl ClusterMetrics {
    pub fn compute(pred: &[usize], truth: &[usize]) -> Result<Self> {
        let table = Contingency::new(pred, truth)?;
        Ok(Self {
            acc: table.acc(),
            nmi: table.nmi(),
            pur: table.purity(),
            fscore: table.fscore(),
        })
    }
}

/// Joint counts of two labelings over dense re-indexed ids.
struct Contingency {
    n: usize,
    counts: Vec<Vec<usize>>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

fn dense_ids(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    for &l in labels {
        let next = map.len();
        map.entry(l).or_insert(next);
    }
    (labels.iter().map(|l| map[l]).collect(), map.len())
}

impl Contingency {
    fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::LengthMismatch {
                left: pred.len(),
                right: truth.len(),
            });
        }
        let (p, kp) = dense_ids(pred);
        let (t, kt) = dense_ids(truth);
        let mut counts = vec![vec![0; kt]; kp];
        for (&a, &b) in p.iter().zip(&t) {
            counts[a][b] += 1;
        }
        let rows = counts.iter().map(|r| r.iter().sum()).collect();
        let cols = (0..kt).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Ok(Self {
            n: pred.len(),
            counts,
            rows,
            cols,
        })
    }

    /// Same partition up to relabeling.
    fn identical(&self) -> bool {
        self.rows.len() == self.cols.len()
            && self.counts.iter().all(|r| r.iter().filter(|&&c| c > 0).count() == 1)
    }

    fn acc(&self) -> f64 {
        if self.n == 0 {
            return 1.0;
        }
        let size = self.rows.len().max(self.cols.len());
        let cost: Vec<Vec<f64>> = (0..size)
            .map(|i| {
                (0..size)
                    .map(|j| -(self.counts.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0) as f64))
                    .collect()
            })
            .collect();
        let (_, total) = hungarian(&cost);
        -total / self.n as f64
    }

    fn nmi(&self) -> f64 {
        if self.n == 0 || self.identical() {
            return 1.0;
        }
        let n = self.n as f64;
        let entropy = |sizes: &[usize]| -> f64 {
            sizes
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / n;
                    -p * p.ln()
                })
                .sum()
        };
        let (hp, ht) = (entropy(&self.rows), entropy(&self.cols));
        if hp == 0.0 || ht == 0.0 {
            return 0.0;
        }
        let mut mi = 0.0;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c > 0 {
                    let c = c as f64;
                    mi += c / n * (n * c / (self.rows[i] as f64 * self.cols[j] as f64)).ln();
                }
            }
        }
        (mi / (hp * ht).sqrt()).clamp(0.0, 1.0)
    }

    fn purity(&self) -> f64 {
        if self.n == 0 {
            return 1.0;
        }
        let hits: usize = self.counts.iter().map(|r| r.iter().copied().max().unwrap_or(0)).sum();
        hits as f64 / self.n as f64
    }

    fn fscore(&self) -> f64 {
        let pairs = |c: usize| (c * c.saturating_sub(1) / 2) as f64;
        let tp: f64 = self.counts.iter().flatten().map(|&c| pairs(c)).sum();
        let pred_pairs: f64 = self.rows.iter().map(|&c| pairs(c)).sum();
        let true_pairs: f64 = self.cols.iter().map(|&c| pairs(c)).sum();
        if pred_pairs == 0.0 && true_pairs == 0.0 {
            // No same-cluster pair on either side: the two agree on every pair.
            return 1.0;
        }
        let precision = if pred_pairs > 0.0 { tp / pred_pairs } else { 0.0 };
        let recall = if true_pairs > 0.0 { tp / true_pairs } else { 0.0 };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }
}

/// Best one-to-one matched fraction.
pub fn metric_acc(pred: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(Contingency::new(pred, truth)?.acc())
}

/// Mutual information over the geometric mean of the two entropies.
pub fn metric_nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(Contingency::new(pred, truth)?.nmi())
}

pub fn metric_purity(pred: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(Contingency::new(pred, truth)?.purity())
}

/// Pair-counting F1 over unordered sample pairs.
pub fn metric_fscore(pred: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(Contingency::new(pred, truth)?.fscore())
}
