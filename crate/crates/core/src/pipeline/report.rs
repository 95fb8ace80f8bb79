use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterMetrics;
use crate::error::{Error, Result};
use crate::losses::LossBreakdown;

use super::config::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub losses: LossBreakdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSnapshot {
    pub epoch: usize,
    pub metrics: ClusterMetrics,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub pretrain_secs: f64,
    pub finetune_secs: f64,
    pub evaluate_secs: f64,
}

/// Everything a run produced besides the tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: TrainConfig,
    pub seed: u64,
    pub pretrain_history: Vec<EpochRecord>,
    pub history: Vec<EpochRecord>,
    pub evaluations: Vec<EvalSnapshot>,
    pub final_metrics: Option<ClusterMetrics>,
    pub theta_s: Option<f64>,
    pub timings: Timings,
    /// Set when training stopped on a numerical failure; outputs are partial.
    pub failure: Option<String>,
}

impl RunReport {
    pub fn new(config: &TrainConfig) -> Self {
        Self {
            config: config.clone(),
            seed: config.seed,
            pretrain_history: Vec::new(),
            history: Vec::new(),
            evaluations: Vec::new(),
            final_metrics: None,
            theta_s: None,
            timings: Timings::default(),
            failure: None,
        }
    }

    /// Fine-tune loss history, one row per epoch, with metric columns when
    /// any evaluation was recorded (blank on epochs without one).
    pub fn history_csv(&self) -> String {
        let with_metrics = !self.evaluations.is_empty();
        let mut out = String::from("epoch,aes,ortho,ss,ib,dis,rel,total");
        if with_metrics {
            out.push_str(",acc,nmi,pur,fscore");
        }
        out.push('\n');
        for rec in &self.history {
            let l = &rec.losses;
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{}",
                rec.epoch, l.aes, l.ortho, l.ss, l.ib, l.dis, l.rel, l.total
            );
            if with_metrics {
                match self.evaluations.iter().find(|e| e.epoch == rec.epoch) {
                    Some(e) => {
                        let m = &e.metrics;
                        let _ = write!(out, ",{},{},{},{}", m.acc, m.nmi, m.pur, m.fscore);
                    }
                    None => out.push_str(",,,,"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_history(&self, path: &Path) -> Result<()> {
        fs::write(path, self.history_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// `{"acc": .., "nmi": .., "pur": .., "fscore": ..}` with six decimals.
pub fn metrics_json(m: &ClusterMetrics) -> String {
    format!(
        "{{\n  \"acc\": {:.6},\n  \"nmi\": {:.6},\n  \"pur\": {:.6},\n  \"fscore\": {:.6}\n}}\n",
        m.acc, m.nmi, m.pur, m.fscore
    )
}
