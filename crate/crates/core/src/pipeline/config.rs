use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::KMeansConfig;
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::numcore::AdamConfig;

/// Every knob of a training run. Missing JSON fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub d: usize,
    pub hidden: usize,
    pub lr_pretrain: f64,
    pub lr_finetune: f64,
    pub epochs_pretrain: usize,
    pub epochs_finetune: usize,
    pub weights: LossWeights,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Fine-tune epochs between evaluations (epoch 1 and the last epoch are
    /// always evaluated when labels are known).
    pub eval_every: usize,
    pub affinity_block: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    /// Stop a stage once the loss moved less than `early_stop_tol`
    /// (relative) over `early_stop_window` epochs.
    pub early_stop_window: usize,
    pub early_stop_tol: f64,
    pub pretrain_only: bool,
    pub export_affinity: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d: 20,
            hidden: 200,
            lr_pretrain: 1e-3,
            lr_finetune: 1e-4,
            epochs_pretrain: 1000,
            epochs_finetune: 300,
            weights: LossWeights::default(),
            adam: AdamConfig::default(),
            seed: 0,
            eval_every: 25,
            affinity_block: 256,
            kmeans_restarts: 10,
            kmeans_max_iter: 300,
            kmeans_tol: 1e-6,
            early_stop_window: 20,
            early_stop_tol: 1e-7,
            pretrain_only: false,
            export_affinity: false,
        }
    }
}

impl TrainConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kmeans(&self) -> KMeansConfig {
        KMeansConfig {
            restarts: self.kmeans_restarts,
            max_iter: self.kmeans_max_iter,
            tol: self.kmeans_tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("d", self.d),
            ("hidden", self.hidden),
            ("epochs_pretrain", self.epochs_pretrain),
            ("epochs_finetune", self.epochs_finetune),
            ("eval_every", self.eval_every),
            ("affinity_block", self.affinity_block),
            ("kmeans_restarts", self.kmeans_restarts),
            ("kmeans_max_iter", self.kmeans_max_iter),
            ("early_stop_window", self.early_stop_window),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidInput(format!("{name} must be >= 1")));
        }
        let rates = [
            ("lr_pretrain", self.lr_pretrain),
            ("lr_finetune", self.lr_finetune),
            ("kmeans_tol", self.kmeans_tol),
        ];
        if let Some((name, _)) = rates.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput(format!("{name} must be positive")));
        }
        if !(self.early_stop_tol >= 0.0) {
            return Err(Error::InvalidInput("early_stop_tol must be >= 0".into()));
        }
        self.weights.validate()
    }
}
