//! Training orchestration: configuration, pretraining of the autoencoders,
//! fine-tuning on the full objective, spectral evaluation, and run artifacts.

mod config;
mod evaluate;
mod experiment;
mod gradcheck;
mod report;
mod train;

pub use config::TrainConfig;
pub use evaluate::{evaluate, Evaluation};
pub use experiment::{
    run_experiment, run_on_dataset, AFFINITY_FILE, CHECKPOINT_FILE, EMBEDDINGS_FILE, HISTORY_FILE,
    LABELS_PRED_FILE, METRICS_FILE, REPORT_FILE,
};
pub use gradcheck::model_grad_check;
pub use report::{metrics_json, EpochRecord, EvalSnapshot, RunReport, Timings};
pub use train::{finetune, model_shape, pretrain, run_finetune, run_pretrain, Finetuned, Trainer};

#[cfg(test)]
mod tests;
