use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::dataio::{load_dataset, normalize_minmax, write_labels, write_matrix, MatrixFormat, MultiViewDataset};
use crate::error::{Error, Result};
use crate::model::{materialize_affinity, save_checkpoint};
use crate::numcore::RngStream;

use super::config::TrainConfig;
use super::evaluate::evaluate;
use super::report::{metrics_json, RunReport};
use super::train::{run_finetune, run_pretrain, Trainer, CLUSTER_STREAM};

pub const METRICS_FILE: &str = "metrics.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const LABELS_PRED_FILE: &str = "labels_pred.csv";
pub const EMBEDDINGS_FILE: &str = "embeddings_u.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const AFFINITY_FILE: &str = "affinity.f64bin";
pub const REPORT_FILE: &str = "report.json";

/// Load, normalize, train and evaluate a dataset directory, writing every
/// artifact to `out_dir`.
pub fn run_experiment(data_dir: impl AsRef<Path>, cfg: &TrainConfig, out_dir: impl AsRef<Path>) -> Result<RunReport> {
    cfg.validate()?;
    let ds = normalize_minmax(&load_dataset(data_dir)?);
    run_on_dataset(&ds, cfg, out_dir)
}

/// [`run_experiment`] on an already-normalized in-memory dataset.
pub fn run_on_dataset(ds: &MultiViewDataset, cfg: &TrainConfig, out_dir: impl AsRef<Path>) -> Result<RunReport> {
    cfg.validate()?;
    let out = out_dir.as_ref();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut report = RunReport::new(cfg);
    let mut trainer = Trainer::new(ds, cfg)?;

    let started = Instant::now();
    let pretrained = run_pretrain(&mut trainer, ds, cfg, &mut report.pretrain_history);
    report.timings.pretrain_secs = started.elapsed().as_secs_f64();
    if let Err(e) = pretrained {
        return Err(abort(&trainer, &mut report, out, e));
    }

    if !cfg.pretrain_only {
        let started = Instant::now();
        let tuned = run_finetune(&mut trainer, ds, cfg, &mut report.history, &mut report.evaluations);
        report.timings.finetune_secs = started.elapsed().as_secs_f64();
        if let Err(e) = tuned {
            return Err(abort(&trainer, &mut report, out, e));
        }
    }

    let started = Instant::now();
    let u = trainer.state.unified_representation(&ds.views)?;
    let theta = trainer.state.theta_s();
    report.theta_s = Some(theta);
    let s = materialize_affinity(&u, theta, cfg.affinity_block);
    let mut rng = RngStream::new(cfg.seed, CLUSTER_STREAM);
    let eval = evaluate(&s, ds.k, ds.labels.as_deref(), cfg, &mut rng)?;
    report.timings.evaluate_secs = started.elapsed().as_secs_f64();
    report.final_metrics = eval.metrics;

    write_labels(&out.join(LABELS_PRED_FILE), eval.labels.labels())?;
    if let Some(m) = &eval.metrics {
        let path = out.join(METRICS_FILE);
        fs::write(&path, metrics_json(m)).map_err(|e| Error::io(&path, e))?;
    }
    write_matrix(&u.transpose(), &out.join(EMBEDDINGS_FILE), MatrixFormat::Csv)?;
    if cfg.export_affinity {
        write_matrix(&s, &out.join(AFFINITY_FILE), MatrixFormat::F64Bin)?;
    }
    save_checkpoint(&trainer.state, trainer.noise.cursor(), out.join(CHECKPOINT_FILE))?;
    report.write_history(&out.join(HISTORY_FILE))?;
    report.write_json(&out.join(REPORT_FILE))?;
    Ok(report)
}

/// Persists the last finite state and the partial history, then hands the
/// original error back.
fn abort(trainer: &Trainer, report: &mut RunReport, out: &Path, err: Error) -> Error {
    report.failure = Some(err.to_string());
    let _ = save_checkpoint(&trainer.state, trainer.noise.cursor(), out.join(CHECKPOINT_FILE));
    let _ = report.write_history(&out.join(HISTORY_FILE));
    let _ = report.write_json(&out.join(REPORT_FILE));
    err
}
