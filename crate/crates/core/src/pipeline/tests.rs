use super::*;
use crate::dataio::{synth_generate, SynthSpec};
use crate::model::{decode_checkpoint, encode_checkpoint};
use crate::numcore::Matrix;

fn tiny_cfg() -> TrainConfig {
    TrainConfig {
        d: 4,
        hidden: 8,
        epochs_pretrain: 5,
        epochs_finetune: 4,
        eval_every: 2,
        seed: 3,
        ..TrainConfig::default()
    }
}

fn tiny_data() -> crate::dataio::MultiViewDataset {
    synth_generate(&SynthSpec::new(24, 2, 3, 11)).unwrap()
}

#[test]
fn config_defaults_and_json() {
    let cfg = TrainConfig::default();
    assert_eq!((cfg.d, cfg.hidden, cfg.epochs_pretrain, cfg.epochs_finetune), (20, 200, 1000, 300));
    assert_eq!((cfg.lr_pretrain, cfg.lr_finetune), (1e-3, 1e-4));
    let parsed: TrainConfig = serde_json::from_str(r#"{"d": 8, "weights": {"lambda2": 0.5}}"#).unwrap();
    assert_eq!(parsed.d, 8);
    assert_eq!(parsed.weights.lambda2, 0.5);
    assert_eq!(parsed.weights.lambda1, 1.0);
    assert!(serde_json::from_str::<TrainConfig>(r#"{"dd": 8}"#).is_err());
    assert!(TrainConfig { lr_finetune: 0.0, ..cfg.clone() }.validate().is_err());
    assert!(TrainConfig { epochs_pretrain: 0, ..cfg }.validate().is_err());
}

#[test]
fn pretrain_is_deterministic_and_touches_only_autoencoder() {
    let ds = tiny_data();
    let cfg = tiny_cfg();
    let (a, hist) = pretrain(&ds, &cfg).unwrap();
    let (b, _) = pretrain(&ds, &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(hist.len(), 5);
    assert!(hist.iter().all(|r| r.losses.ss == 0.0 && r.losses.total == r.losses.aes + r.losses.ortho));

    let fresh = Trainer::new(&ds, &cfg).unwrap().state;
    for (p, q) in a.params.iter().zip(&fresh.params) {
        let autoencoder = p.name.starts_with("enc") || p.name.starts_with("dec") || p.name == "consistent";
        assert_eq!(autoencoder, p.value != q.value, "{}", p.name);
    }
}

#[test]
fn first_pretrain_step_decreases_loss() {
    let ds = tiny_data();
    let cfg = TrainConfig { epochs_pretrain: 2, ..tiny_cfg() };
    let mut trainer = Trainer::new(&ds, &cfg).unwrap();
    let before = trainer.pretrain_epoch(&ds, &cfg, 1).unwrap().total;
    let after = trainer.pretrain_epoch(&ds, &cfg, 2).unwrap().total;
    assert!(after < before, "{after} >= {before}");
}

#[test]
fn zero_lambdas_reduce_to_autoencoder_loss() {
    let ds = tiny_data();
    let cfg = TrainConfig {
        weights: crate::losses::LossWeights::default().zero_lambdas(),
        ..tiny_cfg()
    };
    let mut trainer = Trainer::new(&ds, &cfg).unwrap();
    let l = trainer.finetune_epoch(&ds, &cfg, 1).unwrap();
    assert_eq!(l.total, l.aes + l.ortho);
}

#[test]
fn finetune_emits_symmetric_zero_diagonal_affinity() {
    let ds = tiny_data();
    let cfg = tiny_cfg();
    let (state, _) = pretrain(&ds, &cfg).unwrap();
    let out = finetune(&ds, state, &cfg).unwrap();
    let s = &out.affinity;
    assert_eq!(s.shape(), (24, 24));
    for i in 0..24 {
        assert_eq!(s[(i, i)], 0.0);
        for j in 0..24 {
            assert_eq!(s[(i, j)], s[(j, i)]);
        }
    }
    assert_eq!(out.history.len(), 4);
    assert_eq!(out.evaluations.iter().map(|e| e.epoch).collect::<Vec<_>>(), vec![1, 2, 4]);
}

#[test]
fn checkpoint_round_trip_continues_identically() {
    let ds = tiny_data();
    let cfg = tiny_cfg();
    let mut trainer = Trainer::new(&ds, &cfg).unwrap();
    trainer.finetune_epoch(&ds, &cfg, 1).unwrap();
    let bytes = encode_checkpoint(&trainer.state, trainer.noise.cursor()).unwrap();
    let (state, cursor) = decode_checkpoint(&bytes).unwrap();
    let mut restored = Trainer::from_parts(state, cursor);

    let a = trainer.finetune_epoch(&ds, &cfg, 2).unwrap();
    let b = restored.finetune_epoch(&ds, &cfg, 2).unwrap();
    assert_eq!(a, b);
    assert_eq!(trainer.state.params, restored.state.params);
}

#[test]
fn evaluate_ideal_affinity_and_determinism() {
    let truth: Vec<usize> = (0..12).map(|i| i / 4).collect();
    let s = Matrix::from_fn(12, 12, |i, j| f64::from(u8::from(i != j && truth[i] == truth[j])));
    let cfg = TrainConfig::default();
    let rng = crate::numcore::RngStream::new(1, 3);
    let a = evaluate(&s, 3, Some(&truth), &cfg, &mut rng.clone()).unwrap();
    let m = a.metrics.unwrap();
    assert_eq!((m.acc, m.nmi, m.pur, m.fscore), (1.0, 1.0, 1.0, 1.0));
    let b = evaluate(&s, 3, Some(&truth), &cfg, &mut rng.clone()).unwrap();
    assert_eq!(a, b);
    assert!(evaluate(&s, 3, None, &cfg, &mut rng.clone()).unwrap().metrics.is_none());
}

#[test]
fn run_writes_artifacts_deterministically() {
    let ds = tiny_data();
    let data_dir = tempfile::tempdir().unwrap();
    crate::dataio::save_dataset(&ds, data_dir.path(), crate::dataio::MatrixFormat::Csv).unwrap();
    let cfg = TrainConfig {
        export_affinity: true,
        ..tiny_cfg()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let report = run_experiment(data_dir.path(), &cfg, a.path()).unwrap();
    run_experiment(data_dir.path(), &cfg, b.path()).unwrap();
    for f in [METRICS_FILE, LABELS_PRED_FILE, HISTORY_FILE, EMBEDDINGS_FILE, CHECKPOINT_FILE, AFFINITY_FILE] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let metrics = std::fs::read_to_string(a.path().join(METRICS_FILE)).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&metrics).unwrap();
    for key in ["acc", "nmi", "pur", "fscore"] {
        let text = metrics.lines().find(|l| l.contains(key)).unwrap();
        assert_eq!(text.trim_end_matches(',').rsplit('.').next().unwrap().len(), 6);
        assert!(parsed[key].is_number());
    }
    let history = std::fs::read_to_string(a.path().join(HISTORY_FILE)).unwrap();
    assert!(history.starts_with("epoch,aes,ortho,ss,ib,dis,rel,total,acc,nmi,pur,fscore\n"));
    assert_eq!(history.lines().count(), 1 + report.history.len());
    assert_eq!(std::fs::read_to_string(a.path().join(LABELS_PRED_FILE)).unwrap().lines().count(), 24);
}

#[test]
fn run_without_truth_writes_labels_only() {
    let mut ds = tiny_data();
    ds.labels = None;
    let out = tempfile::tempdir().unwrap();
    let report = run_on_dataset(&ds, &tiny_cfg(), out.path()).unwrap();
    assert!(report.final_metrics.is_none());
    assert!(out.path().join(LABELS_PRED_FILE).is_file());
    assert!(!out.path().join(METRICS_FILE).exists());
}

#[test]
fn non_finite_input_aborts_with_checkpoint() {
    let mut ds = tiny_data();
    ds.views[0][(0, 0)] = f64::NAN;
    let out = tempfile::tempdir().unwrap();
    let err = run_on_dataset(&ds, &tiny_cfg(), out.path()).unwrap_err();
    assert!(matches!(err, crate::Error::NonFiniteLoss { stage: "pretrain", epoch: 1 }), "{err}");
    assert!(out.path().join(CHECKPOINT_FILE).is_file());
}

#[test]
fn full_model_gradients_match_finite_differences() {
    for seed in 0..10 {
        let report = model_grad_check(seed, 1e-4).unwrap();
        assert!(report.pass, "seed {seed}: {:?}", report.worst());
    }
}
