use crate::cluster::{pseudo_labels, ClusterMetrics};
use crate::dataio::MultiViewDataset;
use crate::error::{Error, Result};
use crate::losses::{ortho_term, recon_term, total_terms, LossBreakdown};
use crate::model::{materialize_affinity, ModelShape, ModelState};
use crate::numcore::{adam_step, Graph, Matrix, RngCursor, RngStream, Var};

use super::config::TrainConfig;
use super::evaluate::evaluate;
use super::report::{EpochRecord, EvalSnapshot};

/// Stream ids derived from the master seed.
pub(crate) const INIT_STREAM: u64 = 1;
pub(crate) const NOISE_STREAM: u64 = 2;
pub(crate) const CLUSTER_STREAM: u64 = 3;

/// Model state plus the reparameterization noise stream: everything needed
/// to continue training bit-identically.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub state: ModelState,
    pub noise: RngStream,
    pretrain_mask: Vec<bool>,
}

pub fn model_shape(ds: &MultiViewDataset, cfg: &TrainConfig) -> ModelShape {
    ModelShape {
        view_dims: ds.view_dims(),
        n: ds.n,
        k: ds.k,
        d: cfg.d,
        hidden: cfg.hidden,
    }
}

fn stage_mask(state: &ModelState) -> Vec<bool> {
    let mut mask = vec![false; state.params.len()];
    let mut mark = |ids: &[crate::model::ParamId]| ids.iter().for_each(|id| mask[id.0] = true);
    for enc in &state.encoders {
        for layer in [&enc.backbone, &enc.s_head, &enc.c_head] {
            mark(&[layer.w, layer.b]);
        }
    }
    for dec in &state.decoders {
        for layer in [&dec.hidden, &dec.output] {
            mark(&[layer.w, layer.b]);
        }
    }
    mark(&[state.consistent]);
    mask
}

/// Relative change of the last loss against the one `window` epochs earlier.
pub(crate) fn plateaued(losses: &[f64], window: usize, tol: f64) -> bool {
    if losses.len() <= window {
        return false;
    }
    let now = losses[losses.len() - 1];
    let then = losses[losses.len() - 1 - window];
    (now - then).abs() / then.abs().max(1e-12) < tol
}

impl Trainer {
    pub fn new(ds: &MultiViewDataset, cfg: &TrainConfig) -> Result<Self> {
        let state = ModelState::new(model_shape(ds, cfg), &mut RngStream::new(cfg.seed, INIT_STREAM))?;
        Ok(Self::from_parts(state, RngStream::new(cfg.seed, NOISE_STREAM).cursor()))
    }

    pub fn from_parts(state: ModelState, noise: RngCursor) -> Self {
        let pretrain_mask = stage_mask(&state);
        Self {
            state,
            noise: RngStream::from_cursor(noise),
            pretrain_mask,
        }
    }

    /// Clears Adam moments and step counts, as at the start of a stage.
    pub fn reset_optimizer(&mut self) {
        for p in &mut self.state.params {
            p.adam_m.as_mut_slice().fill(0.0);
            p.adam_v.as_mut_slice().fill(0.0);
            p.step_count = 0;
        }
    }

    fn apply(&mut self, g: &Graph, vars: &[Var], out: Var, lr: f64, cfg: &TrainConfig, pretrain: bool) -> Result<()> {
        let mut grads = g.backward(out);
        let mut updates = Vec::new();
        for (i, p) in self.state.params.iter().enumerate() {
            if pretrain && !self.pretrain_mask[i] {
                continue;
            }
            if let Some(grad) = grads.take(vars[i]) {
                if grad.as_slice().iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteGradient { param: p.name.clone() });
                }
                updates.push((i, grad));
            }
        }
        for (i, grad) in updates {
            let p = &mut self.state.params[i];
            p.grad = grad;
            adam_step(p, lr, cfg.adam)?;
        }
        Ok(())
    }

    /// One full-batch Adam step on reconstruction plus orthogonality,
    /// updating encoders, decoders and `C` only. Returns the pre-step loss.
    pub fn pretrain_epoch(&mut self, ds: &MultiViewDataset, cfg: &TrainConfig, epoch: usize) -> Result<LossBreakdown> {
        let mut g = Graph::new();
        let vars = self.state.leaves(&mut g);
        let xs: Vec<Var> = ds.views.iter().map(|x| g.leaf(x.clone())).collect();
        let pass = self.state.forward_autoencoder(&mut g, &vars, &xs);
        let aes = recon_term(&mut g, &xs, &pass.x_hat);
        let ortho = ortho_term(&mut g, pass.c, &pass.d_views, &pass.r_views);
        let total = g.add(aes, ortho);
        let losses = LossBreakdown {
            aes: g.scalar(aes),
            ortho: g.scalar(ortho),
            total: g.scalar(total),
            ..LossBreakdown::default()
        };
        if !losses.is_finite() {
            return Err(Error::NonFiniteLoss { stage: "pretrain", epoch });
        }
        self.apply(&g, &vars, total, cfg.lr_pretrain, cfg, true)?;
        Ok(losses)
    }

    /// One full-batch Adam step on the full objective with pseudo-labels
    /// refreshed from the current assignments. Returns the pre-step losses.
    pub fn finetune_epoch(&mut self, ds: &MultiViewDataset, cfg: &TrainConfig, epoch: usize) -> Result<LossBreakdown> {
        let shape = &self.state.shape;
        let noise = self.noise.normal_matrix(shape.d, shape.n, 1.0);
        let mut g = Graph::new();
        let vars = self.state.leaves(&mut g);
        let xs: Vec<Var> = ds.views.iter().map(|x| g.leaf(x.clone())).collect();
        let bundle = self.state.forward(&mut g, &vars, &xs, Some(&noise));
        let labels = pseudo_labels(g.value(bundle.q));
        let terms = total_terms(
            &mut g,
            &xs,
            &bundle,
            labels.labels(),
            shape.k,
            &cfg.weights,
            cfg.affinity_block,
        )?;
        let losses = terms.breakdown(&g);
        if !losses.is_finite() {
            return Err(Error::NonFiniteLoss { stage: "finetune", epoch });
        }
        self.apply(&g, &vars, terms.total, cfg.lr_finetune, cfg, false)?;
        Ok(losses)
    }

    /// Inference-mode affinity from the posterior-mean unified representation.
    pub fn affinity(&self, ds: &MultiViewDataset, cfg: &TrainConfig) -> Result<Matrix> {
        let u = self.state.unified_representation(&ds.views)?;
        Ok(materialize_affinity(&u, self.state.theta_s(), cfg.affinity_block))
    }

    /// Spectral clustering of the current affinity against `truth`.
    pub fn snapshot(&self, ds: &MultiViewDataset, cfg: &TrainConfig, truth: &[usize]) -> Result<ClusterMetrics> {
        let s = self.affinity(ds, cfg)?;
        let mut rng = RngStream::new(cfg.seed, CLUSTER_STREAM);
        let eval = evaluate(&s, ds.k, Some(truth), cfg, &mut rng)?;
        Ok(eval.metrics.expect("truth given"))
    }
}

/// Pretraining stage loop with early stopping. On failure the trainer holds
/// the last state whose parameters are finite.
pub fn run_pretrain(trainer: &mut Trainer, ds: &MultiViewDataset, cfg: &TrainConfig, history: &mut Vec<EpochRecord>) -> Result<()> {
    trainer.reset_optimizer();
    let mut totals = Vec::with_capacity(cfg.epochs_pretrain);
    for epoch in 1..=cfg.epochs_pretrain {
        let losses = trainer.pretrain_epoch(ds, cfg, epoch)?;
        history.push(EpochRecord { epoch, losses });
        totals.push(losses.total);
        if plateaued(&totals, cfg.early_stop_window, cfg.early_stop_tol) {
            break;
        }
    }
    Ok(())
}

/// Fine-tuning stage loop with early stopping and periodic evaluation.
pub fn run_finetune(
    trainer: &mut Trainer,
    ds: &MultiViewDataset,
    cfg: &TrainConfig,
    history: &mut Vec<EpochRecord>,
    evaluations: &mut Vec<EvalSnapshot>,
) -> Result<()> {
    trainer.reset_optimizer();
    let truth = ds.labels.as_deref();
    let mut totals = Vec::with_capacity(cfg.epochs_finetune);
    for epoch in 1..=cfg.epochs_finetune {
        if let Some(truth) = truth {
            if epoch == 1 || epoch % cfg.eval_every == 0 {
                let metrics = trainer.snapshot(ds, cfg, truth)?;
                evaluations.push(EvalSnapshot { epoch, metrics });
            }
        }
        let losses = trainer.finetune_epoch(ds, cfg, epoch)?;
        history.push(EpochRecord { epoch, losses });
        totals.push(losses.total);
        if plateaued(&totals, cfg.early_stop_window, cfg.early_stop_tol) {
            break;
        }
    }
    Ok(())
}

/// Pretrains a fresh model on a normalized dataset.
pub fn pretrain(ds: &MultiViewDataset, cfg: &TrainConfig) -> Result<(ModelState, Vec<EpochRecord>)> {
    cfg.validate()?;
    let mut trainer = Trainer::new(ds, cfg)?;
    let mut history = Vec::new();
    run_pretrain(&mut trainer, ds, cfg, &mut history)?;
    Ok((trainer.state, history))
}

/// Output of [`finetune`].
#[derive(Debug, Clone)]
pub struct Finetuned {
    pub state: ModelState,
    pub affinity: Matrix,
    pub history: Vec<EpochRecord>,
    pub evaluations: Vec<EvalSnapshot>,
}

/// Fine-tunes a pretrained state on the full objective and returns the
/// inference-mode affinity.
pub fn finetune(ds: &MultiViewDataset, state: ModelState, cfg: &TrainConfig) -> Result<Finetuned> {
    cfg.validate()?;
    let mut trainer = Trainer::from_parts(state, RngStream::new(cfg.seed, NOISE_STREAM).cursor());
    let mut history = Vec::new();
    let mut evaluations = Vec::new();
    run_finetune(&mut trainer, ds, cfg, &mut history, &mut evaluations)?;
    let affinity = trainer.affinity(ds, cfg)?;
    Ok(Finetuned {
        state: trainer.state,
        affinity,
        history,
        evaluations,
    })
}
