use crate::cluster::pseudo_labels;
use crate::dataio::{synth_generate, SynthSpec};
use crate::error::Result;
use crate::losses::{total_terms, LossWeights};
use crate::model::{ModelShape, ModelState};
use crate::numcore::{grad_check, GradReport, Graph, RngStream, Var};

/// Finite-difference check of the full objective through every network
/// parameter on a tiny synthetic instance (n=12, V=2, d=3, K=3) with the
/// reparameterization noise and the pseudo-labels frozen.
pub fn model_grad_check(seed: u64, tol: f64) -> Result<GradReport> {
    let spec = SynthSpec {
        shared_dim: 3,
        private_dim: 2,
        noise_dim: 2,
        ..SynthSpec::new(12, 2, 3, seed)
    };
    let ds = synth_generate(&spec)?;
    let shape = ModelShape {
        view_dims: ds.view_dims(),
        n: ds.n,
        k: ds.k,
        d: 3,
        hidden: 6,
    };
    let mut state = ModelState::new(shape, &mut RngStream::new(seed, 1))?;
    let mut rng = RngStream::new(seed, 2);
    // Operating point: C moved off its near-zero start so the heads it feeds
    // get gradients well above roundoff, and the unified head scaled down so
    // the self-expression term (cubic in U) does not swamp the loss value.
    let c = state.consistent.0;
    state.params[c].value = rng.normal_matrix(3, ds.n, 0.5);
    for id in [state.ib.unified.mu.w, state.ib.unified.log_var.w] {
        let p = &mut state.params[id.0];
        p.value = p.value.scale(0.2);
    }
    let lv_bias = state.ib.unified.log_var.b.0;
    state.params[lv_bias].value.as_mut_slice().fill(-3.0);
    let noise = rng.normal_matrix(3, ds.n, 1.0);
    let labels = pseudo_labels(&state.consistent_assignments()).into_labels();
    let weights = LossWeights::default();
    let mut params = state.params.clone();
    grad_check(
        &mut params,
        |g: &mut Graph, vars: &[Var]| {
            let xs: Vec<Var> = ds.views.iter().map(|x| g.leaf(x.clone())).collect();
            let bundle = state.forward(g, vars, &xs, Some(&noise));
            Ok(total_terms(g, &xs, &bundle, &labels, ds.k, &weights, 5)?.total)
        },
        &mut rng,
        tol,
    )
}

