//! The loss terms of the joint objective and their weighted total.
//!
//! Every term exists in two forms: a graph builder (`*_term`) used during
//! training, and a plain function on matrices that evaluates the same graph.

mod coding_rate;
mod relation;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use coding_rate::{
    coding_rate_global, coding_rate_global_term, coding_rate_local, coding_rate_local_term,
    dis_term, logdet_gram, loss_dis,
};
pub use relation::{loss_rel, rel_term};

use crate::error::{Error, Result};
use crate::model::LatentBundle;
use crate::numcore::{Graph, Matrix, Var};

/// Trade-off weights and the coding-rate distortion `ε²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub epsilon_sq: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            lambda4: 1.0,
            epsilon_sq: 0.5,
        }
    }
}

impl LossWeights {
    pub fn zero_lambdas(self) -> Self {
        Self {
            lambda1: 0.0,
            lambda2: 0.0,
            lambda3: 0.0,
            lambda4: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lambdas = [self.lambda1, self.lambda2, self.lambda3, self.lambda4];
        if lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidInput("loss weights must be finite and >= 0".into()));
        }
        if !(self.epsilon_sq > 0.0) || !self.epsilon_sq.is_finite() {
            return Err(Error::InvalidInput("epsilon_sq must be positive".into()));
        }
        Ok(())
    }
}

/// Per-term values of one evaluation of the objective.
///
/// `aes` is the reconstruction part of the autoencoder loss; `ortho` is its
/// orthogonality part, reported separately. `total = aes + ortho + λ1·ss +
/// λ2·ib + λ3·dis + λ4·rel`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub aes: f64,
    pub ortho: f64,
    pub ss: f64,
    pub ib: f64,
    pub dis: f64,
    pub rel: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [self.aes, self.ortho, self.ss, self.ib, self.dis, self.rel, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

fn sq_diff_sum(g: &mut Graph, a: Var, b: Var) -> Var {
    let diff = g.sub(a, b);
    let sq = g.mul(diff, diff);
    g.sum_all(sq)
}

/// `Σ_v ‖X^v - X̂^v‖²_F`.
pub fn recon_term(g: &mut Graph, xs: &[Var], x_hat: &[Var]) -> Var {
    let terms: Vec<Var> = xs.iter().zip(x_hat).map(|(&x, &xh)| sq_diff_sum(g, x, xh)).collect();
    g.sum_of(&terms)
}

/// `(1/n) Σ_v Σ_i (<c_i,d_i>² + <c_i,r_i>² + <d_i,r_i>²)`.
pub fn ortho_term(g: &mut Graph, c: Var, d_views: &[Var], r_views: &[Var]) -> Var {
    let n = g.value(c).cols();
    let mut terms = Vec::with_capacity(3 * d_views.len());
    for (&d, &r) in d_views.iter().zip(r_views) {
        for (a, b) in [(c, d), (c, r), (d, r)] {
            let dots = g.column_dots(a, b);
            let sq = g.mul(dots, dots);
            terms.push(g.sum_all(sq));
        }
    }
    let total = g.sum_of(&terms);
    g.scale(total, 1.0 / n as f64)
}

/// `‖Q - Q^D‖²_F - ‖Q - Q^R‖²_F`.
pub fn ss_term(g: &mut Graph, q: Var, q_d: Var, q_r: Var) -> Var {
    let close = sq_diff_sum(g, q, q_d);
    let far = sq_diff_sum(g, q, q_r);
    g.sub(close, far)
}

/// Summed `KL(N(mu, e^{log_var}) || N(0, I))` over all columns.
pub fn kl_std_term(g: &mut Graph, mu: Var, log_var: Var) -> Var {
    let count = g.value(mu).len() as f64;
    let mu_sq = g.mul(mu, mu);
    let mu_sq = g.sum_all(mu_sq);
    let var = g.exp(log_var);
    let var = g.sum_all(var);
    let lv = g.sum_all(log_var);
    let a = g.add(mu_sq, var);
    let b = g.sub(a, lv);
    let half = g.scale(b, 0.5);
    g.add_const(half, -0.5 * count)
}

/// Summed diagonal-Gaussian log-density of the columns of `x`.
pub fn logpdf_term(g: &mut Graph, x: Var, mu: Var, log_var: Var) -> Var {
    let count = g.value(x).len() as f64;
    let diff = g.sub(x, mu);
    let sq = g.mul(diff, diff);
    let neg_lv = g.scale(log_var, -1.0);
    let precision = g.exp(neg_lv);
    let weighted = g.mul(sq, precision);
    let quad = g.sum_all(weighted);
    let lv = g.sum_all(log_var);
    let s = g.add(quad, lv);
    let half = g.scale(s, -0.5);
    g.add_const(half, -0.5 * (2.0 * PI).ln() * count)
}

/// Information-bottleneck estimator averaged over samples: `V` times the
/// KL of the unified posterior to the standard normal, minus the
/// log-likelihood of the sample under every view predictor and the
/// consistent predictor.
pub fn ib_term(
    g: &mut Graph,
    mu_u: Var,
    log_var_u: Var,
    u: Var,
    pred_d: &[(Var, Var)],
    pred_c: (Var, Var),
    num_views: usize,
) -> Var {
    let n = g.value(u).cols() as f64;
    let kl = kl_std_term(g, mu_u, log_var_u);
    let mut acc = g.scale(kl, num_views as f64);
    for &(m, lv) in pred_d.iter().chain(std::iter::once(&pred_c)) {
        let lp = logpdf_term(g, u, m, lv);
        acc = g.sub(acc, lp);
    }
    g.scale(acc, 1.0 / n)
}

/// Graph handles of every term plus the weighted total.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub aes: Var,
    pub ortho: Var,
    pub ss: Var,
    pub ib: Var,
    pub dis: Var,
    pub rel: Var,
    pub total: Var,
}

impl LossTerms {
    pub fn breakdown(&self, g: &Graph) -> LossBreakdown {
        LossBreakdown {
            aes: g.scalar(self.aes),
            ortho: g.scalar(self.ortho),
            ss: g.scalar(self.ss),
            ib: g.scalar(self.ib),
            dis: g.scalar(self.dis),
            rel: g.scalar(self.rel),
            total: g.scalar(self.total),
        }
    }
}

/// Weighted total objective on a forward bundle; `labels` are the detached
/// pseudo-labels defining the partition.
pub fn total_terms(
    g: &mut Graph,
    xs: &[Var],
    bundle: &LatentBundle,
    labels: &[usize],
    k: usize,
    weights: &LossWeights,
    block: usize,
) -> Result<LossTerms> {
    weights.validate()?;
    let aes = recon_term(g, xs, &bundle.x_hat);
    let ortho = ortho_term(g, bundle.c, &bundle.d_views, &bundle.r_views);
    let ss = ss_term(g, bundle.q, bundle.q_d, bundle.q_r);
    let ib = ib_term(
        g,
        bundle.mu_u,
        bundle.log_var_u,
        bundle.u,
        &bundle.pred_d,
        bundle.pred_c,
        xs.len(),
    );
    let dis = dis_term(g, bundle.u, labels, k, weights.epsilon_sq)?;
    let rel = rel_term(g, bundle.u, bundle.theta, block)?;
    let total = weighted_total(g, [aes, ortho, ss, ib, dis, rel], weights);
    Ok(LossTerms {
        aes,
        ortho,
        ss,
        ib,
        dis,
        rel,
        total,
    })
}

/// `aes + ortho + λ1·ss + λ2·ib + λ3·dis + λ4·rel` from term handles in that order.
pub fn weighted_total(g: &mut Graph, [aes, ortho, ss, ib, dis, rel]: [Var; 6], w: &LossWeights) -> Var {
    let base = g.add(aes, ortho);
    let mut parts = vec![base];
    for (term, lambda) in [(ss, w.lambda1), (ib, w.lambda2), (dis, w.lambda3), (rel, w.lambda4)] {
        parts.push(g.scale(term, lambda));
    }
    g.sum_of(&parts)
}

// ---- matrix-level evaluation ----

fn check_same(context: &str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(context, format!("{:?}", a.shape()), format!("{:?}", b.shape())));
    }
    Ok(())
}

fn eval(build: impl FnOnce(&mut Graph) -> Result<Var>) -> Result<f64> {
    let mut g = Graph::new();
    let out = build(&mut g)?;
    Ok(g.scalar(out))
}

fn leaves(g: &mut Graph, ms: &[Matrix]) -> Vec<Var> {
    ms.iter().map(|m| g.leaf(m.clone())).collect()
}

pub fn loss_recon(x: &[Matrix], x_hat: &[Matrix]) -> Result<f64> {
    if x.len() != x_hat.len() || x.is_empty() {
        return Err(Error::shape("reconstructions", x.len(), x_hat.len()));
    }
    for (a, b) in x.iter().zip(x_hat) {
        check_same("reconstruction", a, b)?;
    }
    eval(|g| {
        let xs = leaves(g, x);
        let xh = leaves(g, x_hat);
        Ok(recon_term(g, &xs, &xh))
    })
}

pub fn loss_ortho(c: &Matrix, d_views: &[Matrix], r_views: &[Matrix]) -> Result<f64> {
    if d_views.len() != r_views.len() || d_views.is_empty() {
        return Err(Error::shape("latent views", d_views.len(), r_views.len()));
    }
    for m in d_views.iter().chain(r_views) {
        check_same("latent representation", c, m)?;
    }
    eval(|g| {
        let cv = g.leaf(c.clone());
        let ds = leaves(g, d_views);
        let rs = leaves(g, r_views);
        Ok(ortho_term(g, cv, &ds, &rs))
    })
}

pub fn loss_ss(q: &Matrix, q_d: &Matrix, q_r: &Matrix) -> Result<f64> {
    check_same("Q^D", q, q_d)?;
    check_same("Q^R", q, q_r)?;
    eval(|g| {
        let (a, b, c) = (g.leaf(q.clone()), g.leaf(q_d.clone()), g.leaf(q_r.clone()));
        Ok(ss_term(g, a, b, c))
    })
}

pub fn loss_ib(
    mu_u: &Matrix,
    log_var_u: &Matrix,
    u_sample: &Matrix,
    pred_d: &[(Matrix, Matrix)],
    pred_c: &(Matrix, Matrix),
    num_views: usize,
) -> Result<f64> {
    let u = u_sample;
    check_same("log_var_u", mu_u, log_var_u)?;
    check_same("unified sample", mu_u, u)?;
    for (m, lv) in pred_d.iter().chain(std::iter::once(pred_c)) {
        check_same("predictor mean", u, m)?;
        check_same("predictor log-variance", u, lv)?;
    }
    eval(|g| {
        let (m, lv, uv) = (g.leaf(mu_u.clone()), g.leaf(log_var_u.clone()), g.leaf(u.clone()));
        let pd: Vec<(Var, Var)> = pred_d
            .iter()
            .map(|(a, b)| (g.leaf(a.clone()), g.leaf(b.clone())))
            .collect();
        let pc = (g.leaf(pred_c.0.clone()), g.leaf(pred_c.1.clone()));
        Ok(ib_term(g, m, lv, uv, &pd, pc, num_views))
    })
}

/// Matrix-level inputs of one objective evaluation.
#[derive(Debug, Clone)]
pub struct LossInputs {
    pub x: Vec<Matrix>,
    pub x_hat: Vec<Matrix>,
    pub c: Matrix,
    pub d_views: Vec<Matrix>,
    pub r_views: Vec<Matrix>,
    pub q: Matrix,
    pub q_d: Matrix,
    pub q_r: Matrix,
    pub mu_u: Matrix,
    pub log_var_u: Matrix,
    pub u: Matrix,
    pub pred_d: Vec<(Matrix, Matrix)>,
    pub pred_c: (Matrix, Matrix),
    pub labels: Vec<usize>,
    pub k: usize,
    pub theta_s: f64,
}

/// Evaluates every term and the weighted total.
pub fn loss_total(inputs: &LossInputs, weights: &LossWeights, block: usize) -> Result<LossBreakdown> {
    weights.validate()?;
    let aes = loss_recon(&inputs.x, &inputs.x_hat)?;
    let ortho = loss_ortho(&inputs.c, &inputs.d_views, &inputs.r_views)?;
    let ss = loss_ss(&inputs.q, &inputs.q_d, &inputs.q_r)?;
    let ib = loss_ib(
        &inputs.mu_u,
        &inputs.log_var_u,
        &inputs.u,
        &inputs.pred_d,
        &inputs.pred_c,
        inputs.x.len(),
    )?;
    let dis = loss_dis(&inputs.u, &inputs.labels, inputs.k, weights.epsilon_sq)?;
    let rel = loss_rel(&inputs.u, inputs.theta_s, block)?;
    let total = eval(|g| {
        let parts = [aes, ortho, ss, ib, dis, rel].map(|v| g.leaf(Matrix::scalar(v)));
        Ok(weighted_total(g, parts, weights))
    })?;
    Ok(LossBreakdown {
        aes,
        ortho,
        ss,
        ib,
        dis,
        rel,
        total,
    })
}
