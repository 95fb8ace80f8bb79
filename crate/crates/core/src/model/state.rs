use serde::{Deserialize, Serialize};

use super::layers::{Dense, ParamBuilder, ParamId};
use crate::error::{Error, Result};
use crate::numcore::{softplus, softplus_inv, Graph, Matrix, Param, RngStream, Var};

/// Bounds applied to every predicted log-variance.
pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 10.0;
/// Initial effective soft threshold.
pub const THETA_INIT: f64 = 0.1;
/// Standard deviation of the initial consistent representation.
pub const CONSISTENT_INIT_STD: f64 = 0.01;

/// Sizes that fix the architecture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub view_dims: Vec<usize>,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub hidden: usize,
}

impl ModelShape {
    pub fn num_views(&self) -> usize {
        self.view_dims.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.view_dims.is_empty() || self.view_dims.contains(&0) {
            return Err(Error::InvalidInput("every view needs dimension >= 1".into()));
        }
        if self.n == 0 || self.k == 0 || self.d == 0 || self.hidden == 0 {
            return Err(Error::InvalidInput("n, k, d and hidden must all be >= 1".into()));
        }
        Ok(())
    }
}

/// Backbone `d_v -> hidden` with S-head and C-head `hidden -> d`, all sigmoid.
#[derive(Debug, Clone)]
pub struct ViewEncoder {
    pub backbone: Dense,
    pub s_head: Dense,
    pub c_head: Dense,
}

/// `3d -> hidden -> d_v`, sigmoid on both layers.
#[derive(Debug, Clone)]
pub struct ViewDecoder {
    pub hidden: Dense,
    pub output: Dense,
}

/// Shared `d -> hidden -> K` perceptron with a row softmax.
#[derive(Debug, Clone)]
pub struct ClusterAssignNet {
    pub hidden: Dense,
    pub output: Dense,
}

/// A sigmoid hidden layer feeding Gaussian mean and log-variance heads.
#[derive(Debug, Clone)]
pub struct GaussianHead {
    pub hidden: Dense,
    pub mu: Dense,
    pub log_var: Dense,
}

impl GaussianHead {
    pub fn apply(&self, g: &mut Graph, vars: &[Var], x: Var) -> (Var, Var) {
        let h = self.hidden.apply_sigmoid(g, vars, x);
        let mu = self.mu.apply(g, vars, h);
        let lv = self.log_var.apply(g, vars, h);
        (mu, g.clamp(lv, LOG_VAR_MIN, LOG_VAR_MAX))
    }
}

/// Posterior over the unified representation plus the variational predictors.
#[derive(Debug, Clone)]
pub struct IbHeads {
    /// Consumes `[c_i; d_i^1; ...; d_i^V]`.
    pub unified: GaussianHead,
    /// One per view, consumes `d_i^v`.
    pub view_predictors: Vec<GaussianHead>,
    /// Consumes `c_i`.
    pub consistent_predictor: GaussianHead,
}

/// Single trainable scalar; the effective threshold is `softplus(theta_raw)`.
#[derive(Debug, Clone)]
pub struct RelationMetric {
    pub theta_raw: ParamId,
}

/// Every trainable tensor of the model plus the architecture indexing them.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub shape: ModelShape,
    pub params: Vec<Param>,
    pub encoders: Vec<ViewEncoder>,
    pub decoders: Vec<ViewDecoder>,
    /// Trainable `d x n` consistent representation.
    pub consistent: ParamId,
    pub assign: ClusterAssignNet,
    pub ib: IbHeads,
    pub relation: RelationMetric,
}

/// Graph handles for one forward pass.
#[derive(Debug, Clone)]
pub struct LatentBundle {
    pub c: Var,
    pub d_views: Vec<Var>,
    pub r_views: Vec<Var>,
    pub z_views: Vec<Var>,
    pub x_hat: Vec<Var>,
    pub d_glob: Var,
    pub r_glob: Var,
    pub q: Var,
    pub q_d: Var,
    pub q_r: Var,
    pub mu_u: Var,
    pub log_var_u: Var,
    pub u: Var,
    pub pred_d: Vec<(Var, Var)>,
    pub pred_c: (Var, Var),
    pub theta: Var,
}

/// Graph handles for the autoencoder-only pass used in pretraining.
#[derive(Debug, Clone)]
pub struct AutoencoderPass {
    pub c: Var,
    pub d_views: Vec<Var>,
    pub r_views: Vec<Var>,
    pub x_hat: Vec<Var>,
}

/// Values produced by [`ModelState::ib_forward`].
#[derive(Debug, Clone)]
pub struct IbOutput {
    pub u: Matrix,
    pub mu_u: Matrix,
    pub log_var_u: Matrix,
    pub pred_d: Vec<(Matrix, Matrix)>,
    pub pred_c: (Matrix, Matrix),
}

impl ModelState {
    /// Builds and initializes every parameter in a fixed order from `rng`.
    pub fn new(shape: ModelShape, rng: &mut RngStream) -> Result<Self> {
        shape.validate()?;
        let (d, h, v_count) = (shape.d, shape.hidden, shape.num_views());
        let mut b = ParamBuilder {
            params: Vec::new(),
            rng,
        };

        let encoders = shape
            .view_dims
            .iter()
            .enumerate()
            .map(|(v, &dv)| ViewEncoder {
                backbone: b.dense(&format!("enc{v}.backbone"), dv, h),
                s_head: b.dense(&format!("enc{v}.s_head"), h, d),
                c_head: b.dense(&format!("enc{v}.c_head"), h, d),
            })
            .collect();
        let decoders = shape
            .view_dims
            .iter()
            .enumerate()
            .map(|(v, &dv)| ViewDecoder {
                hidden: b.dense(&format!("dec{v}.hidden"), 3 * d, h),
                output: b.dense(&format!("dec{v}.output"), h, dv),
            })
            .collect();
        let c_init = b.rng.normal_matrix(d, shape.n, CONSISTENT_INIT_STD);
        let consistent = b.add("consistent".into(), c_init);
        let assign = ClusterAssignNet {
            hidden: b.dense("assign.hidden", d, h),
            output: b.dense("assign.output", h, shape.k),
        };
        let head = |b: &mut ParamBuilder, name: &str, in_dim: usize| GaussianHead {
            hidden: b.dense(&format!("{name}.hidden"), in_dim, h),
            mu: b.dense(&format!("{name}.mu"), h, d),
            log_var: b.dense(&format!("{name}.log_var"), h, d),
        };
        let unified = head(&mut b, "ib.unified", (v_count + 1) * d);
        let view_predictors = (0..v_count)
            .map(|v| head(&mut b, &format!("ib.view{v}"), d))
            .collect();
        let consistent_predictor = head(&mut b, "ib.consistent", d);
        let theta_raw = b.add("relation.theta_raw".into(), Matrix::scalar(softplus_inv(THETA_INIT)));

        Ok(Self {
            shape,
            params: b.params,
            encoders,
            decoders,
            consistent,
            assign,
            ib: IbHeads {
                unified,
                view_predictors,
                consistent_predictor,
            },
            relation: RelationMetric { theta_raw },
        })
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn param_by_name(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Effective soft threshold `θ_s`.
    pub fn theta_s(&self) -> f64 {
        softplus(self.param(self.relation.theta_raw).value.item())
    }

    /// Number of trainable scalars in the self-expression component.
    pub fn self_expression_param_count(&self) -> usize {
        self.param(self.relation.theta_raw).value.len()
    }

    pub fn total_param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// One leaf per parameter, in order.
    pub fn leaves(&self, g: &mut Graph) -> Vec<Var> {
        self.params.iter().map(|p| g.leaf(p.value.clone())).collect()
    }

    fn check_views(&self, views: &[Matrix]) -> Result<()> {
        if views.len() != self.shape.num_views() {
            return Err(Error::shape("views", self.shape.num_views(), views.len()));
        }
        for (v, (m, &dv)) in views.iter().zip(&self.shape.view_dims).enumerate() {
            m.ensure_shape(&format!("view {v}"), dv, self.shape.n)?;
        }
        Ok(())
    }

    pub(crate) fn encode(&self, g: &mut Graph, vars: &[Var], v: usize, x: Var) -> (Var, Var) {
        let enc = &self.encoders[v];
        let h = enc.backbone.apply_sigmoid(g, vars, x);
        let d = enc.c_head.apply_sigmoid(g, vars, h);
        let r = enc.s_head.apply_sigmoid(g, vars, h);
        (d, r)
    }

    pub(crate) fn decode(&self, g: &mut Graph, vars: &[Var], v: usize, z: Var) -> Var {
        let dec = &self.decoders[v];
        let h = dec.hidden.apply_sigmoid(g, vars, z);
        dec.output.apply_sigmoid(g, vars, h)
    }

    pub(crate) fn assign_probs(&self, g: &mut Graph, vars: &[Var], rep: Var) -> Var {
        let h = self.assign.hidden.apply_sigmoid(g, vars, rep);
        let logits = self.assign.output.apply(g, vars, h);
        let t = g.transpose(logits);
        g.softmax_rows(t)
    }

    fn mean_of(g: &mut Graph, parts: &[Var]) -> Var {
        let total = g.sum_of(parts);
        g.scale(total, 1.0 / parts.len() as f64)
    }

    /// Encoders, decoders and `C` only.
    pub fn forward_autoencoder(&self, g: &mut Graph, vars: &[Var], xs: &[Var]) -> AutoencoderPass {
        let c = vars[self.consistent.0];
        let mut d_views = Vec::with_capacity(xs.len());
        let mut r_views = Vec::with_capacity(xs.len());
        let mut x_hat = Vec::with_capacity(xs.len());
        for (v, &x) in xs.iter().enumerate() {
            let (d, r) = self.encode(g, vars, v, x);
            let z = g.vstack(&[c, d, r]);
            x_hat.push(self.decode(g, vars, v, z));
            d_views.push(d);
            r_views.push(r);
        }
        AutoencoderPass {
            c,
            d_views,
            r_views,
            x_hat,
        }
    }

    /// Full forward pass. With `noise` the unified representation is the
    /// reparameterized sample `mu + exp(log_var / 2) * noise`; without it, the mean.
    pub fn forward(&self, g: &mut Graph, vars: &[Var], xs: &[Var], noise: Option<&Matrix>) -> LatentBundle {
        let c = vars[self.consistent.0];
        let mut d_views = Vec::with_capacity(xs.len());
        let mut r_views = Vec::with_capacity(xs.len());
        let mut z_views = Vec::with_capacity(xs.len());
        let mut x_hat = Vec::with_capacity(xs.len());
        for (v, &x) in xs.iter().enumerate() {
            let (d, r) = self.encode(g, vars, v, x);
            let z = g.vstack(&[c, d, r]);
            x_hat.push(self.decode(g, vars, v, z));
            d_views.push(d);
            r_views.push(r);
            z_views.push(z);
        }
        let d_glob = Self::mean_of(g, &d_views);
        let r_glob = Self::mean_of(g, &r_views);
        let q = self.assign_probs(g, vars, c);
        let q_d = self.assign_probs(g, vars, d_glob);
        let q_r = self.assign_probs(g, vars, r_glob);

        let (mu_u, log_var_u, u, pred_d, pred_c) = self.ib_graph(g, vars, c, &d_views, noise);
        let theta_raw = vars[self.relation.theta_raw.0];
        let theta = g.softplus(theta_raw);

        LatentBundle {
            c,
            d_views,
            r_views,
            z_views,
            x_hat,
            d_glob,
            r_glob,
            q,
            q_d,
            q_r,
            mu_u,
            log_var_u,
            u,
            pred_d,
            pred_c,
            theta,
        }
    }

    #[allow(clippy::type_complexity)]
    fn ib_graph(
        &self,
        g: &mut Graph,
        vars: &[Var],
        c: Var,
        d_views: &[Var],
        noise: Option<&Matrix>,
    ) -> (Var, Var, Var, Vec<(Var, Var)>, (Var, Var)) {
        let mut stacked = vec![c];
        stacked.extend_from_slice(d_views);
        let input = g.vstack(&stacked);
        let (mu_u, log_var_u) = self.ib.unified.apply(g, vars, input);
        let u = match noise {
            Some(eps) => {
                let half = g.scale(log_var_u, 0.5);
                let std = g.exp(half);
                let e = g.leaf(eps.clone());
                let jitter = g.mul(std, e);
                g.add(mu_u, jitter)
            }
            None => mu_u,
        };
        let pred_d = self
            .ib
            .view_predictors
            .iter()
            .zip(d_views)
            .map(|(head, &d)| head.apply(g, vars, d))
            .collect();
        let pred_c = self.ib.consistent_predictor.apply(g, vars, c);
        (mu_u, log_var_u, u, pred_d, pred_c)
    }

    /// `(D^v, R^v)` for view `v`.
    pub fn encode_view(&self, v: usize, x: &Matrix) -> Result<(Matrix, Matrix)> {
        if v >= self.shape.num_views() {
            return Err(Error::shape("view index", self.shape.num_views(), v));
        }
        if x.rows() != self.shape.view_dims[v] {
            return Err(Error::shape("encoder input rows", self.shape.view_dims[v], x.rows()));
        }
        let mut g = Graph::new();
        let vars = self.leaves(&mut g);
        let xv = g.leaf(x.clone());
        let (d, r) = self.encode(&mut g, &vars, v, xv);
        Ok((g.value(d).clone(), g.value(r).clone()))
    }

    /// Reconstruction of view `v` from `[C; D^v; R^v]`.
    pub fn decode_view(&self, v: usize, c: &Matrix, d: &Matrix, r: &Matrix) -> Result<Matrix> {
        if v >= self.shape.num_views() {
            return Err(Error::shape("view index", self.shape.num_views(), v));
        }
        let dim = self.shape.d;
        for (name, m) in [("C", c), ("D", d), ("R", r)] {
            if m.rows() != dim || m.cols() != c.cols() {
                return Err(Error::shape(
                    format!("decoder input {name}"),
                    format!("{dim}x{}", c.cols()),
                    format!("{}x{}", m.rows(), m.cols()),
                ));
            }
        }
        let mut g = Graph::new();
        let vars = self.leaves(&mut g);
        let z = g.leaf(Matrix::vstack(&[c, d, r])?);
        let out = self.decode(&mut g, &vars, v, z);
        Ok(g.value(out).clone())
    }

    /// Row-stochastic `n x K` assignment matrix for a `d x n` representation.
    pub fn cluster_assign(&self, rep: &Matrix) -> Result<Matrix> {
        if rep.rows() != self.shape.d {
            return Err(Error::shape("assignment input rows", self.shape.d, rep.rows()));
        }
        let mut g = Graph::new();
        let vars = self.leaves(&mut g);
        let x = g.leaf(rep.clone());
        let q = self.assign_probs(&mut g, &vars, x);
        Ok(g.value(q).clone())
    }

    /// Unified posterior, its sample (or mean), and the predictor outputs.
    pub fn ib_forward(&self, c: &Matrix, d_all: &[Matrix], rng: &mut RngStream, sample: bool) -> Result<IbOutput> {
        if d_all.len() != self.shape.num_views() {
            return Err(Error::shape("complementary representations", self.shape.num_views(), d_all.len()));
        }
        for m in std::iter::once(c).chain(d_all) {
            m.ensure_shape("ib_forward input", self.shape.d, c.cols())?;
        }
        let noise = sample.then(|| rng.normal_matrix(self.shape.d, c.cols(), 1.0));
        self.ib_forward_with_noise(c, d_all, noise.as_ref())
    }

    /// [`Self::ib_forward`] with explicit noise (`None` means inference mode).
    pub fn ib_forward_with_noise(&self, c: &Matrix, d_all: &[Matrix], noise: Option<&Matrix>) -> Result<IbOutput> {
        let mut g = Graph::new();
        let vars = self.leaves(&mut g);
        let cv = g.leaf(c.clone());
        let dv: Vec<Var> = d_all.iter().map(|d| g.leaf(d.clone())).collect();
        let (mu, lv, u, pred_d, pred_c) = self.ib_graph(&mut g, &vars, cv, &dv, noise);
        let pair = |g: &Graph, (a, b): (Var, Var)| (g.value(a).clone(), g.value(b).clone());
        Ok(IbOutput {
            u: g.value(u).clone(),
            mu_u: g.value(mu).clone(),
            log_var_u: g.value(lv).clone(),
            pred_d: pred_d.into_iter().map(|p| pair(&g, p)).collect(),
            pred_c: pair(&g, pred_c),
        })
    }

    /// Inference-mode unified representation (posterior means), `d x n`.
    pub fn unified_representation(&self, views: &[Matrix]) -> Result<Matrix> {
        self.check_views(views)?;
        let mut g = Graph::new();
        let vars = self.leaves(&mut g);
        let xs: Vec<Var> = views.iter().map(|x| g.leaf(x.clone())).collect();
        let bundle = self.forward(&mut g, &vars, &xs, None);
        Ok(g.value(bundle.u).clone())
    }

    /// Inference-mode consistent assignment matrix `Q`.
    pub fn consistent_assignments(&self) -> Matrix {
        self.cluster_assign(&self.param(self.consistent).value)
            .expect("C has d rows by construction")
    }
}

/// Per-sample mean over views of the complementary and superfluous representations.
pub fn global_private_reps(d_views: &[Matrix], r_views: &[Matrix]) -> Result<(Matrix, Matrix)> {
    let mean = |parts: &[Matrix], what: &str| -> Result<Matrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput(format!("no {what} representations")))?;
        let mut acc = first.clone();
        for p in &parts[1..] {
            if p.shape() != first.shape() {
                return Err(Error::shape(what.to_string(), format!("{:?}", first.shape()), format!("{:?}", p.shape())));
            }
            acc.add_assign(p);
        }
        Ok(acc.scale(1.0 / parts.len() as f64))
    };
    Ok((mean(d_views, "complementary")?, mean(r_views, "superfluous")?))
}
