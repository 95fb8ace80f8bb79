use crate::numcore::{Graph, Matrix, Param, RngStream, Var};

/// Index of a tensor in [`super::ModelState::params`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub usize);

/// Collects parameters in creation order.
pub(crate) struct ParamBuilder<'a> {
    pub params: Vec<Param>,
    pub rng: &'a mut RngStream,
}

impl ParamBuilder<'_> {
    pub fn add(&mut self, name: String, value: Matrix) -> ParamId {
        self.params.push(Param::new(name, value));
        ParamId(self.params.len() - 1)
    }

    /// Affine map with uniform(±sqrt(6 / (fan_in + fan_out))) weights and zero bias.
    pub fn dense(&mut self, name: &str, in_dim: usize, out_dim: usize) -> Dense {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w = self.rng.uniform_matrix(out_dim, in_dim, -limit, limit);
        Dense {
            w: self.add(format!("{name}.w"), w),
            b: self.add(format!("{name}.b"), Matrix::zeros(out_dim, 1)),
            in_dim,
            out_dim,
        }
    }
}

/// `y = W x + b` applied column-wise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    pub fn apply(&self, g: &mut Graph, vars: &[Var], x: Var) -> Var {
        let y = g.matmul(vars[self.w.0], x);
        g.add_bias(y, vars[self.b.0])
    }

    pub fn apply_sigmoid(&self, g: &mut Graph, vars: &[Var], x: Var) -> Var {
        let y = self.apply(g, vars, x);
        g.sigmoid(y)
    }
}
