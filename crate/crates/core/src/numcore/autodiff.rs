//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Graph`] is a tape: every operation appends a node holding its forward
//! value. [`Graph::backward`] walks the tape in reverse and accumulates
//! vector-Jacobian products. Scalars are 1x1 matrices.

use super::gaussian::{sigmoid, softmax_rows, softplus};
use super::matrix::Matrix;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Backward rule for an operation defined outside this module.
///
/// `inputs` are the forward values of the operation's inputs, `output` its
/// forward value, and `upstream` the gradient flowing into the output. Returns
/// one gradient per input, same shapes as the inputs.
pub trait CustomOp: Send + Sync {
    fn backward(&self, inputs: &[&Matrix], output: &Matrix, upstream: &Matrix) -> Vec<Matrix>;
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    Sigmoid(Var),
    Exp(Var),
    Softplus(Var),
    Clamp(Var, f64, f64),
    SoftmaxRows(Var),
    Transpose(Var),
    VStack(Vec<Var>),
    SumAll(Var),
    ColumnDots(Var, Var),
    Custom(Vec<Var>, Box<dyn CustomOp>),
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Computation tape.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Input node. Constants and trainable tensors are both leaves.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.item()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).add(self.value(b));
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).sub(self.value(b));
        self.push(value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).hadamard(self.value(b));
        self.push(value, Op::Mul(a, b))
    }

    /// `x + b 1^T`: adds the column vector `b` to every column of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Var {
        let (xv, bv) = (self.value(x), self.value(b));
        assert_eq!(bv.shape(), (xv.rows(), 1), "add_bias: bias must be rows x 1");
        let mut value = xv.clone();
        for r in 0..value.rows() {
            let bias = bv[(r, 0)];
            value.row_mut(r).iter_mut().for_each(|v| *v += bias);
        }
        self.push(value, Op::AddBias(x, b))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let value = self.value(x).scale(s);
        self.push(value, Op::Scale(x, s))
    }

    pub fn add_const(&mut self, x: Var, c: f64) -> Var {
        let value = self.value(x).map(|v| v + c);
        self.push(value, Op::AddConst(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).map(sigmoid);
        self.push(value, Op::Sigmoid(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let value = self.value(x).map(f64::exp);
        self.push(value, Op::Exp(x))
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        let value = self.value(x).map(softplus);
        self.push(value, Op::Softplus(x))
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(x).map(|v| v.clamp(lo, hi));
        self.push(value, Op::Clamp(x, lo, hi))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let value = softmax_rows(self.value(x));
        self.push(value, Op::SoftmaxRows(x))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let value = self.value(x).transpose();
        self.push(value, Op::Transpose(x))
    }

    /// Vertical concatenation.
    pub fn vstack(&mut self, parts: &[Var]) -> Var {
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Matrix::vstack(&mats).expect("vstack: column counts must agree");
        self.push(value, Op::VStack(parts.to_vec()))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let value = Matrix::scalar(self.value(x).sum());
        self.push(value, Op::SumAll(x))
    }

    /// `1 x n` row of per-column inner products `<a_j, b_j>`.
    pub fn column_dots(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape(), bv.shape(), "column_dots shapes");
        let mut value = Matrix::zeros(1, av.cols());
        for r in 0..av.rows() {
            for (c, (x, y)) in av.row(r).iter().zip(bv.row(r)).enumerate() {
                value[(0, c)] += x * y;
            }
        }
        self.push(value, Op::ColumnDots(a, b))
    }

    /// Records an externally computed value with a custom backward rule.
    pub fn custom(&mut self, inputs: &[Var], value: Matrix, op: Box<dyn CustomOp>) -> Var {
        self.push(value, Op::Custom(inputs.to_vec(), op))
    }

    /// Sum of several scalars/matrices of equal shape.
    pub fn sum_of(&mut self, terms: &[Var]) -> Var {
        let mut acc = terms[0];
        for &t in &terms[1..] {
            acc = self.add(acc, t);
        }
        acc
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, output: Var) -> Gradients {
        assert_eq!(self.value(output).shape(), (1, 1), "backward needs a scalar output");
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = &node.value;
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let da = g.matmul_nt(self.value(*b));
                    let db = self.value(*a).matmul_tn(&g);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.scale(-1.0));
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let da = g.hadamard(self.value(*b));
                    let db = g.hadamard(self.value(*a));
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddBias(x, b) => {
                    let mut db = Matrix::zeros(g.rows(), 1);
                    for r in 0..g.rows() {
                        db[(r, 0)] = g.row(r).iter().sum();
                    }
                    accumulate(&mut grads, *b, db);
                    accumulate(&mut grads, *x, g);
                }
                Op::Scale(x, s) => accumulate(&mut grads, *x, g.scale(*s)),
                Op::AddConst(x) => accumulate(&mut grads, *x, g),
                Op::Sigmoid(x) => {
                    let dx = g.zip_map(y, |g, s| g * s * (1.0 - s));
                    accumulate(&mut grads, *x, dx);
                }
                Op::Exp(x) => accumulate(&mut grads, *x, g.hadamard(y)),
                Op::Softplus(x) => {
                    let dx = g.zip_map(self.value(*x), |g, v| g * sigmoid(v));
                    accumulate(&mut grads, *x, dx);
                }
                Op::Clamp(x, lo, hi) => {
                    let (lo, hi) = (*lo, *hi);
                    let dx = g.zip_map(self.value(*x), |g, v| if v > lo && v < hi { g } else { 0.0 });
                    accumulate(&mut grads, *x, dx);
                }
                Op::SoftmaxRows(x) => {
                    let mut dx = g.clone();
                    for r in 0..dx.rows() {
                        let yr = y.row(r);
                        let inner: f64 = g.row(r).iter().zip(yr).map(|(a, b)| a * b).sum();
                        for (d, &p) in dx.row_mut(r).iter_mut().zip(yr) {
                            *d = p * (*d - inner);
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Transpose(x) => accumulate(&mut grads, *x, g.transpose()),
                Op::VStack(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let rows = self.value(p).rows();
                        accumulate(&mut grads, p, g.row_block(start, start + rows));
                        start += rows;
                    }
                }
                Op::SumAll(x) => {
                    let (r, c) = self.value(*x).shape();
                    accumulate(&mut grads, *x, Matrix::filled(r, c, g.item()));
                }
                Op::ColumnDots(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let scale_cols = |m: &Matrix| {
                        let mut out = m.clone();
                        for r in 0..out.rows() {
                            for (v, &w) in out.row_mut(r).iter_mut().zip(g.row(0)) {
                                *v *= w;
                            }
                        }
                        out
                    };
                    let da = scale_cols(bv);
                    let db = scale_cols(av);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Custom(inputs, op) => {
                    let vals: Vec<&Matrix> = inputs.iter().map(|&v| self.value(v)).collect();
                    let dins = op.backward(&vals, y, &g);
                    debug_assert_eq!(dins.len(), inputs.len());
                    for (&v, d) in inputs.iter().zip(dins) {
                        accumulate(&mut grads, v, d);
                    }
                }
            }
        }
        Gradients { grads }
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_grad(build: impl Fn(&mut Graph, Var) -> Var, x: &Matrix) -> Matrix {
        let h = 1e-6;
        Matrix::from_fn(x.rows(), x.cols(), |r, c| {
            let mut plus = x.clone();
            plus[(r, c)] += h;
            let mut minus = x.clone();
            minus[(r, c)] -= h;
            let eval = |m: Matrix| {
                let mut g = Graph::new();
                let v = g.leaf(m);
                let out = build(&mut g, v);
                g.scalar(out)
            };
            (eval(plus) - eval(minus)) / (2.0 * h)
        })
    }

    fn check(build: impl Fn(&mut Graph, Var) -> Var + Copy, x: Matrix) {
        let mut g = Graph::new();
        let v = g.leaf(x.clone());
        let out = build(&mut g, v);
        let grads = g.backward(out);
        let analytic = grads.get(v).cloned().unwrap_or_else(|| Matrix::zeros(x.rows(), x.cols()));
        let numeric = numeric_grad(build, &x);
        let err = analytic.sub(&numeric).max_abs();
        assert!(err < 1e-6, "gradient mismatch {err:e}\n{analytic:?}\n{numeric:?}");
    }

    fn input() -> Matrix {
        Matrix::from_rows(&[vec![0.3, -1.2, 0.7], vec![1.5, 0.1, -0.4]]).unwrap()
    }

    #[test]
    fn elementwise_rules() {
        check(|g, x| { let s = g.sigmoid(x); g.sum_all(s) }, input());
        check(|g, x| { let s = g.exp(x); g.sum_all(s) }, input());
        check(|g, x| { let s = g.softplus(x); g.sum_all(s) }, input());
        check(|g, x| { let s = g.mul(x, x); let t = g.scale(s, 0.5); g.sum_all(t) }, input());
        check(|g, x| { let s = g.clamp(x, -1.0, 1.0); let q = g.mul(s, s); g.sum_all(q) }, input());
    }

    #[test]
    fn structural_rules() {
        check(
            |g, x| {
                let w = g.leaf(Matrix::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.2]]).unwrap());
                let b = g.leaf(Matrix::column_vector(&[0.1, -0.2, 0.3]));
                let y = g.matmul(w, x);
                let y = g.add_bias(y, b);
                let y = g.sigmoid(y);
                let t = g.transpose(y);
                let s = g.softmax_rows(t);
                let w2 = g.leaf(Matrix::from_fn(3, 3, |r, c| (r * 3 + c) as f64 * 0.1));
                let z = g.mul(s, w2);
                g.sum_all(z)
            },
            input(),
        );
        check(
            |g, x| {
                let y = g.vstack(&[x, x]);
                let sq = g.mul(y, y);
                let s = g.sum_all(sq);
                g.add_const(s, 3.0)
            },
            input(),
        );
        check(
            |g, x| {
                let e = g.exp(x);
                let d = g.column_dots(x, e);
                let d2 = g.mul(d, d);
                g.sum_all(d2)
            },
            input(),
        );
    }

    #[test]
    fn quadratic_loss_gradient_is_exact() {
        let w = input();
        let mut g = Graph::new();
        let v = g.leaf(w.clone());
        let sq = g.mul(v, v);
        let out = g.sum_all(sq);
        let grads = g.backward(out);
        assert_eq!(grads.get(v).unwrap(), &w.scale(2.0));
    }

    #[test]
    fn unused_leaf_has_no_gradient() {
        let mut g = Graph::new();
        let a = g.leaf(Matrix::scalar(1.0));
        let b = g.leaf(Matrix::scalar(2.0));
        let out = g.scale(a, 3.0);
        let grads = g.backward(out);
        assert_eq!(grads.get(a).unwrap().item(), 3.0);
        assert!(grads.get(b).is_none());
    }
}
