//! Self-expression loss over soft-thresholded inner products, evaluated in
//! column bands without ever holding the `n x n` coefficient matrix.
//!
//! With `S_ij = T_θ(u_iᵀu_j)` (zero diagonal) and residuals `E = U - U S`:
//! `L = ‖E‖²_F + ‖S‖²_F`. Writing `Γ = -2 UᵀE + 2S` and `Γ'` for `Γ` masked to
//! pairs above the threshold, the gradients are
//! `dU = 2(E - E S) + U(Γ' + Γ'ᵀ)` and `dθ = -Σ_{i≠j} Γ'_ij sgn(u_iᵀu_j)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{pair_dot, sample_rows, soft_threshold};
use crate::numcore::{axpy, dot, CustomOp, Graph, Matrix, Var};

/// Residual rows `e_j = u_j - Σ_{i≠j} s_ij u_i` (`n x d`) and `Σ s_ij²`.
fn residuals(rows: &Matrix, theta: f64, block: usize) -> (Matrix, f64) {
    let (n, d) = rows.shape();
    let bands: Vec<(Vec<f64>, f64)> = (0..n.div_ceil(block))
        .into_par_iter()
        .map(|band| {
            let (start, end) = (band * block, ((band + 1) * block).min(n));
            let mut out = Vec::with_capacity((end - start) * d);
            let mut penalty = 0.0;
            for j in start..end {
                let uj = rows.row(j);
                let mut e = uj.to_vec();
                for i in 0..n {
                    if i == j {
                        continue;
                    }
                    let s = soft_threshold(pair_dot(rows.row(i), uj, i, j), theta);
                    if s != 0.0 {
                        axpy(-s, rows.row(i), &mut e);
                        penalty += s * s;
                    }
                }
                out.extend_from_slice(&e);
            }
            (out, penalty)
        })
        .collect();
    let mut data = Vec::with_capacity(n * d);
    let mut penalty = 0.0;
    for (rows_out, p) in bands {
        data.extend_from_slice(&rows_out);
        penalty += p;
    }
    (Matrix::from_vec(n, d, data).expect("n x d residuals"), penalty)
}

struct RelationLoss {
    block: usize,
    /// `n x d` residual rows from the forward pass.
    residual_rows: Matrix,
}

impl CustomOp for RelationLoss {
    fn backward(&self, inputs: &[&Matrix], _output: &Matrix, upstream: &Matrix) -> Vec<Matrix> {
        let u = inputs[0];
        let theta = inputs[1].item();
        let rows = sample_rows(u);
        let e = &self.residual_rows;
        let (n, d) = rows.shape();
        let block = self.block;

        let bands: Vec<(Vec<f64>, f64)> = (0..n.div_ceil(block))
            .into_par_iter()
            .map(|band| {
                let (start, end) = (band * block, ((band + 1) * block).min(n));
                let mut grad = Vec::with_capacity((end - start) * d);
                let mut dtheta = 0.0;
                for j in start..end {
                    let uj = rows.row(j);
                    let ej = e.row(j);
                    let mut gj: Vec<f64> = ej.iter().map(|v| 2.0 * v).collect();
                    for i in 0..n {
                        if i == j {
                            continue;
                        }
                        let ui = rows.row(i);
                        let gram = pair_dot(ui, uj, i, j);
                        let s = soft_threshold(gram, theta);
                        if s == 0.0 {
                            continue;
                        }
                        // direct term: -2 Σ_i e_i s_ij
                        axpy(-2.0 * s, e.row(i), &mut gj);
                        let gamma_ij = -2.0 * dot(ui, ej) + 2.0 * s;
                        let gamma_ji = -2.0 * dot(uj, e.row(i)) + 2.0 * s;
                        axpy(gamma_ij + gamma_ji, ui, &mut gj);
                        dtheta -= gamma_ij * gram.signum();
                    }
                    grad.extend_from_slice(&gj);
                }
                (grad, dtheta)
            })
            .collect();

        let scale = upstream.item();
        let mut du_rows = Vec::with_capacity(n * d);
        let mut dtheta = 0.0;
        for (g, t) in bands {
            du_rows.extend_from_slice(&g);
            dtheta += t;
        }
        let du = Matrix::from_vec(n, d, du_rows).expect("n x d gradient").transpose();
        vec![du.scale(scale), Matrix::scalar(dtheta * scale)]
    }
}

/// Graph node for the self-expression loss of `u` (`d x n`) with threshold `theta` (1x1).
pub fn rel_term(g: &mut Graph, u: Var, theta: Var, block: usize) -> Result<Var> {
    let uv = g.value(u);
    if uv.cols() < 2 {
        return Err(Error::InvalidInput("self-expression loss needs n >= 2".into()));
    }
    let th = g.value(theta).item();
    if !(th >= 0.0) {
        return Err(Error::InvalidInput(format!("threshold must be >= 0, got {th}")));
    }
    let block = block.max(1);
    let rows = sample_rows(uv);
    let (residual_rows, penalty) = residuals(&rows, th, block);
    let value = Matrix::scalar(residual_rows.frobenius_sq() + penalty);
    Ok(g.custom(
        &[u, theta],
        value,
        Box::new(RelationLoss {
            block,
            residual_rows,
        }),
    ))
}

/// `Σ_j ‖u_j - Σ_{i≠j} s_ij u_i‖² + Σ_j Σ_{i≠j} s_ij²`.
pub fn loss_rel(u: &Matrix, theta_s: f64, block: usize) -> Result<f64> {
    let mut g = Graph::new();
    let uv = g.leaf(u.clone());
    let tv = g.leaf(Matrix::scalar(theta_s));
    let out = rel_term(&mut g, uv, tv, block)?;
    Ok(g.scalar(out))
}
