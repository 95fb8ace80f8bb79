//! Coding rates `½ ln det(I + α U W Uᵀ)` as differentiable graph nodes.

use crate::error::{Error, Result};
use crate::numcore::{regularized_gram, Cholesky, CustomOp, Graph, Matrix, Var};

/// Backward for `ln det(I + α U W Uᵀ)`: `dU = 2α (I + α U W Uᵀ)⁻¹ U W`.
struct LogDetGram {
    alpha: f64,
    weights: Option<Vec<f64>>,
    inverse: Matrix,
}

impl CustomOp for LogDetGram {
    fn backward(&self, inputs: &[&Matrix], _output: &Matrix, upstream: &Matrix) -> Vec<Matrix> {
        let u = inputs[0];
        let mut grad = self.inverse.matmul(u);
        if let Some(w) = &self.weights {
            for r in 0..grad.rows() {
                for (v, wi) in grad.row_mut(r).iter_mut().zip(w) {
                    *v *= wi;
                }
            }
        }
        vec![grad.scale(2.0 * self.alpha * upstream.item())]
    }
}

/// Graph node for `ln det(I_d + alpha * U diag(weights) Uᵀ)`.
pub fn logdet_gram(g: &mut Graph, u: Var, alpha: f64, weights: Option<Vec<f64>>) -> Result<Var> {
    let gram = regularized_gram(g.value(u), alpha, weights.as_deref());
    let chol = Cholesky::new(&gram)?;
    let value = Matrix::scalar(chol.logdet());
    let op = LogDetGram {
        alpha,
        weights,
        inverse: chol.inverse(),
    };
    Ok(g.custom(&[u], value, Box::new(op)))
}

fn check_eps(epsilon_sq: f64) -> Result<()> {
    if !(epsilon_sq > 0.0) || !epsilon_sq.is_finite() {
        return Err(Error::InvalidInput(format!("epsilon_sq must be positive, got {epsilon_sq}")));
    }
    Ok(())
}

/// `R(U) = ½ ln det(I + d/(n ε²) U Uᵀ)`.
pub fn coding_rate_global_term(g: &mut Graph, u: Var, epsilon_sq: f64) -> Result<Var> {
    check_eps(epsilon_sq)?;
    let (d, n) = g.value(u).shape();
    let ld = logdet_gram(g, u, d as f64 / (n as f64 * epsilon_sq), None)?;
    Ok(g.scale(ld, 0.5))
}

pub(crate) fn check_labels(labels: &[usize], n: usize, k: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::shape("partition labels", n, labels.len()));
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
        return Err(Error::BadLabel {
            index,
            label: label as i64,
            k,
        });
    }
    Ok(())
}

/// `Rᶜ(U, Π) = Σ_k n_k/(2n) ln det(I + d/(n_k ε²) U Πᵏ Uᵀ)`; empty clusters add 0.
///
/// The partition is a constant of the graph; no gradient flows to the labels.
pub fn coding_rate_local_term(
    g: &mut Graph,
    u: Var,
    labels: &[usize],
    k: usize,
    epsilon_sq: f64,
) -> Result<Var> {
    check_eps(epsilon_sq)?;
    let (d, n) = g.value(u).shape();
    check_labels(labels, n, k)?;
    let mut terms = Vec::with_capacity(k);
    for cluster in 0..k {
        let mask: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l == cluster))).collect();
        let count = mask.iter().sum::<f64>();
        if count == 0.0 {
            continue;
        }
        // A full mask reduces to the unweighted product (identical rounding to R(U)).
        let weights = (count < n as f64).then_some(mask);
        let ld = logdet_gram(g, u, d as f64 / (count * epsilon_sq), weights)?;
        terms.push(g.scale(ld, count / (2.0 * n as f64)));
    }
    Ok(if terms.is_empty() {
        g.leaf(Matrix::scalar(0.0))
    } else {
        g.sum_of(&terms)
    })
}

/// `-R(U) + Rᶜ(U, Π)`.
pub fn dis_term(g: &mut Graph, u: Var, labels: &[usize], k: usize, epsilon_sq: f64) -> Result<Var> {
    let local = coding_rate_local_term(g, u, labels, k, epsilon_sq)?;
    let global = coding_rate_global_term(g, u, epsilon_sq)?;
    Ok(g.sub(local, global))
}

/// Global coding rate of a `d x n` representation.
pub fn coding_rate_global(u: &Matrix, epsilon_sq: f64) -> Result<f64> {
    let mut g = Graph::new();
    let uv = g.leaf(u.clone());
    let out = coding_rate_global_term(&mut g, uv, epsilon_sq)?;
    Ok(g.scalar(out))
}

/// Sum of per-cluster coding rates under the partition given by `labels`.
pub fn coding_rate_local(u: &Matrix, labels: &[usize], k: usize, epsilon_sq: f64) -> Result<f64> {
    let mut g = Graph::new();
    let uv = g.leaf(u.clone());
    let out = coding_rate_local_term(&mut g, uv, labels, k, epsilon_sq)?;
    Ok(g.scalar(out))
}

/// Discriminative loss `Rᶜ(U, Π) - R(U)`.
pub fn loss_dis(u: &Matrix, labels: &[usize], k: usize, epsilon_sq: f64) -> Result<f64> {
    let mut g = Graph::new();
    let uv = g.leaf(u.clone());
    let out = dis_term(&mut g, uv, labels, k, epsilon_sq)?;
    Ok(g.scalar(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{cholesky_logdet, grad_check, Param, RngStream};

    #[test]
    fn zero_representation_has_zero_rates() {
        let u = Matrix::zeros(3, 5);
        assert_eq!(coding_rate_global(&u, 0.5).unwrap(), 0.0);
        assert_eq!(coding_rate_local(&u, &[0, 1, 1, 0, 2], 3, 0.5).unwrap(), 0.0);
        assert_eq!(loss_dis(&u, &[0, 1, 1, 0, 2], 3, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn scalar_examples() {
        let u = Matrix::scalar(1.0);
        let r = coding_rate_global(&u, 0.5).unwrap();
        assert!((r - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((r - 0.549306).abs() < 1e-6);

        let u = Matrix::from_rows(&[vec![2.0, 1.0]]).unwrap();
        let local = coding_rate_local(&u, &[0, 1], 2, 0.5).unwrap();
        assert!((local - 0.75 * 3f64.ln()).abs() < 1e-15);
        assert!((local - 0.823959).abs() < 1e-6);
        let dis = loss_dis(&u, &[0, 1], 2, 0.5).unwrap();
        assert!((dis - (0.75 * 3f64.ln() - 0.5 * 6f64.ln())).abs() < 1e-15);
        assert!((dis + 0.071921).abs() < 1e-6);
    }

    #[test]
    fn single_cluster_local_equals_global() {
        let u = RngStream::new(1, 0).normal_matrix(4, 9, 1.0);
        let labels = vec![0; 9];
        let global = coding_rate_global(&u, 0.5).unwrap();
        assert_eq!(coding_rate_local(&u, &labels, 1, 0.5).unwrap(), global);
        assert_eq!(coding_rate_local(&u, &labels, 3, 0.5).unwrap(), global);
        assert_eq!(loss_dis(&u, &labels, 1, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn global_rate_matches_sample_space_determinant() {
        let u = RngStream::new(2, 0).normal_matrix(3, 7, 1.0);
        let alpha = 3.0 / (7.0 * 0.5);
        let dual = Matrix::identity(7).add(&u.matmul_tn(&u).scale(alpha));
        let via_dual = 0.5 * cholesky_logdet(&dual).unwrap();
        assert!((coding_rate_global(&u, 0.5).unwrap() - via_dual).abs() < 1e-8);
    }

    #[test]
    fn bad_inputs() {
        let u = Matrix::zeros(2, 3);
        assert!(matches!(coding_rate_local(&u, &[0, 3, 1], 3, 0.5), Err(Error::BadLabel { .. })));
        assert!(coding_rate_local(&u, &[0, 1], 3, 0.5).is_err());
        assert!(coding_rate_global(&u, 0.0).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = RngStream::new(3, 0);
        for seed in 0..10 {
            let mut data = RngStream::new(100 + seed, 0);
            let labels: Vec<usize> = (0..12).map(|_| data.below(3)).collect();
            let mut params = vec![Param::new("u", data.normal_matrix(3, 12, 1.0))];
            let report = grad_check(
                &mut params,
                |g, v| dis_term(g, v[0], &labels, 3, 0.5),
                &mut rng,
                1e-4,
            )
            .unwrap();
            assert!(report.pass, "{report:?}");
        }
    }
}
