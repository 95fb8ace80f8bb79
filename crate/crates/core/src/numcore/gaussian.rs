//! Elementwise activations and diagonal-Gaussian densities.

use std::f64::consts::PI;

use super::matrix::Matrix;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

/// Row-wise softmax with per-row max subtraction.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

/// `KL(N(mu, diag(exp(log_var))) || N(0, I))`.
pub fn kl_diag_gaussian_to_std(mu: &[f64], log_var: &[f64]) -> f64 {
    assert_eq!(mu.len(), log_var.len(), "kl: length mismatch");
    0.5 * mu
        .iter()
        .zip(log_var)
        .map(|(&m, &lv)| m * m + lv.exp() - lv - 1.0)
        .sum::<f64>()
}

/// Log-density of `x` under `N(mu, diag(exp(log_var)))`.
pub fn diag_gaussian_logpdf(x: &[f64], mu: &[f64], log_var: &[f64]) -> f64 {
    assert!(x.len() == mu.len() && mu.len() == log_var.len(), "logpdf: length mismatch");
    let half_ln_2pi = 0.5 * (2.0 * PI).ln();
    x.iter()
        .zip(mu)
        .zip(log_var)
        .map(|((&x, &m), &lv)| -half_ln_2pi - 0.5 * lv - (x - m).powi(2) / (2.0 * lv.exp()))
        .sum()
}
