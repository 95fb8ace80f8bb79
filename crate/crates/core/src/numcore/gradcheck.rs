//! Finite-difference verification of reverse-mode gradients.

use super::autodiff::{Graph, Var};
use super::param::Param;
use super::rng::RngStream;
use crate::error::Result;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Coordinates sampled per tensor (all of them when the tensor is smaller).
pub const COORDS_PER_TENSOR: usize = 25;

#[derive(Debug, Clone)]
pub struct GradEntry {
    pub name: String,
    pub max_rel_error: f64,
    /// Coordinate `(row, col)` where the worst error occurred.
    pub argmax: (usize, usize),
    pub checked: usize,
}

#[derive(Debug, Clone)]
pub struct GradReport {
    pub entries: Vec<GradEntry>,
    pub tol: f64,
    pub pass: bool,
}

impl GradReport {
    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&GradEntry> {
        self.entries
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

/// `|a - b| / max(1e-8, |a|, |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1e-8f64.max(a.abs()).max(b.abs())
}

fn evaluate<F>(params: &[Param], loss: &F) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.leaf(p.value.clone())).collect();
    let out = loss(&mut g, &vars)?;
    Ok(g.scalar(out))
}

/// Compares reverse-mode gradients of `loss` with central finite differences.
///
/// `loss` receives one leaf per parameter (same order as `params`) and must be
/// a deterministic function of them. Parameter values are restored on return.
pub fn grad_check<F>(params: &mut [Param], loss: F, rng: &mut RngStream, tol: f64) -> Result<GradReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let analytic: Vec<_> = {
        let mut g = Graph::new();
        let vars: Vec<Var> = params.iter().map(|p| g.leaf(p.value.clone())).collect();
        let out = loss(&mut g, &vars)?;
        let mut grads = g.backward(out);
        vars.iter()
            .zip(params.iter())
            .map(|(&v, p)| {
                grads
                    .take(v)
                    .unwrap_or_else(|| crate::numcore::Matrix::zeros(p.shape().0, p.shape().1))
            })
            .collect()
    };

    let mut entries = Vec::with_capacity(params.len());
    for pi in 0..params.len() {
        let total = params[pi].value.len();
        let mut coords: Vec<usize> = (0..total).collect();
        if total > COORDS_PER_TENSOR {
            rng.shuffle(&mut coords);
            coords.truncate(COORDS_PER_TENSOR);
            coords.sort_unstable();
        }
        let cols = params[pi].value.cols();
        let mut worst = (0.0f64, (0, 0));
        for &flat in &coords {
            let original = params[pi].value.as_slice()[flat];
            params[pi].value.as_mut_slice()[flat] = original + FD_STEP;
            let plus = evaluate(params, &loss);
            params[pi].value.as_mut_slice()[flat] = original - FD_STEP;
            let minus = evaluate(params, &loss);
            params[pi].value.as_mut_slice()[flat] = original;
            let numeric = (plus? - minus?) / (2.0 * FD_STEP);
            let err = relative_error(analytic[pi].as_slice()[flat], numeric);
            if err > worst.0 || err.is_nan() {
                worst = (if err.is_nan() { f64::INFINITY } else { err }, (flat / cols, flat % cols));
            }
        }
        entries.push(GradEntry {
            name: params[pi].name.clone(),
            max_rel_error: worst.0,
            argmax: worst.1,
            checked: coords.len(),
        });
    }
    let pass = entries.iter().all(|e| e.max_rel_error <= tol);
    Ok(GradReport { entries, tol, pass })
}
