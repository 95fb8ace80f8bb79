//! Soft-thresholded inner products: the self-expressive coefficients and the
//! affinity matrix built from them.

use rayon::prelude::*;

use crate::numcore::{dot, Matrix};

/// `sgn(x) * max(0, |x| - theta)`.
#[inline]
pub fn soft_threshold(x: f64, theta: f64) -> f64 {
    let mag = x.abs() - theta;
    if mag > 0.0 {
        mag.copysign(x)
    } else {
        0.0
    }
}

/// Self-expressive coefficient between two samples.
pub fn relation_coefficient(u_i: &[f64], u_j: &[f64], theta_s: f64) -> f64 {
    assert_eq!(u_i.len(), u_j.len(), "relation_coefficient: length mismatch");
    soft_threshold(dot(u_j, u_i), theta_s)
}

/// Samples as rows: `n x d` copy of a `d x n` representation.
pub(crate) fn sample_rows(u: &Matrix) -> Matrix {
    u.transpose()
}

/// Dense `n x n` affinity `S` with `S_ij = relation_coefficient(u_i, u_j)` off
/// the diagonal and zeros on it.
///
/// Rows are produced in bands of `block` rows. Each entry depends only on the
/// pair of columns, so the result is bitwise symmetric and independent of
/// `block` and of the thread count. Beyond the output, the only allocation is
/// one `n x d` transposed copy of `U`.
pub fn materialize_affinity(u: &Matrix, theta_s: f64, block: usize) -> Matrix {
    let n = u.cols();
    let mut s = Matrix::zeros(n, n);
    fill_affinity(u, theta_s, block, s.as_mut_slice());
    s
}

/// [`materialize_affinity`] writing into a caller-provided row-major `n * n` buffer.
pub fn fill_affinity(u: &Matrix, theta_s: f64, block: usize, out: &mut [f64]) {
    let n = u.cols();
    assert_eq!(out.len(), n * n, "fill_affinity: output must hold n*n entries");
    let block = block.max(1);
    let rows = sample_rows(u);
    out.par_chunks_mut(block * n).enumerate().for_each(|(band, chunk)| {
        let start = band * block;
        for (offset, row_out) in chunk.chunks_mut(n).enumerate() {
            let i = start + offset;
            let ui = rows.row(i);
            for (j, slot) in row_out.iter_mut().enumerate() {
                *slot = if i == j {
                    0.0
                } else {
                    soft_threshold(pair_dot(ui, rows.row(j), i, j), theta_s)
                };
            }
        }
    });
}

/// Inner product evaluated in a canonical argument order so `(i, j)` and
/// `(j, i)` agree bitwise.
#[inline]
pub(crate) fn pair_dot(ui: &[f64], uj: &[f64], i: usize, j: usize) -> f64 {
    if i <= j {
        dot(ui, uj)
    } else {
        dot(uj, ui)
    }
}
