//! Cholesky factorization, log-determinants, and the symmetric eigensolver
//! used by the spectral embedding.

use nalgebra::{DMatrix, SymmetricEigen};

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Symmetry tolerance applied to inputs of the factorizations below.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        a.ensure_symmetric(SYMMETRY_TOL)?;
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > 0.0) {
                return Err(Error::NotPositiveDefinite {
                    pivot: j,
                    value: diag,
                });
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// `ln det(A) = 2 Σ ln L_ii`.
    pub fn logdet(&self) -> f64 {
        let n = self.lower.rows();
        2.0 * (0..n).map(|i| self.lower[(i, i)].ln()).sum::<f64>()
    }

    /// Solves `A X = B` for every column of `B`.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        let l = &self.lower;
        let n = l.rows();
        assert_eq!(b.rows(), n, "Cholesky::solve rhs rows");
        let mut x = b.clone();
        for c in 0..b.cols() {
            // forward: L y = b
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= l[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / l[(i, i)];
            }
            // backward: L^T x = y
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in (i + 1)..n {
                    s -= l[(k, i)] * x[(k, c)];
                }
                x[(i, c)] = s / l[(i, i)];
            }
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        self.solve(&Matrix::identity(self.lower.rows()))
    }
}

/// Natural log-determinant of a symmetric positive-definite matrix.
pub fn cholesky_logdet(a: &Matrix) -> Result<f64> {
    Ok(Cholesky::new(a)?.logdet())
}

/// `I + alpha * U W U^T` where `W = diag(weights)` (all ones when `None`).
pub fn regularized_gram(u: &Matrix, alpha: f64, weights: Option<&[f64]>) -> Matrix {
    let d = u.rows();
    let mut g = Matrix::identity(d);
    for a in 0..d {
        let ra = u.row(a);
        for b in 0..=a {
            let rb = u.row(b);
            let s: f64 = match weights {
                Some(w) => ra.iter().zip(rb).zip(w).map(|((x, y), w)| x * y * w).sum(),
                None => super::matrix::dot(ra, rb),
            };
            g[(a, b)] += alpha * s;
            if a != b {
                g[(b, a)] += alpha * s;
            }
        }
    }
    g
}

/// Eigenpairs returned by [`sym_eig_smallest`].
#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// `n x k`, one unit-norm eigenvector per column.
    pub vectors: Matrix,
}

/// The `k` algebraically smallest eigenpairs of a symmetric matrix.
///
/// Eigenvector signs are fixed so that each column has a nonnegative sum
/// (ties broken by making the largest-magnitude entry positive).
pub fn sym_eig_smallest(a: &Matrix, k: usize) -> Result<EigenPairs> {
    a.ensure_symmetric(SYMMETRY_TOL)?;
    let n = a.rows();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("eigenpair count {k} outside [1, {n}]")));
    }
    let dm = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let eig = SymmetricEigen::try_new(dm, 1e-15, 10_000).ok_or(Error::NoConvergence {
        max_residual: f64::NAN,
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        eig.eigenvalues[x]
            .partial_cmp(&eig.eigenvalues[y])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.cmp(&y))
    });

    let norm = a.frobenius_sq().sqrt();
    let tol = 1e-8 * norm.max(f64::MIN_POSITIVE);
    let mut values = Vec::with_capacity(k);
    let mut vectors = Matrix::zeros(n, k);
    let mut worst = 0.0f64;
    for (slot, &idx) in order.iter().take(k).enumerate() {
        let lambda = eig.eigenvalues[idx];
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= len);
        orient(&mut v);

        let residual = (0..n)
            .map(|i| {
                let av: f64 = a.row(i).iter().zip(&v).map(|(x, y)| x * y).sum();
                (av - lambda * v[i]).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        worst = worst.max(residual);
        values.push(lambda);
        vectors.set_column(slot, &v);
    }
    if !(worst <= tol) {
        return Err(Error::NoConvergence { max_residual: worst });
    }
    Ok(EigenPairs { values, vectors })
}

fn orient(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    let flip = if sum.abs() > 1e-12 {
        sum < 0.0
    } else {
        let (mut best, mut at) = (0.0, 0);
        for (i, x) in v.iter().enumerate() {
            if x.abs() > best + 1e-12 {
                best = x.abs();
                at = i;
            }
        }
        v[at] < 0.0
    };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn logdet_identity_and_diagonal() {
        assert_eq!(cholesky_logdet(&Matrix::identity(3)).unwrap(), 0.0);
        let v = cholesky_logdet(&Matrix::diag(&[2.0, 3.0])).unwrap();
        assert!(close(v, 6f64.ln(), 1e-15));
        assert!(close(v, 1.791759, 1e-6));
    }

    #[test]
    fn logdet_rejects_indefinite_and_asymmetric() {
        let m = Matrix::diag(&[1.0, -1.0]);
        assert!(matches!(
            cholesky_logdet(&m),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
        let mut a = Matrix::identity(2);
        a[(0, 1)] = 0.5;
        assert!(matches!(cholesky_logdet(&a), Err(Error::AsymmetricInput { .. })));
        assert!(matches!(
            cholesky_logdet(&Matrix::zeros(2, 2)),
            Err(Error::NotPositiveDefinite { pivot: 0, .. })
        ));
    }

    #[test]
    fn solve_inverts() {
        let a = Matrix::from_rows(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 2.0]])
            .unwrap();
        let inv = Cholesky::new(&a).unwrap().inverse();
        assert!(a.matmul(&inv).sub(&Matrix::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn eig_trivial_cases() {
        let e = sym_eig_smallest(&Matrix::identity(4), 2).unwrap();
        assert_eq!(e.values.len(), 2);
        assert!(e.values.iter().all(|&v| close(v, 1.0, 1e-14)));

        let e = sym_eig_smallest(&Matrix::diag(&[3.0, 1.0, 2.0]), 1).unwrap();
        assert!(close(e.values[0], 1.0, 1e-14));
        let v = e.vectors.column(0);
        assert!(close(v[1].abs(), 1.0, 1e-14) && close(v[0], 0.0, 1e-14) && close(v[2], 0.0, 1e-14));
    }

    #[test]
    fn eig_rejects_bad_k() {
        assert!(sym_eig_smallest(&Matrix::identity(2), 0).is_err());
        assert!(sym_eig_smallest(&Matrix::identity(2), 3).is_err());
    }

    #[test]
    fn regularized_gram_matches_explicit_product() {
        let u = Matrix::from_rows(&[vec![1.0, 2.0, 0.5], vec![-1.0, 0.3, 2.0]]).unwrap();
        let w = [1.0, 0.0, 1.0];
        let g = regularized_gram(&u, 0.7, Some(&w));
        let explicit = Matrix::identity(2).add(&u.matmul(&Matrix::diag(&w)).matmul_nt(&u).scale(0.7));
        assert!(g.sub(&explicit).max_abs() < 1e-14);
    }
}
