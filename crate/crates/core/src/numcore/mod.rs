//! Numerical foundation: dense matrices, factorizations, Gaussian helpers,
//! seeded random streams, reverse-mode autodiff, and the Adam optimizer.

mod autodiff;
mod gaussian;
mod gradcheck;
mod linalg;
mod matrix;
mod param;
mod rng;

pub use autodiff::{CustomOp, Gradients, Graph, Var};
pub use gaussian::{
    diag_gaussian_logpdf, kl_diag_gaussian_to_std, sigmoid, softmax_rows, softplus, softplus_inv,
};
pub use gradcheck::{grad_check, relative_error, GradEntry, GradReport, COORDS_PER_TENSOR, FD_STEP};
pub use linalg::{cholesky_logdet, regularized_gram, sym_eig_smallest, Cholesky, EigenPairs, SYMMETRY_TOL};
pub use matrix::Matrix;
pub(crate) use matrix::{axpy, dot};
pub use param::{adam_step, AdamConfig, Param};
pub use rng::{RngCursor, RngStream};
