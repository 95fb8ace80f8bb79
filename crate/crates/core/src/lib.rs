//! Deep multi-view subspace clustering.
//!
//! The crate learns a unified representation from several feature views with
//! per-view autoencoders, an information-bottleneck head, and a coding-rate
//! discriminative term, then builds a symmetric self-expressive affinity with a
//! single learnable soft threshold and clusters it spectrally.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod dataio;
pub mod numcore;
pub mod model;
pub mod losses;
pub mod cluster;
pub mod pipeline;

pub use error::{Error, Result};
pub use numcore::{Matrix, Param, RngStream};
