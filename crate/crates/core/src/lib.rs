//! Closed-form maximum class separation as a fixed classifier head.
//!
//! The crate is split into four parts:
//!
//! - [`separation`]: construction and verification of the `(C-1) x C` matrix
//!   whose columns are unit vectors with pairwise dot product `-1/(C-1)` and
//!   zero sum, plus the fixed logit head built on top of it.
//! - [`nn`]: a small dense network with manual backpropagation, four logit
//!   head variants, SGD with momentum and learning-rate schedules.
//! - [`data`]: seeded Gaussian blobs, long-tailed subsampling, IDX loading and
//!   out-of-distribution set generation.
//! - [`eval`]: accuracy breakdowns, angular Fisher score, confidence scores
//!   (MSP, energy, max logit, Mahalanobis) and threshold metrics.
//!
//! Matrices are `nalgebra::DMatrix<f64>` with one sample per row.

pub mod data;
pub mod error;
pub mod eval;
pub mod nn;
pub mod rng;
pub mod separation;

pub use error::{Error, Result};
pub use separation::{
    build_separation_matrix, head_backward, head_forward, pairwise_cosine_matrix,
    verify_separation, Radius, SeparationMatrix, VerificationReport,
};

pub use nalgebra::{DMatrix, DVector};
