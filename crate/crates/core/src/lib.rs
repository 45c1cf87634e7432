//! Desk-scale mechanistic-interpretability laboratory.
//!
//! A miniature two-modality decoder-only transformer is trained from scratch
//! on a synthetic "image + caption" corpus, then dissected with the usual
//! toolkit: cross-modal attention profiles, attention knockout, residual
//! stream activation patching, neighborhood overlap probing and density-peak
//! clustering of hidden states.
//!
//! Module map:
//!
//! - [`geometry`]: exact kNN graphs, intrinsic dimension, kNN density,
//!   density-peak clustering, homogeneity, neighborhood overlap, cosine gap.
//! - [`transformer`]: the model, its traced forward pass and interventions.
//! - [`tasks`]: synthetic corpus generation.
//! - [`training`]: loss, Adam, training loop, gradient checks, evaluation.
//! - [`experiments`]: end-to-end analysis pipelines emitting tabular records.
//! - [`cli`]: the `gatescope` command-line front end.

// `!(x > 0.0)` is used on purpose to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod tasks;
pub mod training;
pub mod transformer;

pub use error::{Error, Result};
