//! Representation-space machine unlearning for small dense encoders.
//!
//! The crate trains feedforward encoders, removes the influence of an
//! erased subset by pushing erased representations toward the centroid of
//! their retained neighbors (with margins estimated on a Bézier path in
//! parameter space), compares against retraining, gradient ascent and
//! fine-tuning, and evaluates the results. A separate module computes
//! expected retraining costs of sharded and sliced training.

// `!(x > 0.0)` style checks are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod loss;
pub mod manif_smc;
pub mod metrics;
pub mod mmcr;
pub mod nn;
pub mod seed;
pub mod sisa;

pub use error::{Error, Result};
