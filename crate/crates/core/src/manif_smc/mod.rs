//! Manifold forgetting with self mode connectivity.
//!
//! Erased samples are pulled toward the centroid of their nearest retained
//! neighbors and pushed away from their original representations through a
//! margin triplet loss. The per-sample margin comes from a surrogate model
//! sampled on a quadratic Bézier path between the unlearning model and the
//! original model, fitted on the retained neighborhood only.

mod bezier;
mod distance;
mod drift;
mod triplet;
mod unlearn;

pub use bezier::{bezier_point, train_control_point, BezierPath, PathObjective, RetainedLoss, RetainedObjective};
pub use distance::{dist, Distance};
pub use drift::{estimate_lipschitz, logit_drift_bound, LipschitzScope};
pub use triplet::{
    adaptive_margin, centroid, margin_satisfied, push_pull_objectives, split_centroids, triplet_loss,
    triplet_loss_grad, triplet_term,
};
pub use unlearn::{
    manif_smc_unlearn, CentroidSource, ControlInit, EpochTrace, MarginMode, UnlearnConfig, UnlearnReport,
};
