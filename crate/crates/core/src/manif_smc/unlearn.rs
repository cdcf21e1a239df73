//! The ManiF-SMC unlearning loop.
//!
//! Each epoch runs three steps:
//! (A) fit the Bézier control point on batches of the retained neighbor
//!     union, with `theta_u` and `theta_o` as frozen endpoints;
//! (B) take the surrogate `theta_tilde = phi_w(t*)`;
//! (C) compute neighbor centroids and margins under the surrogate and run
//!     SGD on the triplet loss over erased batches, updating `theta_u` only.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, UnlearnSplit};
use crate::error::{Error, Result};
use crate::nn::{self, EncoderSpec, ParamVector};
use crate::seed;

use super::bezier::{bezier_point, train_control_point, BezierPath, RetainedLoss, RetainedObjective};
use super::distance::Distance;
use super::triplet::{margin_from_rep, split_centroids, triplet_loss_grad};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "alpha")]
pub enum MarginMode {
    Fixed(f64),
    Adaptive,
}

/// Model under which the neighbor centroids (triplet targets) are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentroidSource {
    /// The path surrogate `theta_tilde`.
    #[default]
    Surrogate,
    /// The current unlearning model `theta_u`.
    Current,
}

/// Initial value of the control point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlInit {
    #[default]
    Original,
    Unlearned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnlearnConfig {
    pub k: usize,
    pub t_star: f64,
    pub epochs: usize,
    pub lr: f64,
    pub path_lr: f64,
    pub path_steps_per_epoch: usize,
    pub path_batch_size: usize,
    pub erased_batch_size: usize,
    pub distance: Distance,
    pub margin: MarginMode,
    pub centroids: CentroidSource,
    pub control_init: ControlInit,
    pub retained_loss: RetainedLoss,
    pub seed: u64,
}

impl Default for UnlearnConfig {
    fn default() -> Self {
        Self {
            k: 5,
            t_star: 0.5,
            epochs: 10,
            lr: 0.01,
            path_lr: 0.05,
            path_steps_per_epoch: 10,
            path_batch_size: 16,
            erased_batch_size: 16,
            distance: Distance::Euclidean,
            margin: MarginMode::Adaptive,
            centroids: CentroidSource::Surrogate,
            control_init: ControlInit::Original,
            retained_loss: RetainedLoss::Distill,
            seed: 0,
        }
    }
}

impl UnlearnConfig {
    /// Plain ManiF: fixed margin, centroids under the current model, no path.
    pub fn fixed_margin(alpha: f64) -> Self {
        Self {
            margin: MarginMode::Fixed(alpha),
            centroids: CentroidSource::Current,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.t_star) {
            return Err(Error::InvalidArgument(format!("t_star {} outside [0, 1]", self.t_star)));
        }
        if let MarginMode::Fixed(a) = self.margin {
            if !(a >= 0.0) {
                return Err(Error::InvalidArgument(format!("fixed margin {a} must be nonnegative")));
            }
        }
        if !(self.lr > 0.0) || !(self.path_lr > 0.0) {
            return Err(Error::InvalidArgument("learning rates must be positive".into()));
        }
        if self.erased_batch_size == 0 || self.path_batch_size == 0 {
            return Err(Error::InvalidArgument("batch sizes must be positive".into()));
        }
        Ok(())
    }

    fn uses_path(&self) -> bool {
        self.margin == MarginMode::Adaptive || self.centroids == CentroidSource::Surrogate
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub triplet_loss: f64,
    pub path_loss: f64,
    pub mean_margin: f64,
}

#[derive(Clone, Debug)]
pub struct UnlearnReport {
    pub theta_u: ParamVector,
    pub trace: Vec<EpochTrace>,
    /// Path used for the last surrogate, when a path was trained.
    pub last_path: Option<BezierPath>,
    pub rt_seconds: f64,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    rt_seconds: f64,
    param_count: usize,
    theta_u: &'a [f64],
    trace: &'a [EpochTrace],
}

impl UnlearnReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let body = ReportJson {
            rt_seconds: self.rt_seconds,
            param_count: self.theta_u.len(),
            theta_u: self.theta_u.as_slice(),
            trace: &self.trace,
        };
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, &body)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    /// Per-epoch CSV: epoch, triplet_loss, path_loss, mean_margin.
    pub fn write_trace_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.trace {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn stage<T>(epoch: usize, what: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Unlearn {
        epoch,
        stage: what.to_string(),
        source: Box::new(e),
    })
}

/// Run ManiF-SMC from `theta_o`. `split` must have been built against
/// `theta_o` on `dataset`.
pub fn manif_smc_unlearn(
    spec: &EncoderSpec,
    theta_o: &ParamVector,
    dataset: &Dataset,
    split: &UnlearnSplit,
    cfg: &UnlearnConfig,
) -> Result<UnlearnReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut rng = seed::rng(cfg.seed);
    let mut theta_u = theta_o.clone();
    let mut w = theta_o.clone();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut last_path = None;
    let n_erased = split.erased.len();

    let mut objective = if cfg.uses_path() && cfg.epochs > 0 {
        Some(RetainedObjective::new(
            spec,
            dataset,
            cfg.retained_loss,
            theta_o,
            &split.neighbor_union,
        )?)
    } else {
        None
    };

    for epoch in 1..=cfg.epochs {
        // (A) + (B)
        let mut path_loss = 0.0;
        let surrogate = if let Some(obj) = objective.as_mut() {
            if epoch == 1 && cfg.control_init == ControlInit::Unlearned {
                w = theta_u.clone();
            }
            let path = BezierPath::new(theta_u.clone(), w.clone(), theta_o.clone())?;
            let (path, loss) = stage(
                epoch,
                "control point",
                train_control_point(
                    &path,
                    obj,
                    &split.neighbor_union,
                    cfg.path_steps_per_epoch,
                    cfg.path_batch_size,
                    cfg.path_lr,
                    &mut rng,
                ),
            )?;
            path_loss = loss;
            w = path.w.clone();
            let tilde = bezier_point(&path, cfg.t_star)?;
            last_path = Some(path);
            Some(tilde)
        } else {
            None
        };

        // (C) targets and margins, fixed for the epoch
        let target_model = match cfg.centroids {
            CentroidSource::Surrogate => surrogate.as_ref().expect("path trained"),
            CentroidSource::Current => &theta_u,
        };
        let targets = stage(epoch, "centroids", split_centroids(spec, target_model, dataset, split))?;
        let margins: Vec<f64> = match cfg.margin {
            MarginMode::Fixed(a) => vec![a; n_erased],
            MarginMode::Adaptive => {
                let tilde = surrogate.as_ref().expect("path trained");
                stage(
                    epoch,
                    "margins",
                    split
                        .erased
                        .iter()
                        .zip(&split.original_reps)
                        .zip(&targets)
                        .map(|((&i, z), c)| {
                            let f = nn::represent(spec, tilde, &dataset.inputs[i])?;
                            margin_from_rep(&f, z, c, cfg.distance)
                        })
                        .collect::<Result<Vec<_>>>(),
                )?
            }
        };

        let mut order: Vec<usize> = (0..n_erased).collect();
        order.shuffle(&mut rng);
        let mut triplet = 0.0;
        for (b, batch) in order.chunks(cfg.erased_batch_size).enumerate() {
            let (loss, grad) = stage(
                epoch,
                &format!("erased batch {b}"),
                triplet_loss_grad(spec, &theta_u, dataset, split, batch, cfg.distance, &margins, &targets),
            )?;
            triplet += loss;
            theta_u.axpy(-cfg.lr, &grad)?;
            if !theta_u.is_finite() {
                return Err(Error::Unlearn {
                    epoch,
                    stage: format!("erased batch {b}"),
                    source: Box::new(Error::Numeric("parameters diverged".into())),
                });
            }
        }
        let mean_margin = if n_erased == 0 {
            0.0
        } else {
            margins.iter().sum::<f64>() / n_erased as f64
        };
        log::debug!("epoch {epoch}: triplet {triplet:.6} path {path_loss:.6} margin {mean_margin:.6}");
        trace.push(EpochTrace {
            epoch,
            triplet_loss: triplet,
            path_loss,
            mean_margin,
        });
    }

    Ok(UnlearnReport {
        theta_u,
        trace,
        last_path,
        rt_seconds: start.elapsed().as_secs_f64(),
    })
}
