//! Quadratic Bézier paths in parameter space and control-point training.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{check_len, Error, Result};
use crate::loss::{self, TrainLoss};
use crate::nn::{self, EncoderSpec, OutputGrad, ParamVector};

/// `phi_w(t) = (1-t)^2 theta_u + 2t(1-t) w + t^2 theta_o`.
#[derive(Clone, Debug, PartialEq)]
pub struct BezierPath {
    pub theta_u: ParamVector,
    pub w: ParamVector,
    pub theta_o: ParamVector,
}

impl BezierPath {
    pub fn new(theta_u: ParamVector, w: ParamVector, theta_o: ParamVector) -> Result<Self> {
        check_len("bezier control point", theta_u.len(), w.len())?;
        check_len("bezier endpoint", theta_u.len(), theta_o.len())?;
        Ok(Self { theta_u, w, theta_o })
    }

    pub fn point(&self, t: f64) -> Result<ParamVector> {
        bezier_point(self, t)
    }
}

/// Point on the path at `t`. The endpoints are returned bit-exactly.
pub fn bezier_point(path: &BezierPath, t: f64) -> Result<ParamVector> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("bezier parameter {t} outside [0, 1]")));
    }
    check_len("bezier control point", path.theta_u.len(), path.w.len())?;
    check_len("bezier endpoint", path.theta_u.len(), path.theta_o.len())?;
    if t == 0.0 {
        return Ok(path.theta_u.clone());
    }
    if t == 1.0 {
        return Ok(path.theta_o.clone());
    }
    let s = 1.0 - t;
    let (a, b, c) = (s * s, 2.0 * t * s, t * t);
    let values = path
        .theta_u
        .as_slice()
        .iter()
        .zip(path.w.as_slice())
        .zip(path.theta_o.as_slice())
        .map(|((u, w), o)| a * u + b * w + c * o)
        .collect();
    ParamVector::new(values)
}

/// Loss over a batch of retained indices evaluated at a parameter point.
pub trait PathObjective {
    fn loss_grad(&mut self, theta: &ParamVector, batch: &[usize]) -> Result<(f64, ParamVector)>;
}

impl<F> PathObjective for F
where
    F: FnMut(&ParamVector, &[usize]) -> Result<(f64, ParamVector)>,
{
    fn loss_grad(&mut self, theta: &ParamVector, batch: &[usize]) -> Result<(f64, ParamVector)> {
        self(theta, batch)
    }
}

/// Retained loss used to fit the control point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetainedLoss {
    /// Mean squared distance between current and cached original
    /// representations (label free).
    #[default]
    Distill,
    /// Cross-entropy through the class head (uses labels).
    CrossEntropy,
}

/// Retained loss over dataset indices for a network.
pub struct RetainedObjective<'a> {
    spec: &'a EncoderSpec,
    dataset: &'a Dataset,
    loss: RetainedLoss,
    original: HashMap<usize, Vec<f64>>,
}

impl<'a> RetainedObjective<'a> {
    /// Caches the original representations of `indices` for the distill loss.
    pub fn new(
        spec: &'a EncoderSpec,
        dataset: &'a Dataset,
        loss: RetainedLoss,
        theta_o: &ParamVector,
        indices: &[usize],
    ) -> Result<Self> {
        let original = match loss {
            RetainedLoss::Distill => indices
                .iter()
                .map(|&i| Ok((i, nn::represent(spec, theta_o, &dataset.inputs[i])?)))
                .collect::<Result<HashMap<_, _>>>()?,
            RetainedLoss::CrossEntropy => {
                if !spec.has_head() {
                    return Err(Error::Headless);
                }
                HashMap::new()
            }
        };
        Ok(Self {
            spec,
            dataset,
            loss,
            original,
        })
    }
}

impl PathObjective for RetainedObjective<'_> {
    fn loss_grad(&mut self, theta: &ParamVector, batch: &[usize]) -> Result<(f64, ParamVector)> {
        let inputs: Vec<&[f64]> = batch.iter().map(|&i| self.dataset.inputs[i].as_slice()).collect();
        match self.loss {
            RetainedLoss::CrossEntropy => {
                let labels: Vec<usize> = batch.iter().map(|&i| self.dataset.labels[i]).collect();
                loss::batch_loss_grad(self.spec, theta, TrainLoss::CrossEntropy, &inputs, &labels)
            }
            RetainedLoss::Distill => {
                let n = batch.len().max(1) as f64;
                let spec = self.spec;
                let original = &self.original;
                nn::gradient(spec, theta, &inputs, |outs| {
                    let mut total = 0.0;
                    let mut grads = Vec::with_capacity(outs.len());
                    for (out, i) in outs.iter().zip(batch) {
                        let z = original
                            .get(i)
                            .ok_or_else(|| Error::InvalidArgument(format!("index {i} has no cached representation")))?;
                        let diff: Vec<f64> = out.representation.iter().zip(z).map(|(a, b)| a - b).collect();
                        total += diff.iter().map(|d| d * d).sum::<f64>();
                        grads.push(OutputGrad::representation(
                            spec,
                            diff.into_iter().map(|d| 2.0 * d / n).collect(),
                        ));
                    }
                    Ok((total / n, grads))
                })
            }
        }
    }
}

/// Fit the control point by SGD on `E_t[L(phi_w(t))]`.
///
/// Each step draws `t ~ U[0, 1]` and the next batch from a seeded shuffle
/// of `indices`, then moves `w` along `-path_lr * 2t(1-t) * grad L(phi_w(t))`.
/// The endpoints are never touched. Returns the updated path and the mean
/// path loss over the steps (0 for zero steps).
pub fn train_control_point<O, R>(
    path: &BezierPath,
    objective: &mut O,
    indices: &[usize],
    steps: usize,
    batch_size: usize,
    path_lr: f64,
    rng: &mut R,
) -> Result<(BezierPath, f64)>
where
    O: PathObjective + ?Sized,
    R: Rng + ?Sized,
{
    let mut out = path.clone();
    if steps == 0 {
        return Ok((out, 0.0));
    }
    if indices.is_empty() || batch_size == 0 {
        return Err(Error::InvalidArgument("path training needs a nonempty batch".into()));
    }
    let mut order = indices.to_vec();
    order.shuffle(rng);
    let mut cursor = 0;
    let mut total = 0.0;
    for _ in 0..steps {
        let end = (cursor + batch_size).min(order.len());
        let batch = &order[cursor..end];
        cursor = if end == order.len() { 0 } else { end };
        let t: f64 = rng.random();
        let theta_t = bezier_point(&out, t)?;
        let (value, grad) = objective.loss_grad(&theta_t, batch)?;
        if !value.is_finite() {
            return Err(Error::Numeric(format!("path loss {value} at t = {t}")));
        }
        total += value;
        out.w.axpy(-path_lr * 2.0 * t * (1.0 - t), &grad)?;
        if !out.w.is_finite() {
            return Err(Error::Numeric("control point diverged".into()));
        }
    }
    Ok((out, total / steps as f64))
}
