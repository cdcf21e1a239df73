//! Supervised training losses shared by training, baselines and metrics.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::nn::{self, EncoderSpec, ForwardResult, OutputGrad, ParamVector};

/// Training objective of the original model.
///
/// `RepresentationMse` is a reconstruction objective: the final layer output
/// is regressed onto the input itself, so the final width must equal the
/// input width.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainLoss {
    #[default]
    CrossEntropy,
    RepresentationMse,
}

/// Softmax cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "label {label} outside {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + max - logits[label];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Mean squared error over coordinates and its gradient wrt `pred`.
pub fn mean_squared_error(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_len("squared error", target.len(), pred.len())?;
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

/// Loss of a single sample and its gradient with respect to the outputs.
pub fn sample_loss(
    spec: &EncoderSpec,
    loss: TrainLoss,
    out: &ForwardResult,
    input: &[f64],
    label: usize,
) -> Result<(f64, OutputGrad)> {
    match loss {
        TrainLoss::CrossEntropy => {
            let logits = out.logits.as_ref().ok_or(Error::Headless)?;
            let (v, g) = cross_entropy(logits, label)?;
            Ok((v, OutputGrad::output(spec, g)))
        }
        TrainLoss::RepresentationMse => {
            let (v, g) = mean_squared_error(out.output(), input)?;
            Ok((v, OutputGrad::output(spec, g)))
        }
    }
}

/// Mean loss over a batch and its parameter gradient.
pub fn batch_loss_grad(
    spec: &EncoderSpec,
    params: &ParamVector,
    loss: TrainLoss,
    inputs: &[&[f64]],
    labels: &[usize],
) -> Result<(f64, ParamVector)> {
    check_len("batch labels", inputs.len(), labels.len())?;
    let n = inputs.len().max(1) as f64;
    nn::gradient(spec, params, inputs, |outs| {
        let mut total = 0.0;
        let mut grads = Vec::with_capacity(outs.len());
        for ((out, x), &y) in outs.iter().zip(inputs).zip(labels) {
            let (v, mut g) = sample_loss(spec, loss, out, x, y)?;
            total += v;
            g.representation.iter_mut().for_each(|v| *v /= n);
            if let Some(l) = g.logits.as_mut() {
                l.iter_mut().for_each(|v| *v /= n);
            }
            grads.push(g);
        }
        Ok((total / n, grads))
    })
}

/// Per-sample losses without gradients.
pub fn per_sample_losses(
    spec: &EncoderSpec,
    params: &ParamVector,
    loss: TrainLoss,
    inputs: &[Vec<f64>],
    labels: &[usize],
) -> Result<Vec<f64>> {
    check_len("labels", inputs.len(), labels.len())?;
    inputs
        .iter()
        .zip(labels)
        .map(|(x, &y)| {
            let out = nn::forward(spec, params, x)?;
            Ok(sample_loss(spec, loss, &out, x, y)?.0)
        })
        .collect()
}
