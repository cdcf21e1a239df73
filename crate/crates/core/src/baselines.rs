//! Training and the reference unlearning procedures: retraining from
//! scratch, gradient ascent, and fine-tuning on the retained data.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::loss::{self, TrainLoss};
use crate::metrics;
use crate::mmcr;
use crate::nn::{self, EncoderSpec, ParamVector};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub mmcr_lambda: f64,
    pub loss: TrainLoss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.1,
            batch_size: 16,
            seed: 0,
            mmcr_lambda: 0.0,
            loss: TrainLoss::CrossEntropy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if !(self.mmcr_lambda >= 0.0) {
            return Err(Error::InvalidArgument("mmcr_lambda must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Mean training loss over a batch plus the optional MMCR term on the
/// batch representations grouped by label, with the parameter gradient.
pub fn batch_objective(
    spec: &EncoderSpec,
    params: &ParamVector,
    dataset: &Dataset,
    batch: &[usize],
    loss: TrainLoss,
    mmcr_lambda: f64,
) -> Result<(f64, ParamVector)> {
    let inputs: Vec<&[f64]> = batch.iter().map(|&i| dataset.inputs[i].as_slice()).collect();
    let n = batch.len().max(1) as f64;
    nn::gradient(spec, params, &inputs, |outs| {
        let mut total = 0.0;
        let mut grads = Vec::with_capacity(outs.len());
        for (out, &i) in outs.iter().zip(batch) {
            let (v, mut g) = loss::sample_loss(spec, loss, out, &dataset.inputs[i], dataset.labels[i])?;
            total += v;
            g.representation.iter_mut().for_each(|x| *x /= n);
            if let Some(l) = g.logits.as_mut() {
                l.iter_mut().for_each(|x| *x /= n);
            }
            grads.push(g);
        }
        let mut value = total / n;
        if mmcr_lambda > 0.0 {
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); dataset.class_count];
            for (pos, &i) in batch.iter().enumerate() {
                members[dataset.labels[i]].push(pos);
            }
            members.retain(|m| !m.is_empty());
            let groups: Vec<Vec<Vec<f64>>> = members
                .iter()
                .map(|m| m.iter().map(|&p| outs[p].representation.clone()).collect())
                .collect();
            let term = mmcr::mmcr_regularizer(&groups, mmcr_lambda)?;
            value += term.loss;
            for (m, gs) in members.iter().zip(&term.grads) {
                for (&p, g) in m.iter().zip(gs) {
                    for (a, b) in grads[p].representation.iter_mut().zip(g) {
                        *a += b;
                    }
                }
            }
        }
        Ok((value, grads))
    })
}

/// Seeded initialization used by [`train`].
pub fn initial_params(spec: &EncoderSpec, seed: u64) -> ParamVector {
    nn::init_params(spec, &mut seed::rng(seed))
}

fn sgd_epochs<R: Rng + ?Sized>(
    spec: &EncoderSpec,
    mut params: ParamVector,
    dataset: &Dataset,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(ParamVector, Vec<f64>)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("cannot train on an empty dataset".into()));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        let mut batches = 0;
        for batch in order.chunks(cfg.batch_size) {
            let (v, g) = batch_objective(spec, &params, dataset, batch, cfg.loss, cfg.mmcr_lambda)?;
            params.axpy(-cfg.lr, &g)?;
            if !params.is_finite() {
                return Err(Error::Numeric(format!("training diverged in epoch {epoch}")));
            }
            total += v;
            batches += 1;
        }
        trace.push(total / batches as f64);
    }
    Ok((params, trace))
}

/// Seeded minibatch SGD from a fresh initialization, returning the
/// parameters and the per-epoch mean batch loss.
pub fn train_with_trace(spec: &EncoderSpec, dataset: &Dataset, cfg: &TrainConfig) -> Result<(ParamVector, Vec<f64>)> {
    let mut rng = seed::rng(cfg.seed);
    let init = nn::init_params(spec, &mut rng);
    sgd_epochs(spec, init, dataset, cfg, &mut rng)
}

pub fn train(spec: &EncoderSpec, dataset: &Dataset, cfg: &TrainConfig) -> Result<ParamVector> {
    Ok(train_with_trace(spec, dataset, cfg)?.0)
}

/// Train from scratch on the retained indices only.
pub fn retrain_from_scratch(
    spec: &EncoderSpec,
    dataset: &Dataset,
    retained: &[usize],
    cfg: &TrainConfig,
) -> Result<ParamVector> {
    if retained.is_empty() {
        return Err(Error::InvalidArgument("retained set is empty".into()));
    }
    train(spec, &dataset.subset(retained), cfg)
}

/// Continue SGD from `theta_u` on the retained data (uses labels).
pub fn fine_tune(
    spec: &EncoderSpec,
    theta_u: &ParamVector,
    retained: &Dataset,
    cfg: &TrainConfig,
) -> Result<ParamVector> {
    if retained.is_empty() {
        return Err(Error::InvalidArgument("retained set is empty".into()));
    }
    let mut rng = seed::rng(cfg.seed);
    Ok(sgd_epochs(spec, theta_u.clone(), retained, cfg, &mut rng)?.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub steps: usize,
    pub lr: f64,
    /// Stop once erased-set accuracy drops below chance (classifiers only).
    pub early_stop: bool,
    pub loss: TrainLoss,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            steps: 10,
            lr: 1.0,
            early_stop: true,
            loss: TrainLoss::CrossEntropy,
        }
    }
}

/// Repeated `theta <- theta + lr * grad L(theta)`, checking `stop` after
/// every step.
pub fn ascend<L, S>(theta: &ParamVector, steps: usize, lr: f64, mut objective: L, mut stop: S) -> Result<ParamVector>
where
    L: FnMut(&ParamVector) -> Result<(f64, ParamVector)>,
    S: FnMut(&ParamVector) -> Result<bool>,
{
    let mut out = theta.clone();
    for step in 0..steps {
        let (_, g) = objective(&out)?;
        out.axpy(lr, &g)?;
        if !out.is_finite() {
            return Err(Error::Numeric(format!("gradient ascent diverged at step {step}")));
        }
        if stop(&out)? {
            log::debug!("gradient ascent stopped after {} steps", step + 1);
            break;
        }
    }
    Ok(out)
}

/// Gradient ascent on the full-batch training loss of the erased set.
pub fn gradient_ascent_unlearn(
    spec: &EncoderSpec,
    theta_o: &ParamVector,
    erased: &Dataset,
    cfg: &GaConfig,
) -> Result<ParamVector> {
    if erased.is_empty() {
        return Err(Error::InvalidArgument("erased set is empty".into()));
    }
    if !(cfg.lr > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "learning rate {} must be positive",
            cfg.lr
        )));
    }
    let all: Vec<usize> = (0..erased.len()).collect();
    let chance = 1.0 / erased.class_count as f64;
    let check = cfg.early_stop && cfg.loss == TrainLoss::CrossEntropy && spec.has_head();
    ascend(
        theta_o,
        cfg.steps,
        cfg.lr,
        |theta| batch_objective(spec, theta, erased, &all, cfg.loss, 0.0),
        |theta| Ok(check && metrics::accuracy(spec, theta, erased)? < chance),
    )
}
