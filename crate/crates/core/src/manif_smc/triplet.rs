//! Push/pull objectives, neighbor centroids, the margin triplet loss and
//! adaptive margins.

use crate::datagen::{Dataset, UnlearnSplit};
use crate::error::{check_len, Error, Result};
use crate::nn::{self, EncoderSpec, OutputGrad, ParamVector};

use super::distance::Distance;

/// Mean representation of `neighbors` under `params`.
pub fn centroid(spec: &EncoderSpec, params: &ParamVector, neighbors: &[&[f64]]) -> Result<Vec<f64>> {
    if neighbors.is_empty() {
        return Err(Error::InvalidArgument("centroid of an empty neighbor set".into()));
    }
    let mut sum = vec![0.0; spec.representation_dim()];
    for x in neighbors {
        let r = nn::represent(spec, params, x)?;
        for (s, v) in sum.iter_mut().zip(&r) {
            *s += v;
        }
    }
    let n = neighbors.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// Neighbor centroid of every erased sample under `params`, aligned with
/// `split.erased`. Each retained neighbor is embedded once.
pub fn split_centroids(
    spec: &EncoderSpec,
    params: &ParamVector,
    dataset: &Dataset,
    split: &UnlearnSplit,
) -> Result<Vec<Vec<f64>>> {
    let reps = split
        .neighbor_union
        .iter()
        .map(|&j| nn::represent(spec, params, &dataset.inputs[j]))
        .collect::<Result<Vec<_>>>()?;
    let lookup = |j: usize| {
        let at = split
            .neighbor_union
            .binary_search(&j)
            .expect("neighbor union covers every neighbor set");
        &reps[at]
    };
    split
        .neighbor_sets
        .iter()
        .map(|set| {
            if set.is_empty() {
                return Err(Error::InvalidArgument("empty neighbor set".into()));
            }
            let mut sum = vec![0.0; spec.representation_dim()];
            for &j in set {
                for (s, v) in sum.iter_mut().zip(lookup(j)) {
                    *s += v;
                }
            }
            let n = set.len() as f64;
            Ok(sum.into_iter().map(|s| s / n).collect())
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Push term `sum ||f(x_i) - z_io||^2` and pull term `sum ||f(x_i) - c_i||^2`,
/// with centroids taken under the same `params`. Diagnostic only.
pub fn push_pull_objectives(
    spec: &EncoderSpec,
    params: &ParamVector,
    dataset: &Dataset,
    split: &UnlearnSplit,
) -> Result<(f64, f64)> {
    let centroids = split_centroids(spec, params, dataset, split)?;
    let mut push = 0.0;
    let mut pull = 0.0;
    for ((&i, z), c) in split.erased.iter().zip(&split.original_reps).zip(&centroids) {
        let f = nn::represent(spec, params, &dataset.inputs[i])?;
        push += sq_dist(&f, z);
        pull += sq_dist(&f, c);
    }
    Ok((push, pull))
}

/// One hinge term `[dist(f, target) - dist(f, z) + alpha]_+` and its
/// gradient with respect to `f` (zero when the hinge is inactive).
pub fn triplet_term(f: &[f64], target: &[f64], z: &[f64], alpha: f64, metric: Distance) -> Result<(f64, Vec<f64>)> {
    let (dc, gc) = metric.eval_grad(f, target)?;
    let (dz, gz) = metric.eval_grad(f, z)?;
    let s = dc - dz + alpha;
    if s > 0.0 {
        Ok((s, gc.iter().zip(&gz).map(|(a, b)| a - b).collect()))
    } else {
        Ok((0.0, vec![0.0; f.len()]))
    }
}

/// Whether `f` sits at least `alpha` closer to `target` than to `z`.
pub fn margin_satisfied(f: &[f64], target: &[f64], z: &[f64], alpha: f64, metric: Distance) -> Result<bool> {
    Ok(metric.eval(f, target)? + alpha <= metric.eval(f, z)?)
}

fn check_coverage(split: &UnlearnSplit, margins: &[f64], targets: &[Vec<f64>]) -> Result<()> {
    check_len("margins", split.erased.len(), margins.len())?;
    check_len("targets", split.erased.len(), targets.len())?;
    if let Some(a) = margins.iter().find(|a| !(**a >= 0.0)) {
        return Err(Error::InvalidArgument(format!("margin {a} must be nonnegative")));
    }
    Ok(())
}

/// Triplet loss over every erased sample. `margins` and `targets` are
/// aligned with `split.erased`.
pub fn triplet_loss(
    spec: &EncoderSpec,
    params: &ParamVector,
    dataset: &Dataset,
    split: &UnlearnSplit,
    metric: Distance,
    margins: &[f64],
    targets: &[Vec<f64>],
) -> Result<f64> {
    check_coverage(split, margins, targets)?;
    let mut total = 0.0;
    for p in 0..split.erased.len() {
        let f = nn::represent(spec, params, &dataset.inputs[split.erased[p]])?;
        total += triplet_term(&f, &targets[p], &split.original_reps[p], margins[p], metric)?.0;
    }
    Ok(total)
}

/// Triplet loss summed over the erased positions in `batch`, with its
/// gradient. Targets and margins are treated as constants.
#[allow(clippy::too_many_arguments)]
pub fn triplet_loss_grad(
    spec: &EncoderSpec,
    params: &ParamVector,
    dataset: &Dataset,
    split: &UnlearnSplit,
    batch: &[usize],
    metric: Distance,
    margins: &[f64],
    targets: &[Vec<f64>],
) -> Result<(f64, ParamVector)> {
    check_coverage(split, margins, targets)?;
    let inputs: Vec<&[f64]> = batch
        .iter()
        .map(|&p| dataset.inputs[split.erased[p]].as_slice())
        .collect();
    nn::gradient(spec, params, &inputs, |outs| {
        let mut total = 0.0;
        let mut grads = Vec::with_capacity(outs.len());
        for (out, &p) in outs.iter().zip(batch) {
            let (v, g) = triplet_term(
                &out.representation,
                &targets[p],
                &split.original_reps[p],
                margins[p],
                metric,
            )?;
            total += v;
            grads.push(OutputGrad::representation(spec, g));
        }
        Ok((total, grads))
    })
}

/// `[dist(f_tilde(x), z_io) - dist(f_tilde(x), c_tilde)]_+`.
pub fn adaptive_margin(
    spec: &EncoderSpec,
    theta_tilde: &ParamVector,
    x: &[f64],
    z_io: &[f64],
    c_tilde: &[f64],
    metric: Distance,
) -> Result<f64> {
    let f = nn::represent(spec, theta_tilde, x)?;
    margin_from_rep(&f, z_io, c_tilde, metric)
}

pub(crate) fn margin_from_rep(f: &[f64], z_io: &[f64], c_tilde: &[f64], metric: Distance) -> Result<f64> {
    Ok((metric.eval(f, z_io)? - metric.eval(f, c_tilde)?).max(0.0))
}
