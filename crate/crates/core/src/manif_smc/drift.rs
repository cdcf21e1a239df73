//! Logit drift bound along the connectivity path and an empirical
//! estimate of the parameter-Lipschitz constant it needs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, EncoderSpec, OutputGrad, ParamVector};

use super::bezier::BezierPath;

/// `L_x * ((1-t)^2 ||theta_u - theta_o|| + 2t(1-t) ||w - theta_o||)`.
pub fn logit_drift_bound(path: &BezierPath, t_star: f64, l_x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t_star) {
        return Err(Error::InvalidArgument(format!("t* = {t_star} outside [0, 1]")));
    }
    if !(l_x > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Lipschitz constant {l_x} must be positive"
        )));
    }
    let s = 1.0 - t_star;
    let du = path.theta_u.sub(&path.theta_o)?.norm();
    let dw = path.w.sub(&path.theta_o)?.norm();
    Ok(l_x * (s * s * du + 2.0 * t_star * s * dw))
}

/// Which parameters the Lipschitz probe perturbs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzScope {
    #[default]
    AllParams,
    WeightsOnly,
}

fn inf_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest observed `||g(theta + d, x) - g(theta, x)||_inf / ||d||_2`, where
/// `g` is the final layer output.
///
/// For every probe, `samples` Gaussian directions plus the gradient
/// direction of each output coordinate are tried, each scaled to norm
/// `scale`. The result is a lower estimate of the true constant.
pub fn estimate_lipschitz<R: Rng + ?Sized>(
    spec: &EncoderSpec,
    params: &ParamVector,
    probes: &[Vec<f64>],
    scale: f64,
    samples: usize,
    scope: LipschitzScope,
    rng: &mut R,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidArgument(
            "at least one perturbation sample is required".into(),
        ));
    }
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "perturbation scale {scale} must be positive"
        )));
    }
    let mask: Vec<bool> = match scope {
        LipschitzScope::AllParams => vec![true; params.len()],
        LipschitzScope::WeightsOnly => spec.weight_mask(),
    };
    let restrict = |v: &mut [f64]| {
        for (x, &keep) in v.iter_mut().zip(&mask) {
            if !keep {
                *x = 0.0;
            }
        }
    };
    let ratio = |x: &[f64], base: &[f64], dir: &[f64]| -> Result<Option<f64>> {
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(None);
        }
        let k = scale / norm;
        let moved: Vec<f64> = params.as_slice().iter().zip(dir).map(|(p, d)| p + k * d).collect();
        let moved = ParamVector::new(moved)?;
        let out = nn::forward(spec, &moved, x)?;
        Ok(Some(inf_norm_diff(out.output(), base) / scale))
    };

    let mut best: f64 = 0.0;
    let out_dim = spec.output_dim();
    for x in probes {
        let base = nn::forward(spec, params, x)?.output().to_vec();
        for _ in 0..samples {
            let mut dir: Vec<f64> = (0..params.len()).map(|_| rng.sample(StandardNormal)).collect();
            restrict(&mut dir);
            if let Some(r) = ratio(x, &base, &dir)? {
                best = best.max(r);
            }
        }
        for j in 0..out_dim {
            let mut unit = vec![0.0; out_dim];
            unit[j] = 1.0;
            let (_, g) = nn::gradient(spec, params, &[x.as_slice()], |outs| {
                Ok((outs[0].output()[j], vec![OutputGrad::output(spec, unit)]))
            })?;
            let mut dir = g.into_vec();
            restrict(&mut dir);
            if let Some(r) = ratio(x, &base, &dir)? {
                best = best.max(r);
            }
        }
    }
    Ok(best)
}
