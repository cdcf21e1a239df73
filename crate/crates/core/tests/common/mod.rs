#![allow(dead_code)]

pub mod experiment;
pub mod grad;

use manifold_unlearn::datagen::Dataset;
use manifold_unlearn::nn::{self, Activation, EncoderSpec, ParamVector};
use manifold_unlearn::seed;
use rand::Rng;

/// Central-difference gradient of `f` at `theta`.
pub fn numeric_grad(theta: &ParamVector, h: f64, mut f: impl FnMut(&ParamVector) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(theta.len());
    let mut probe = theta.clone();
    for i in 0..theta.len() {
        let x = theta[i];
        probe.as_mut_slice()[i] = x + h;
        let up = f(&probe);
        probe.as_mut_slice()[i] = x - h;
        let down = f(&probe);
        probe.as_mut_slice()[i] = x;
        out.push((up - down) / (2.0 * h));
    }
    out
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Small tanh net with a head: input `d_in`, one or two hidden layers,
/// `classes` outputs.
pub fn random_net(case: u64, d_in: usize, classes: usize) -> (EncoderSpec, ParamVector) {
    let mut rng = seed::rng(seed::sub_seed(case, 100));
    let mut layers = vec![d_in];
    for _ in 0..rng.random_range(1..=2) {
        layers.push(rng.random_range(2..=5));
    }
    layers.push(classes);
    let spec = EncoderSpec::uniform(layers, Activation::Tanh).unwrap();
    let params = nn::init_params(&spec, &mut rng);
    (spec, params)
}

pub fn random_dataset(case: u64, n: usize, dim: usize, classes: usize) -> Dataset {
    let mut rng = seed::rng(seed::sub_seed(case, 200));
    let inputs = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    let labels = (0..n).map(|i| i % classes).collect();
    Dataset::new(inputs, labels, classes).unwrap()
}

/// Same parameters moved by a seeded uniform perturbation of size `scale`.
pub fn jitter(params: &ParamVector, scale: f64, stream: u64) -> ParamVector {
    let mut rng = seed::rng(stream);
    ParamVector::new(
        params
            .as_slice()
            .iter()
            .map(|p| p + rng.random_range(-scale..scale))
            .collect(),
    )
    .unwrap()
}
