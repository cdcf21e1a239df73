//! Dense feedforward encoders with exact reverse-mode gradients.
//!
//! Parameters live in a single flat [`ParamVector`]. The layout is
//! layer-major: for each affine layer the `out x in` weight matrix comes
//! first in row-major order (entry `j * in + i` connects input unit `i` to
//! output unit `j`), followed by the `out` biases.
//!
//! The representation is the output of one designated layer (the last
//! hidden layer by default). When that layer is not the final one, the
//! final layer output is reported as the logits of a class head.

use std::io::{Read, Write};
use std::ops::Index;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    /// ReLU takes the subgradient 0 at the kink.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// Layer shapes and activations of a feedforward encoder.
///
/// `layers` lists unit counts from the input through to the final layer;
/// `activations` holds one entry per affine layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub layers: Vec<usize>,
    pub activations: Vec<Activation>,
    /// Index into `layers` whose output is the representation. Defaults to
    /// the last hidden layer, or the final layer for single-layer nets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation_layer: Option<usize>,
}

impl EncoderSpec {
    pub fn new(layers: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        let spec = Self {
            layers,
            activations,
            representation_layer: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same activation on every layer.
    pub fn uniform(layers: Vec<usize>, activation: Activation) -> Result<Self> {
        let n = layers.len().saturating_sub(1);
        Self::new(layers, vec![activation; n])
    }

    pub fn with_representation_layer(mut self, layer: usize) -> Result<Self> {
        self.representation_layer = Some(layer);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() < 2 {
            return Err(Error::InvalidSpec("at least two layer sizes are required".into()));
        }
        if self.layers.contains(&0) {
            return Err(Error::InvalidSpec("layer sizes must be positive".into()));
        }
        if self.activations.len() != self.layers.len() - 1 {
            return Err(Error::InvalidSpec(format!(
                "{} activations for {} affine layers",
                self.activations.len(),
                self.layers.len() - 1
            )));
        }
        if let Some(r) = self.representation_layer {
            if r == 0 || r > self.depth() {
                return Err(Error::InvalidSpec(format!(
                    "representation layer {r} outside 1..={}",
                    self.depth()
                )));
            }
        }
        Ok(())
    }

    /// Number of affine layers.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0]
    }

    pub fn representation_index(&self) -> usize {
        match self.representation_layer {
            Some(r) => r,
            None if self.depth() >= 2 => self.depth() - 1,
            None => self.depth(),
        }
    }

    pub fn representation_dim(&self) -> usize {
        self.layers[self.representation_index()]
    }

    pub fn has_head(&self) -> bool {
        self.representation_index() < self.depth()
    }

    /// Width of the final layer (the class count when a head exists).
    pub fn output_dim(&self) -> usize {
        *self.layers.last().expect("validated spec")
    }

    /// Offset of each layer's weights and biases within the flat vector.
    fn layer_offsets(&self) -> Vec<(usize, usize)> {
        let mut offsets = Vec::with_capacity(self.depth());
        let mut at = 0;
        for w in self.layers.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            offsets.push((at, at + fan_in * fan_out));
            at += fan_in * fan_out + fan_out;
        }
        offsets
    }

    /// Offsets of weight entries, used to separate weights from biases.
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(param_count(self));
        for w in self.layers.windows(2) {
            mask.extend(std::iter::repeat_n(true, w[0] * w[1]));
            mask.extend(std::iter::repeat_n(false, w[1]));
        }
        mask
    }
}

pub fn param_count(spec: &EncoderSpec) -> usize {
    spec.layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Flat model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty parameter vector".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("parameter {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &ParamVector, b: f64) -> Result<ParamVector> {
        check_len("parameter combination", self.len(), other.len())?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(x, y)| a * x + b * y).collect()))
    }

    pub fn add(&self, other: &ParamVector) -> Result<ParamVector> {
        self.lincomb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        self.lincomb(1.0, other, -1.0)
    }

    pub fn scale(&self, s: f64) -> ParamVector {
        Self(self.0.iter().map(|x| s * x).collect())
    }

    /// `self += s * other` in place.
    pub fn axpy(&mut self, s: f64, other: &ParamVector) -> Result<()> {
        check_len("parameter update", self.len(), other.len())?;
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            *x += s * y;
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Length header (u64) followed by little-endian f64 values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.len());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for v in &self.0 {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Truncated("parameter header".into()));
        }
        let n = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
        let body = &bytes[8..];
        if body.len() != n.saturating_mul(8) {
            return Err(Error::Truncated(format!(
                "expected {n} parameters, found {} bytes",
                body.len()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::new(values)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Structured weights of one affine layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights {
    /// `out x in`, row-major.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

pub fn flatten(spec: &EncoderSpec, layers: &[LayerWeights]) -> Result<ParamVector> {
    check_len("layer count", spec.depth(), layers.len())?;
    let mut values = Vec::with_capacity(param_count(spec));
    for (w, layer) in spec.layers.windows(2).zip(layers) {
        check_len("layer weights", w[0] * w[1], layer.weights.len())?;
        check_len("layer biases", w[1], layer.biases.len())?;
        values.extend_from_slice(&layer.weights);
        values.extend_from_slice(&layer.biases);
    }
    ParamVector::new(values)
}

pub fn unflatten(spec: &EncoderSpec, params: &ParamVector) -> Result<Vec<LayerWeights>> {
    check_len("parameter count", param_count(spec), params.len())?;
    let p = params.as_slice();
    Ok(spec
        .layers
        .windows(2)
        .zip(spec.layer_offsets())
        .map(|(w, (wo, bo))| LayerWeights {
            weights: p[wo..wo + w[0] * w[1]].to_vec(),
            biases: p[bo..bo + w[1]].to_vec(),
        })
        .collect())
}

/// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
pub fn init_params<R: Rng + ?Sized>(spec: &EncoderSpec, rng: &mut R) -> ParamVector {
    let mut values = Vec::with_capacity(param_count(spec));
    for w in spec.layers.windows(2) {
        let bound = 1.0 / (w[0] as f64).sqrt();
        for _ in 0..(w[0] * w[1] + w[1]) {
            values.push(rng.random_range(-bound..=bound));
        }
    }
    ParamVector(values)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardResult {
    pub representation: Vec<f64>,
    pub logits: Option<Vec<f64>>,
}

impl ForwardResult {
    /// Final layer output: the logits when a head exists, else the representation.
    pub fn output(&self) -> &[f64] {
        self.logits.as_deref().unwrap_or(&self.representation)
    }
}

/// Gradient of a loss with respect to one sample's network outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputGrad {
    pub representation: Vec<f64>,
    pub logits: Option<Vec<f64>>,
}

impl OutputGrad {
    pub fn zeros(spec: &EncoderSpec) -> Self {
        Self {
            representation: vec![0.0; spec.representation_dim()],
            logits: spec.has_head().then(|| vec![0.0; spec.output_dim()]),
        }
    }

    pub fn representation(spec: &EncoderSpec, grad: Vec<f64>) -> Self {
        Self {
            representation: grad,
            logits: spec.has_head().then(|| vec![0.0; spec.output_dim()]),
        }
    }

    /// Gradient placed on the final layer output (logits or representation).
    pub fn output(spec: &EncoderSpec, grad: Vec<f64>) -> Self {
        if spec.has_head() {
            Self {
                representation: vec![0.0; spec.representation_dim()],
                logits: Some(grad),
            }
        } else {
            Self {
                representation: grad,
                logits: None,
            }
        }
    }
}

/// Per-layer pre-activations and activations of one forward pass.
struct Tape {
    // activations[0] is the input
    activations: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

fn run(spec: &EncoderSpec, params: &[f64], input: &[f64]) -> Result<Tape> {
    check_len("input", spec.input_dim(), input.len())?;
    let mut activations = Vec::with_capacity(spec.depth() + 1);
    let mut pre = Vec::with_capacity(spec.depth());
    activations.push(input.to_vec());
    for (l, ((w, (wo, bo)), act)) in spec
        .layers
        .windows(2)
        .zip(spec.layer_offsets())
        .zip(&spec.activations)
        .enumerate()
    {
        let (fan_in, fan_out) = (w[0], w[1]);
        let prev = &activations[l];
        let mut z = params[bo..bo + fan_out].to_vec();
        for (j, zj) in z.iter_mut().enumerate() {
            let row = &params[wo + j * fan_in..wo + (j + 1) * fan_in];
            *zj += row.iter().zip(prev).map(|(a, b)| a * b).sum::<f64>();
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { layer: l + 1 });
        }
        let a = z.iter().map(|&v| act.apply(v)).collect();
        pre.push(z);
        activations.push(a);
    }
    Ok(Tape { activations, pre })
}

fn result_of(spec: &EncoderSpec, tape: &Tape) -> ForwardResult {
    let r = spec.representation_index();
    ForwardResult {
        representation: tape.activations[r].clone(),
        logits: spec.has_head().then(|| tape.activations[spec.depth()].clone()),
    }
}

pub fn forward(spec: &EncoderSpec, params: &ParamVector, input: &[f64]) -> Result<ForwardResult> {
    check_len("parameter count", param_count(spec), params.len())?;
    let tape = run(spec, params.as_slice(), input)?;
    Ok(result_of(spec, &tape))
}

/// Representation only, for callers that never look at logits.
pub fn represent(spec: &EncoderSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    Ok(forward(spec, params, input)?.representation)
}

/// Value and exact gradient of a loss defined over the outputs of a batch.
///
/// `loss` receives the forward results for `inputs` (in order) and returns
/// the loss value together with its gradient with respect to each sample's
/// outputs; the network chain rule is applied here.
pub fn gradient<F>(spec: &EncoderSpec, params: &ParamVector, inputs: &[&[f64]], loss: F) -> Result<(f64, ParamVector)>
where
    F: FnOnce(&[ForwardResult]) -> Result<(f64, Vec<OutputGrad>)>,
{
    check_len("parameter count", param_count(spec), params.len())?;
    let p = params.as_slice();
    let tapes = inputs.iter().map(|x| run(spec, p, x)).collect::<Result<Vec<_>>>()?;
    let outputs: Vec<ForwardResult> = tapes.iter().map(|t| result_of(spec, t)).collect();
    let (value, output_grads) = loss(&outputs)?;
    if !value.is_finite() {
        return Err(Error::Numeric(format!("loss value {value}")));
    }
    check_len("output gradients", inputs.len(), output_grads.len())?;

    let offsets = spec.layer_offsets();
    let rep = spec.representation_index();
    let depth = spec.depth();
    let mut grad = vec![0.0; p.len()];
    for (tape, og) in tapes.iter().zip(&output_grads) {
        check_len(
            "representation gradient",
            spec.representation_dim(),
            og.representation.len(),
        )?;
        let mut upstream = if rep == depth {
            og.representation.clone()
        } else {
            let logits = og.logits.as_ref().ok_or(Error::Headless)?;
            check_len("logit gradient", spec.output_dim(), logits.len())?;
            logits.clone()
        };
        for l in (0..depth).rev() {
            let layer = l + 1;
            if layer == rep && rep != depth {
                for (u, g) in upstream.iter_mut().zip(&og.representation) {
                    *u += g;
                }
            }
            let (fan_in, fan_out) = (spec.layers[l], spec.layers[layer]);
            let (wo, bo) = offsets[l];
            let act = spec.activations[l];
            let delta: Vec<f64> = (0..fan_out)
                .map(|j| upstream[j] * act.derivative(tape.pre[l][j], tape.activations[layer][j]))
                .collect();
            let prev = &tape.activations[l];
            for j in 0..fan_out {
                let row = &mut grad[wo + j * fan_in..wo + (j + 1) * fan_in];
                for (g, a) in row.iter_mut().zip(prev) {
                    *g += delta[j] * a;
                }
                grad[bo + j] += delta[j];
            }
            if l > 0 {
                let mut next = vec![0.0; fan_in];
                for (j, d) in delta.iter().enumerate() {
                    let row = &p[wo + j * fan_in..wo + (j + 1) * fan_in];
                    for (n, w) in next.iter_mut().zip(row) {
                        *n += d * w;
                    }
                }
                if next.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { layer: l });
                }
                upstream = next;
            }
        }
    }
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    Ok((value, ParamVector(grad)))
}

/// `params - lr * grad`.
pub fn sgd_step(params: &ParamVector, grad: &ParamVector, lr: f64) -> Result<ParamVector> {
    if !(lr > 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate {lr} must be positive")));
    }
    params.lincomb(1.0, grad, -lr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn param_counts() {
        let id = |l: Vec<usize>| EncoderSpec::uniform(l, Activation::Identity).unwrap();
        assert_eq!(param_count(&id(vec![2, 3])), 9);
        assert_eq!(param_count(&id(vec![1, 1])), 2);
        assert_eq!(param_count(&id(vec![4, 8, 3])), 67);
    }

    #[test]
    fn spec_validation() {
        assert!(EncoderSpec::uniform(vec![3], Activation::Relu).is_err());
        assert!(EncoderSpec::uniform(vec![3, 0], Activation::Relu).is_err());
        assert!(EncoderSpec::new(vec![3, 2], vec![]).is_err());
        let s = EncoderSpec::uniform(vec![4, 8, 3], Activation::Tanh).unwrap();
        assert_eq!(s.representation_dim(), 8);
        assert!(s.has_head());
        let enc = s.with_representation_layer(2).unwrap();
        assert!(!enc.has_head());
        assert_eq!(enc.representation_dim(), 3);
    }

    #[test]
    fn spec_json_shape() {
        let s: EncoderSpec = serde_json::from_str(r#"{"layers":[2,4,3],"activations":["tanh","identity"]}"#).unwrap();
        assert_eq!(s.activations, vec![Activation::Tanh, Activation::Identity]);
        let back = serde_json::to_string(&s).unwrap();
        assert_eq!(back, r#"{"layers":[2,4,3],"activations":["tanh","identity"]}"#);
    }

    #[test]
    fn forward_small_nets() {
        let id = EncoderSpec::uniform(vec![1, 1], Activation::Identity).unwrap();
        let p = ParamVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(forward(&id, &p, &[5.0]).unwrap().representation, vec![5.0]);

        let relu = EncoderSpec::uniform(vec![1, 1], Activation::Relu).unwrap();
        assert_eq!(forward(&relu, &p, &[-2.0]).unwrap().representation, vec![0.0]);

        let tanh = EncoderSpec::uniform(vec![2, 1], Activation::Tanh).unwrap();
        let p = ParamVector::new(vec![1.0, 1.0, 0.0]).unwrap();
        let out = forward(&tanh, &p, &[0.5, 0.5]).unwrap();
        assert_relative_eq!(out.representation[0], 0.76159, epsilon = 1e-5);
        assert!(out.logits.is_none());
    }

    #[test]
    fn forward_rejects_bad_lengths() {
        let s = EncoderSpec::uniform(vec![2, 1], Activation::Tanh).unwrap();
        let p = ParamVector::new(vec![1.0, 1.0, 0.0]).unwrap();
        assert!(matches!(forward(&s, &p, &[1.0]), Err(Error::Dimension { .. })));
        let short = ParamVector::new(vec![1.0]).unwrap();
        assert!(matches!(forward(&s, &short, &[1.0, 2.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn non_finite_reports_layer() {
        let s = EncoderSpec::uniform(vec![1, 1, 1], Activation::Identity).unwrap();
        let p = ParamVector::new(vec![1e200, 0.0, 1e200, 0.0]).unwrap();
        match forward(&s, &p, &[1e200]) {
            Err(Error::NonFinite { layer }) => assert_eq!(layer, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gradient_of_squared_output() {
        let s = EncoderSpec::uniform(vec![1, 1], Activation::Identity).unwrap();
        let p = ParamVector::new(vec![3.0, 0.0]).unwrap();
        let x = [1.0];
        let (v, g) = gradient(&s, &p, &[&x], |out| {
            let r = &out[0].representation;
            Ok((r[0] * r[0], vec![OutputGrad::representation(&s, vec![2.0 * r[0]])]))
        })
        .unwrap();
        assert_eq!(v, 9.0);
        assert_eq!(g[0], 6.0);
        assert_eq!(g[1], 6.0);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let s = EncoderSpec::uniform(vec![3, 4, 2], Activation::Tanh).unwrap();
        let mut rng = rand::rng();
        let p = init_params(&s, &mut rng);
        let x = [0.1, 0.2, 0.3];
        let (v, g) = gradient(&s, &p, &[&x], |_| Ok((4.2, vec![OutputGrad::zeros(&s)]))).unwrap();
        assert_eq!(v, 4.2);
        assert!(g.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sgd_examples() {
        let p = |v: Vec<f64>| ParamVector::new(v).unwrap();
        assert_eq!(
            sgd_step(&p(vec![1.0, 2.0]), &p(vec![0.0, 0.0]), 0.1).unwrap(),
            p(vec![1.0, 2.0])
        );
        assert_eq!(sgd_step(&p(vec![1.0]), &p(vec![2.0]), 0.5).unwrap(), p(vec![0.0]));
        let out = sgd_step(&p(vec![3.0, -1.0]), &p(vec![1.0, 2.0]), 0.1).unwrap();
        assert_relative_eq!(out[0], 2.9, epsilon = 1e-15);
        assert_relative_eq!(out[1], -1.2, epsilon = 1e-15);
        assert!(sgd_step(&p(vec![1.0]), &p(vec![1.0, 2.0]), 0.1).is_err());
        assert!(sgd_step(&p(vec![1.0]), &p(vec![1.0]), 0.0).is_err());
    }

    #[test]
    fn flatten_ordering() {
        let s = EncoderSpec::uniform(vec![1, 1], Activation::Identity).unwrap();
        let v = flatten(
            &s,
            &[LayerWeights {
                weights: vec![2.0],
                biases: vec![3.0],
            }],
        )
        .unwrap();
        assert_eq!(v.as_slice(), &[2.0, 3.0]);

        let s = EncoderSpec::uniform(vec![2, 1], Activation::Identity).unwrap();
        let v = flatten(
            &s,
            &[LayerWeights {
                weights: vec![0.5, -0.5],
                biases: vec![7.0],
            }],
        )
        .unwrap();
        assert_eq!(v.as_slice(), &[0.5, -0.5, 7.0]);
        // weights before bias: input 0 weight first
        let out = forward(&s, &v, &[2.0, 0.0]).unwrap();
        assert_eq!(out.representation, vec![8.0]);
    }

    #[test]
    fn flatten_count_mismatch() {
        let s = EncoderSpec::uniform(vec![2, 1], Activation::Identity).unwrap();
        assert!(flatten(
            &s,
            &[LayerWeights {
                weights: vec![1.0],
                biases: vec![0.0]
            }]
        )
        .is_err());
        assert!(unflatten(&s, &ParamVector::zeros(4)).is_err());
    }

    #[test]
    fn param_bytes_round_trip_and_truncation() {
        let p = ParamVector::new(vec![1.5, -2.25, 1e-300]).unwrap();
        let bytes = p.to_bytes();
        assert_eq!(&bytes[..8], &3u64.to_le_bytes());
        assert_eq!(ParamVector::from_bytes(&bytes).unwrap(), p);
        assert!(ParamVector::from_bytes(&bytes[..20]).is_err());
        assert!(ParamVector::from_bytes(&[]).is_err());
    }

    #[test]
    fn param_vector_rejects_nan() {
        assert!(ParamVector::new(vec![f64::NAN]).is_err());
        assert!(ParamVector::new(vec![]).is_err());
    }
}
