//! Unlearning metrics: membership inference success, remaining and test
//! accuracy, running time.

use std::fs::OpenOptions;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, UnlearnSplit};
use crate::error::{Error, Result};
use crate::loss::{self, TrainLoss};
use crate::nn::{self, EncoderSpec, ParamVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub mia: f64,
    pub ra: Option<f64>,
    pub ta: Option<f64>,
    pub rt_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_mse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_mse: Option<f64>,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples whose argmax logit equals the label.
pub fn accuracy(spec: &EncoderSpec, params: &ParamVector, dataset: &Dataset) -> Result<f64> {
    if !spec.has_head() {
        return Err(Error::Headless);
    }
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty dataset".into()));
    }
    let mut correct = 0usize;
    for (x, &y) in dataset.inputs.iter().zip(&dataset.labels) {
        let out = nn::forward(spec, params, x)?;
        if argmax(out.logits.as_deref().ok_or(Error::Headless)?) == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

/// Loss-threshold attack: the threshold is the mean retained loss and an
/// erased sample counts as a detected non-member when its loss exceeds it.
pub fn mia_from_losses(erased: &[f64], retained: &[f64]) -> Result<f64> {
    if erased.is_empty() || retained.is_empty() {
        return Err(Error::InvalidArgument(
            "membership inference needs erased and retained samples".into(),
        ));
    }
    let tau = retained.iter().sum::<f64>() / retained.len() as f64;
    let flagged = erased.iter().filter(|&&l| l > tau).count();
    Ok(flagged as f64 / erased.len() as f64)
}

pub fn mia_success_rate(
    spec: &EncoderSpec,
    params: &ParamVector,
    erased: &Dataset,
    retained: &Dataset,
    loss: TrainLoss,
) -> Result<f64> {
    if erased.is_empty() {
        return Err(Error::InvalidArgument("erased set is empty".into()));
    }
    let le = loss::per_sample_losses(spec, params, loss, &erased.inputs, &erased.labels)?;
    let lr = loss::per_sample_losses(spec, params, loss, &retained.inputs, &retained.labels)?;
    mia_from_losses(&le, &lr)
}

fn mean_loss(spec: &EncoderSpec, params: &ParamVector, d: &Dataset, loss: TrainLoss) -> Result<f64> {
    let l = loss::per_sample_losses(spec, params, loss, &d.inputs, &d.labels)?;
    Ok(l.iter().sum::<f64>() / l.len().max(1) as f64)
}

/// MIA on erased vs retained, RA on retained, TA on test; reconstruction
/// models report R-MSE and T-MSE instead of accuracies.
pub fn evaluate(
    spec: &EncoderSpec,
    params: &ParamVector,
    dataset: &Dataset,
    split: &UnlearnSplit,
    test: &Dataset,
    rt_seconds: f64,
    loss: TrainLoss,
) -> Result<MetricsRecord> {
    let erased = split.erased_data(dataset);
    let retained = split.retained_data(dataset);
    let mia = mia_success_rate(spec, params, &erased, &retained, loss)?;
    Ok(match loss {
        TrainLoss::CrossEntropy => MetricsRecord {
            mia,
            ra: Some(accuracy(spec, params, &retained)?),
            ta: Some(accuracy(spec, params, test)?),
            rt_seconds,
            r_mse: None,
            t_mse: None,
        },
        TrainLoss::RepresentationMse => MetricsRecord {
            mia,
            ra: None,
            ta: None,
            rt_seconds,
            r_mse: Some(mean_loss(spec, params, &retained, loss)?),
            t_mse: Some(mean_loss(spec, params, test, loss)?),
        },
    })
}

/// One row of the results CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub uss: usize,
    pub k: usize,
    pub margin_mode: String,
    pub mia: f64,
    pub ra: Option<f64>,
    pub ta: Option<f64>,
    pub rt: f64,
}

impl ResultRow {
    pub fn new(method: &str, uss: usize, k: usize, margin_mode: &str, m: &MetricsRecord) -> Self {
        Self {
            method: method.to_string(),
            uss,
            k,
            margin_mode: margin_mode.to_string(),
            mia: m.mia,
            ra: m.ra,
            ta: m.ta,
            rt: m.rt_seconds,
        }
    }
}

/// Append rows, writing the header when the file is new or empty.
pub fn append_results_csv(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    let path = path.as_ref();
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
