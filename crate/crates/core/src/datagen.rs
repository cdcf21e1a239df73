//! Datasets, IDX loading, and erased/retained splits with cached neighbor sets.

use std::cmp::Ordering;
use std::path::Path;

use rand::seq::index;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, EncoderSpec, ParamVector};
use crate::seed;

/// Labeled inputs. Labels are used for training and evaluation only.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_count) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside {class_count} classes"
            )));
        }
        if let Some(first) = inputs.first() {
            if inputs.iter().any(|x| x.len() != first.len()) {
                return Err(Error::InvalidArgument("inputs differ in dimension".into()));
            }
        }
        Ok(Self {
            inputs,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    /// Items at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }

    pub fn input_refs(&self) -> Vec<&[f64]> {
        self.inputs.iter().map(Vec::as_slice).collect()
    }
}

/// Center of class `c`: `(1 + c / 2d) * (+-e_a)` where `a = c mod d` and the
/// sign is negative for the second half of each ring of `2d` classes.
pub fn cluster_center(class: usize, dim: usize) -> Vec<f64> {
    let ring = class / (2 * dim);
    let q = class % (2 * dim);
    let sign = if q < dim { 1.0 } else { -1.0 };
    let mut c = vec![0.0; dim];
    c[q % dim] = sign * (1.0 + ring as f64);
    c
}

/// Isotropic Gaussian clusters around [`cluster_center`], class-major order.
pub fn gen_gaussian_clusters(
    class_count: usize,
    per_class: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if dim < 1 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    if class_count < 1 || per_class < 1 {
        return Err(Error::InvalidArgument(
            "class and per-class counts must be at least 1".into(),
        ));
    }
    let normal = Normal::new(0.0, spread).map_err(|e| Error::InvalidArgument(format!("spread {spread}: {e}")))?;
    let mut rng = seed::rng(seed);
    let mut inputs = Vec::with_capacity(class_count * per_class);
    let mut labels = Vec::with_capacity(class_count * per_class);
    for c in 0..class_count {
        let center = cluster_center(c, dim);
        for _ in 0..per_class {
            inputs.push(center.iter().map(|m| m + normal.sample(&mut rng)).collect());
            labels.push(c);
        }
    }
    Dataset::new(inputs, labels, class_count)
}

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::Truncated(format!("{what} header")))
}

/// Parse IDX image and label buffers. Pixels are scaled to `[0, 1]` and
/// flattened row-major.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let magic = be_u32(images, 0, "image")?;
    if magic != IDX_IMAGES {
        return Err(Error::BadMagic {
            expected: IDX_IMAGES,
            found: magic,
        });
    }
    let n_images = be_u32(images, 4, "image")? as usize;
    let rows = be_u32(images, 8, "image")? as usize;
    let cols = be_u32(images, 12, "image")? as usize;
    let magic = be_u32(labels, 0, "label")?;
    if magic != IDX_LABELS {
        return Err(Error::BadMagic {
            expected: IDX_LABELS,
            found: magic,
        });
    }
    let n_labels = be_u32(labels, 4, "label")? as usize;
    if n_images != n_labels {
        return Err(Error::CountMismatch {
            images: n_images,
            labels: n_labels,
        });
    }
    let dim = rows * cols;
    let pixels = images
        .get(16..16 + n_images * dim)
        .ok_or_else(|| Error::Truncated(format!("{n_images} images of {rows}x{cols}")))?;
    let ys = labels
        .get(8..8 + n_labels)
        .ok_or_else(|| Error::Truncated(format!("{n_labels} labels")))?;
    let inputs = if dim == 0 {
        vec![Vec::new(); n_images]
    } else {
        pixels
            .chunks_exact(dim)
            .map(|img| img.iter().map(|&p| p as f64 / 255.0).collect())
            .collect()
    };
    let labels: Vec<usize> = ys.iter().map(|&y| y as usize).collect();
    let class_count = labels.iter().max().map_or(1, |m| m + 1);
    Dataset::new(inputs, labels, class_count)
}

pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    parse_idx(&std::fs::read(images)?, &std::fs::read(labels)?)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EraseMode {
    #[default]
    Uniform,
    ClassBalanced,
}

/// Erased/retained partition with the cached state ManiF-SMC needs.
///
/// `original_reps[p]` and `neighbor_sets[p]` belong to `erased[p]`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnlearnSplit {
    pub erased: Vec<usize>,
    pub retained: Vec<usize>,
    pub original_reps: Vec<Vec<f64>>,
    pub neighbor_sets: Vec<Vec<usize>>,
    pub neighbor_union: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    pub mode: EraseMode,
}

/// Replayable description of a split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub seed: u64,
    pub k: usize,
    pub mode: EraseMode,
    pub erased: Vec<usize>,
    pub neighbor_sets: Vec<Vec<usize>>,
}

/// Indices of the `k` candidates closest to `query` in Euclidean distance;
/// ties go to the smaller index.
pub fn nearest_neighbors(query: &[f64], candidates: &[(usize, &[f64])], k: usize) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = candidates.iter().map(|(i, v)| (euclidean(query, v), *i)).collect();
    let by_dist =
        |a: &(f64, usize), b: &(f64, usize)| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1));
    if k < scored.len() && k > 0 {
        scored.select_nth_unstable_by(k - 1, by_dist);
        scored.truncate(k);
    }
    scored.sort_by(by_dist);
    scored.truncate(k);
    scored.into_iter().map(|(_, i)| i).collect()
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn draw_erased(dataset: &Dataset, uss: usize, seed: u64, mode: EraseMode) -> Result<Vec<usize>> {
    let mut rng = seed::rng(seed);
    let mut erased = match mode {
        EraseMode::Uniform => index::sample(&mut rng, dataset.len(), uss).into_vec(),
        EraseMode::ClassBalanced => {
            let classes = dataset.class_count;
            let mut picked = Vec::with_capacity(uss);
            for c in 0..classes {
                let want = uss / classes + usize::from(c < uss % classes);
                let members: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.labels[i] == c).collect();
                if want > members.len() {
                    return Err(Error::InvalidArgument(format!(
                        "class {c} has {} samples, {want} requested",
                        members.len()
                    )));
                }
                picked.extend(
                    index::sample(&mut rng, members.len(), want)
                        .into_iter()
                        .map(|j| members[j]),
                );
            }
            picked
        }
    };
    erased.sort_unstable();
    Ok(erased)
}

#[allow(clippy::too_many_arguments)]
fn build_split(
    dataset: &Dataset,
    erased: Vec<usize>,
    k: usize,
    spec: &EncoderSpec,
    params_o: &ParamVector,
    seed: u64,
    mode: EraseMode,
    neighbor_sets: Option<Vec<Vec<usize>>>,
) -> Result<UnlearnSplit> {
    let mut is_erased = vec![false; dataset.len()];
    for &i in &erased {
        is_erased[i] = true;
    }
    let retained: Vec<usize> = (0..dataset.len()).filter(|&i| !is_erased[i]).collect();
    if k > retained.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds {} retained samples",
            retained.len()
        )));
    }
    let original_reps = erased
        .iter()
        .map(|&i| nn::represent(spec, params_o, &dataset.inputs[i]))
        .collect::<Result<Vec<_>>>()?;
    let neighbor_sets = match neighbor_sets {
        Some(sets) => sets,
        None => {
            let retained_reps = retained
                .iter()
                .map(|&i| nn::represent(spec, params_o, &dataset.inputs[i]))
                .collect::<Result<Vec<_>>>()?;
            let candidates: Vec<(usize, &[f64])> = retained
                .iter()
                .zip(&retained_reps)
                .map(|(&i, r)| (i, r.as_slice()))
                .collect();
            original_reps
                .iter()
                .map(|z| nearest_neighbors(z, &candidates, k))
                .collect()
        }
    };
    let mut neighbor_union: Vec<usize> = neighbor_sets.iter().flatten().copied().collect();
    neighbor_union.sort_unstable();
    neighbor_union.dedup();
    let split = UnlearnSplit {
        erased,
        retained,
        original_reps,
        neighbor_sets,
        neighbor_union,
        k,
        seed,
        mode,
    };
    split.check(dataset.len())?;
    Ok(split)
}

/// Draw `uss` erased samples and cache their original representations and
/// the `k` nearest retained neighbors in original representation space.
pub fn make_split(
    dataset: &Dataset,
    uss: usize,
    k: usize,
    spec: &EncoderSpec,
    params_o: &ParamVector,
    seed: u64,
    mode: EraseMode,
) -> Result<UnlearnSplit> {
    if uss >= dataset.len() {
        return Err(Error::InvalidArgument(format!(
            "uss {uss} must be smaller than the dataset ({})",
            dataset.len()
        )));
    }
    let erased = draw_erased(dataset, uss, seed, mode)?;
    build_split(dataset, erased, k, spec, params_o, seed, mode, None)
}

impl UnlearnSplit {
    /// Rebuild a split from its record; representations are recomputed.
    pub fn from_record(
        dataset: &Dataset,
        record: &SplitRecord,
        spec: &EncoderSpec,
        params_o: &ParamVector,
    ) -> Result<Self> {
        if record.erased.iter().any(|&i| i >= dataset.len()) {
            return Err(Error::InvalidArgument("erased index out of range".into()));
        }
        if record.neighbor_sets.len() != record.erased.len() {
            return Err(Error::InvalidArgument(
                "one neighbor set per erased sample required".into(),
            ));
        }
        let mut erased = record.erased.clone();
        erased.sort_unstable();
        erased.dedup();
        if erased != record.erased {
            return Err(Error::InvalidArgument(
                "erased indices must be sorted and unique".into(),
            ));
        }
        build_split(
            dataset,
            erased,
            record.k,
            spec,
            params_o,
            record.seed,
            record.mode,
            Some(record.neighbor_sets.clone()),
        )
    }

    pub fn record(&self) -> SplitRecord {
        SplitRecord {
            seed: self.seed,
            k: self.k,
            mode: self.mode,
            erased: self.erased.clone(),
            neighbor_sets: self.neighbor_sets.clone(),
        }
    }

    /// Partition and neighbor invariants.
    pub fn check(&self, dataset_len: usize) -> Result<()> {
        let mut seen = vec![0u8; dataset_len];
        for &i in self.erased.iter().chain(&self.retained) {
            let slot = seen
                .get_mut(i)
                .ok_or_else(|| Error::InvalidArgument(format!("index {i} out of range")))?;
            *slot += 1;
        }
        if seen.iter().any(|&c| c != 1) {
            return Err(Error::InvalidArgument(
                "erased and retained must partition the dataset".into(),
            ));
        }
        let mut retained_mask = vec![false; dataset_len];
        for &i in &self.retained {
            retained_mask[i] = true;
        }
        for set in &self.neighbor_sets {
            if set.len() != self.k {
                return Err(Error::InvalidArgument(format!(
                    "neighbor set of size {} for k = {}",
                    set.len(),
                    self.k
                )));
            }
            if set.iter().any(|&j| !retained_mask[j]) {
                return Err(Error::InvalidArgument("neighbor outside the retained set".into()));
            }
        }
        if self.original_reps.len() != self.erased.len() || self.neighbor_sets.len() != self.erased.len() {
            return Err(Error::InvalidArgument("cached state misaligned with erased set".into()));
        }
        Ok(())
    }

    pub fn erased_data(&self, dataset: &Dataset) -> Dataset {
        dataset.subset(&self.erased)
    }

    pub fn retained_data(&self, dataset: &Dataset) -> Dataset {
        dataset.subset(&self.retained)
    }
}
