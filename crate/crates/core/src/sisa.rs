//! Expected retraining cost of sharded and sliced training under
//! unlearning requests, in closed form and by Monte Carlo.
//!
//! Costs are counted in samples retrained. Sharding splits `N` points into
//! `S` equal shards; a request retrains the affected shard. Slicing splits a
//! shard of `D` points into `R` slices; slice `r` is trained on the first
//! `r` slices for `2e'/(R+1)` epochs, so a hit on slice `r` costs
//! `sum_{j=r}^{R} (2e'/(R+1)) (jD/R)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShardingScenario {
    pub n: u64,
    pub s: u64,
    pub k: u64,
}

impl ShardingScenario {
    pub fn new(n: u64, s: u64, k: u64) -> Result<Self> {
        let sc = Self { n, s, k };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s >= 1 && self.n >= self.s) {
            return Err(Error::InvalidArgument(format!(
                "need N >= S >= 1, got N={} S={}",
                self.n, self.s
            )));
        }
        if !(self.k >= 1 && self.k <= self.n) {
            return Err(Error::InvalidArgument(format!("need 1 <= K <= N, got K={}", self.k)));
        }
        Ok(())
    }

    fn shard_size(&self) -> f64 {
        self.n as f64 / self.s as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlicingScenario {
    pub d: u64,
    pub r: u64,
    pub e_prime: f64,
    /// Requests per batch (batched mode only).
    pub k: u64,
}

impl SlicingScenario {
    pub fn new(d: u64, r: u64, e_prime: f64, k: u64) -> Result<Self> {
        let sc = Self { d, r, e_prime, k };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 1 && self.d >= self.r) {
            return Err(Error::InvalidArgument(format!(
                "need D >= R >= 1, got D={} R={}",
                self.d, self.r
            )));
        }
        if !(self.e_prime > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "e' must be positive, got {}",
                self.e_prime
            )));
        }
        if self.k < 1 {
            return Err(Error::InvalidArgument("K must be at least 1".into()));
        }
        Ok(())
    }

    /// Cost of retraining from slice `r` (1-based, may be fractional) to `R`.
    pub fn cost_from(&self, r: f64) -> f64 {
        let big_r = self.r as f64;
        let scale = 2.0 * self.e_prime * self.d as f64 / (big_r * (big_r + 1.0));
        scale * (big_r * (big_r + 1.0) / 2.0 - r * (r - 1.0) / 2.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformMinSpec {
    pub a: f64,
    pub b: f64,
    pub n: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestMode {
    Sequential,
    Batched,
}

/// `(N/S - 1) K - sum_{i=1}^{K} (i-1)/S`.
pub fn expected_seq_shard_cost(sc: &ShardingScenario) -> Result<f64> {
    sc.validate()?;
    let k = sc.k as f64;
    let s = sc.s as f64;
    Ok((sc.shard_size() - 1.0) * k - k * (k - 1.0) / (2.0 * s))
}

/// `N (1 - (1 - 1/S)^K) - K`.
pub fn expected_batch_shard_cost(sc: &ShardingScenario) -> Result<f64> {
    sc.validate()?;
    let s = sc.s as f64;
    Ok(sc.n as f64 * (1.0 - (1.0 - 1.0 / s).powi(sc.k as i32)) - sc.k as f64)
}

/// `e' D (2/3 + 1/(3R))`.
pub fn expected_seq_slice_cost(sl: &SlicingScenario) -> Result<f64> {
    sl.validate()?;
    Ok(sl.e_prime * sl.d as f64 * (2.0 / 3.0 + 1.0 / (3.0 * sl.r as f64)))
}

/// Batched slicing cost with the minimum hit slice modelled by the moments
/// of the minimum of `K` continuous uniform draws on `[1, R]`.
pub fn expected_batch_slice_cost(sl: &SlicingScenario) -> Result<f64> {
    sl.validate()?;
    let r = sl.r as f64;
    let k = sl.k as f64;
    let inner = 1.0 + (2.0 * (r - 1.0) / (k + 1.0)) * ((k + 1.0) + r) / (k + 2.0) - (k + r) / (k + 1.0);
    Ok((2.0 * sl.e_prime * sl.d as f64 / (r * (r + 1.0))) * (r * (r + 1.0) / 2.0 - 0.5 * inner))
}

/// Mean and second moment of the minimum of `n` i.i.d. `U[a, b]` draws.
pub fn uniform_min_moments(u: &UniformMinSpec) -> Result<(f64, f64)> {
    if !(u.a < u.b) || u.n < 1 {
        return Err(Error::InvalidArgument(format!("need a < b and n >= 1, got {u:?}")));
    }
    let (a, b, n) = (u.a, u.b, u.n as f64);
    let mean = (n * a + b) / (n + 1.0);
    let second = a * a + (2.0 * (b - a) / (n + 1.0)) * ((n + 1.0) * a + b) / (n + 2.0);
    Ok((mean, second))
}

/// Shard request process for the sequential simulator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShardProcess {
    /// Each request hits a shard uniformly at random, independent of the past.
    #[default]
    IidUniform,
    /// Each request deletes a uniformly chosen remaining point. No closed form.
    WithoutReplacement,
}

/// How the batched slicing simulator draws the minimum hit slice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceMinModel {
    /// Minimum of `K` continuous `U[1, R]` draws, the model behind
    /// [`expected_batch_slice_cost`].
    #[default]
    Continuous,
    /// Minimum of `K` uniform slice indices in `{1..R}`. No closed form.
    Discrete,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl McEstimate {
    pub fn z_score(&self, analytic: f64) -> f64 {
        let diff = (self.mean - analytic).abs();
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff <= 1e-9 * analytic.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Welford accumulation over trials in order.
fn estimate(trials: u64, mut draw: impl FnMut() -> f64) -> Result<McEstimate> {
    if trials < 1 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 1..=trials {
        let x = draw();
        let delta = x - mean;
        mean += delta / i as f64;
        m2 += delta * (x - mean);
    }
    let std_error = if trials > 1 {
        (m2 / (trials - 1) as f64).sqrt() / (trials as f64).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate { mean, std_error })
}

/// Sequential: `K` requests with per-request cost `N/S - 1 - (prior hits on
/// that shard)`. Batched: the `K` hits are processed at once and every
/// affected shard retrains `N/S - u_j` points.
pub fn simulate_shard_costs<R: Rng + ?Sized>(
    sc: &ShardingScenario,
    mode: RequestMode,
    process: ShardProcess,
    trials: u64,
    rng: &mut R,
) -> Result<McEstimate> {
    sc.validate()?;
    let shards = sc.s as usize;
    let size = sc.shard_size();
    let per_shard = sc.n / sc.s;
    let mut hits = vec![0u64; shards];
    estimate(trials, || {
        hits.iter_mut().for_each(|h| *h = 0);
        let mut cost = 0.0;
        for i in 0..sc.k {
            let shard = match process {
                ShardProcess::IidUniform => rng.random_range(0..shards),
                ShardProcess::WithoutReplacement => {
                    // pick among the N - i remaining points
                    let mut pick = rng.random_range(0..sc.n - i);
                    let mut chosen = shards - 1;
                    for (j, &h) in hits.iter().enumerate() {
                        let left = per_shard.saturating_sub(h);
                        if pick < left {
                            chosen = j;
                            break;
                        }
                        pick -= left;
                    }
                    chosen
                }
            };
            if mode == RequestMode::Sequential {
                cost += size - 1.0 - hits[shard] as f64;
            }
            hits[shard] += 1;
        }
        if mode == RequestMode::Batched {
            cost = hits.iter().filter(|&&h| h > 0).map(|&h| size - h as f64).sum();
        }
        cost
    })
}

/// Sequential: one request hits slice `r ~ U{1..R}`. Batched: the minimum
/// over `K` requests, drawn per `model`.
pub fn simulate_slice_costs<R: Rng + ?Sized>(
    sl: &SlicingScenario,
    mode: RequestMode,
    model: SliceMinModel,
    trials: u64,
    rng: &mut R,
) -> Result<McEstimate> {
    sl.validate()?;
    let big_r = sl.r;
    estimate(trials, || {
        let r = match mode {
            RequestMode::Sequential => rng.random_range(1..=big_r) as f64,
            RequestMode::Batched => match model {
                SliceMinModel::Discrete => (0..sl.k).map(|_| rng.random_range(1..=big_r)).min().unwrap_or(1) as f64,
                SliceMinModel::Continuous if big_r == 1 => 1.0,
                SliceMinModel::Continuous => (0..sl.k)
                    .map(|_| 1.0 + (big_r - 1) as f64 * rng.random::<f64>())
                    .fold(f64::INFINITY, f64::min),
            },
        };
        sl.cost_from(r)
    })
}

/// Monte Carlo estimate of the first two moments of the uniform minimum.
pub fn simulate_uniform_min<R: Rng + ?Sized>(
    u: &UniformMinSpec,
    draws: u64,
    rng: &mut R,
) -> Result<(McEstimate, McEstimate)> {
    uniform_min_moments(u)?;
    let samples: Vec<f64> = (0..draws)
        .map(|_| {
            (0..u.n)
                .map(|_| u.a + (u.b - u.a) * rng.random::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut it = samples.iter();
    let first = estimate(draws, || *it.next().expect("draw"))?;
    let mut it = samples.iter();
    let second = estimate(draws, || it.next().map(|x| x * x).expect("draw"))?;
    Ok((first, second))
}
