//! Command-line experiment driver: configuration, the `train`, `unlearn`
//! and `sisa` commands, and their output files.
//!
//! Every command derives its randomness from one global seed through
//! [`seed::sub_seed`], one stream per consumer.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::baselines::{self, GaConfig, TrainConfig};
use crate::datagen::{self, Dataset, EraseMode, UnlearnSplit};
use crate::error::{Error, Result};
use crate::manif_smc::{manif_smc_unlearn, MarginMode, UnlearnConfig, UnlearnReport};
use crate::metrics::{self, ResultRow};
use crate::nn::{Activation, EncoderSpec, ParamVector};
use crate::seed::{self, stream};
use crate::sisa::{self, RequestMode, ShardProcess, ShardingScenario, SliceMinModel, SlicingScenario};

pub const PARAMS_FILE: &str = "params.bin";
pub const TRAIN_TRACE_FILE: &str = "train_trace.csv";
pub const RESULTS_FILE: &str = "results.csv";
pub const SISA_FILE: &str = "sisa.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    Synthetic {
        class_count: usize,
        per_class: usize,
        test_per_class: usize,
        dim: usize,
        spread: f64,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        /// Keep only the first `limit` training images.
        #[serde(default)]
        limit: Option<usize>,
    },
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Synthetic {
            class_count: 3,
            per_class: 100,
            test_per_class: 100,
            dim: 100,
            spread: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub encoder: EncoderSpec,
    pub train: TrainConfig,
    pub unlearn: UnlearnConfig,
    /// Margin used by `manif_fixed`.
    pub fixed_alpha: f64,
    pub ga: GaConfig,
    pub finetune: TrainConfig,
    pub uss: Vec<usize>,
    pub erase_mode: EraseMode,
    /// Methods run by `unlearn` when no method is given on the command line.
    pub methods: Vec<Method>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            dataset: DatasetConfig::default(),
            encoder: EncoderSpec::new(
                vec![100, 128, 32, 3],
                vec![Activation::Identity, Activation::Tanh, Activation::Identity],
            )
            .and_then(|s| s.with_representation_layer(1))
            .expect("default encoder"),
            train: TrainConfig::default(),
            unlearn: UnlearnConfig::default(),
            fixed_alpha: 1.0,
            ga: GaConfig::default(),
            finetune: TrainConfig {
                epochs: 2,
                lr: 0.02,
                ..TrainConfig::default()
            },
            uss: vec![30],
            erase_mode: EraseMode::Uniform,
            methods: vec![Method::ManifSmc],
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Structural checks that need no data. Dataset-size checks happen in
    /// [`ExperimentConfig::load_data`].
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.train.validate()?;
        self.unlearn.validate()?;
        if let DatasetConfig::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            ..
        } = &self.dataset
        {
            for p in [train_images, train_labels, test_images, test_labels] {
                if !p.exists() {
                    return Err(Error::Config(format!("dataset file {} does not exist", p.display())));
                }
            }
        }
        if self.uss.is_empty() || self.uss.contains(&0) {
            return Err(Error::Config("uss list must be nonempty with positive entries".into()));
        }
        Ok(())
    }

    /// Training and test sets.
    pub fn load_data(&self) -> Result<(Dataset, Dataset)> {
        let (train, test) = match &self.dataset {
            DatasetConfig::Synthetic {
                class_count,
                per_class,
                test_per_class,
                dim,
                spread,
            } => (
                datagen::gen_gaussian_clusters(
                    *class_count,
                    *per_class,
                    *dim,
                    *spread,
                    seed::sub_seed(self.seed, stream::TRAIN_DATA),
                )?,
                datagen::gen_gaussian_clusters(
                    *class_count,
                    *test_per_class,
                    *dim,
                    *spread,
                    seed::sub_seed(self.seed, stream::TEST_DATA),
                )?,
            ),
            DatasetConfig::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                limit,
            } => {
                let mut train = datagen::load_idx(train_images, train_labels)?;
                if let Some(n) = limit {
                    let keep: Vec<usize> = (0..(*n).min(train.len())).collect();
                    train = train.subset(&keep);
                }
                (train, datagen::load_idx(test_images, test_labels)?)
            }
        };
        if train.dim() != self.encoder.input_dim() {
            return Err(Error::Config(format!(
                "encoder input dimension {} does not match data dimension {}",
                self.encoder.input_dim(),
                train.dim()
            )));
        }
        if let Some(&bad) = self.uss.iter().find(|&&u| u >= train.len()) {
            return Err(Error::Config(format!(
                "uss {bad} must be smaller than the training set ({})",
                train.len()
            )));
        }
        Ok((train, test))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: seed::sub_seed(self.seed, stream::TRAIN),
            ..self.train.clone()
        }
    }

    /// Split seed for one unlearning sample size.
    pub fn split_seed(&self, uss: usize) -> u64 {
        seed::sub_seed(seed::sub_seed(self.seed, stream::SPLIT), uss as u64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "manif_smc")]
    ManifSmc,
    #[serde(rename = "manif_fixed")]
    ManifFixed,
    #[serde(rename = "ga")]
    Ga,
    #[serde(rename = "retrain")]
    Retrain,
    #[serde(rename = "finetune-after")]
    FinetuneAfter,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::ManifSmc,
        Method::ManifFixed,
        Method::Ga,
        Method::Retrain,
        Method::FinetuneAfter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ManifSmc => "manif_smc",
            Method::ManifFixed => "manif_fixed",
            Method::Ga => "ga",
            Method::Retrain => "retrain",
            Method::FinetuneAfter => "finetune-after",
        }
    }

    fn margin_label(self) -> &'static str {
        match self {
            Method::ManifSmc | Method::FinetuneAfter => "adaptive",
            Method::ManifFixed => "fixed",
            Method::Ga | Method::Retrain => "none",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
            Error::Config(format!("unknown method {s:?} (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "manif-smc",
    version,
    about = "Representation-space machine unlearning experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the original model and write its parameters.
    Train(RunArgs),
    /// Unlearn with one method for every configured sample size.
    Unlearn {
        #[command(flatten)]
        run: RunArgs,
        /// manif_smc, manif_fixed, ga, retrain or finetune-after.
        #[arg(long)]
        method: Option<String>,
    },
    /// Compare closed-form SISA retraining costs with Monte Carlo.
    Sisa(SisaArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Global seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SisaArgs {
    #[arg(long = "n")]
    pub n: Option<u64>,
    #[arg(long = "s")]
    pub s: Option<u64>,
    #[arg(long = "k")]
    pub k: Option<u64>,
    #[arg(long = "d")]
    pub d: Option<u64>,
    #[arg(long = "r")]
    pub r: Option<u64>,
    #[arg(long = "e-prime")]
    pub e_prime: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for sisa.csv; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Draw shard hits without replacement (no closed form).
    #[arg(long)]
    pub without_replacement: bool,
    /// Batched slicing draws integer slice indices (no closed form).
    #[arg(long)]
    pub discrete_slices: bool,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(&resolve(&args)?),
        Command::Unlearn { run, method } => {
            let cfg = resolve(&run)?;
            let methods = match method {
                Some(m) => vec![m.parse()?],
                None => cfg.methods.clone(),
            };
            for m in methods {
                cmd_unlearn(&cfg, m)?;
            }
            Ok(())
        }
        Command::Sisa(args) => cmd_sisa(&args),
    }
}

fn resolve(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct TraceRow {
    epoch: usize,
    loss: f64,
}

/// Train `theta_o`; writes `params.bin` and `train_trace.csv`.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<()> {
    let (train, _) = cfg.load_data()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let (params, trace) = baselines::train_with_trace(&cfg.encoder, &train, &cfg.train_config())?;
    params.write_file(cfg.out_dir.join(PARAMS_FILE))?;
    let mut w = csv::Writer::from_path(cfg.out_dir.join(TRAIN_TRACE_FILE))?;
    for (i, loss) in trace.into_iter().enumerate() {
        w.serialize(TraceRow { epoch: i + 1, loss })?;
    }
    w.flush()?;
    if cfg.encoder.has_head() && cfg.train.loss == crate::loss::TrainLoss::CrossEntropy {
        log::info!(
            "training accuracy {:.4}",
            metrics::accuracy(&cfg.encoder, &params, &train)?
        );
    }
    Ok(())
}

/// Output of one method on one split.
pub struct MethodRun {
    pub theta_u: ParamVector,
    pub report: UnlearnReport,
}

/// Run one method against a prepared split. Timing covers the method only.
pub fn run_method(
    cfg: &ExperimentConfig,
    method: Method,
    theta_o: &ParamVector,
    train: &Dataset,
    split: &UnlearnSplit,
) -> Result<MethodRun> {
    let spec = &cfg.encoder;
    let unlearn_cfg = |margin: MarginMode| -> UnlearnConfig {
        let base = match margin {
            MarginMode::Fixed(a) => UnlearnConfig {
                margin: MarginMode::Fixed(a),
                centroids: crate::manif_smc::CentroidSource::Current,
                ..cfg.unlearn.clone()
            },
            MarginMode::Adaptive => cfg.unlearn.clone(),
        };
        UnlearnConfig {
            k: split.k,
            seed: seed::sub_seed(cfg.seed, stream::UNLEARN),
            ..base
        }
    };
    let start = Instant::now();
    let report = match method {
        Method::ManifSmc => manif_smc_unlearn(spec, theta_o, train, split, &unlearn_cfg(MarginMode::Adaptive))?,
        Method::ManifFixed => manif_smc_unlearn(
            spec,
            theta_o,
            train,
            split,
            &unlearn_cfg(MarginMode::Fixed(cfg.fixed_alpha)),
        )?,
        Method::FinetuneAfter => {
            let mut report = manif_smc_unlearn(spec, theta_o, train, split, &unlearn_cfg(MarginMode::Adaptive))?;
            let ft = TrainConfig {
                seed: seed::sub_seed(cfg.seed, stream::FINETUNE),
                ..cfg.finetune.clone()
            };
            report.theta_u = baselines::fine_tune(spec, &report.theta_u, &split.retained_data(train), &ft)?;
            report
        }
        Method::Ga => {
            let ga = GaConfig {
                loss: cfg.train.loss,
                ..cfg.ga.clone()
            };
            let theta_u = baselines::gradient_ascent_unlearn(spec, theta_o, &split.erased_data(train), &ga)?;
            UnlearnReport {
                theta_u,
                trace: Vec::new(),
                last_path: None,
                rt_seconds: 0.0,
            }
        }
        Method::Retrain => {
            let rc = TrainConfig {
                seed: seed::sub_seed(cfg.seed, stream::RETRAIN),
                ..cfg.train.clone()
            };
            let theta_u = baselines::retrain_from_scratch(spec, train, &split.retained, &rc)?;
            UnlearnReport {
                theta_u,
                trace: Vec::new(),
                last_path: None,
                rt_seconds: 0.0,
            }
        }
    };
    let rt = start.elapsed().as_secs_f64();
    Ok(MethodRun {
        theta_u: report.theta_u.clone(),
        report: UnlearnReport {
            rt_seconds: rt,
            ..report
        },
    })
}

/// Run `method` for every configured sample size, appending one row per
/// size to `results.csv` and writing the unlearned parameters, the JSON
/// report and the per-epoch trace next to it.
pub fn cmd_unlearn(cfg: &ExperimentConfig, method: Method) -> Result<Vec<ResultRow>> {
    let params_path = cfg.out_dir.join(PARAMS_FILE);
    if !params_path.exists() {
        return Err(Error::Config(format!(
            "trained parameters {} not found; run `train` first",
            params_path.display()
        )));
    }
    let theta_o = ParamVector::read_file(&params_path)?;
    let (train, test) = cfg.load_data()?;
    let mut rows = Vec::with_capacity(cfg.uss.len());
    for &uss in &cfg.uss {
        let split = datagen::make_split(
            &train,
            uss,
            cfg.unlearn.k,
            &cfg.encoder,
            &theta_o,
            cfg.split_seed(uss),
            cfg.erase_mode,
        )?;
        let out = run_method(cfg, method, &theta_o, &train, &split)?;
        let record = metrics::evaluate(
            &cfg.encoder,
            &out.theta_u,
            &train,
            &split,
            &test,
            out.report.rt_seconds,
            cfg.train.loss,
        )?;
        log::info!(
            "{} uss={uss}: mia {:.4} ra {:?} ta {:?} rt {:.3}s",
            method.name(),
            record.mia,
            record.ra,
            record.ta,
            record.rt_seconds
        );
        let stem = format!("{}_uss{uss}", method.name());
        out.theta_u.write_file(cfg.out_dir.join(format!("{stem}.bin")))?;
        out.report.write_json(cfg.out_dir.join(format!("{stem}.json")))?;
        out.report
            .write_trace_csv(cfg.out_dir.join(format!("{stem}_trace.csv")))?;
        let row = ResultRow::new(method.name(), uss, cfg.unlearn.k, method.margin_label(), &record);
        metrics::append_results_csv(cfg.out_dir.join(RESULTS_FILE), std::slice::from_ref(&row))?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SisaRow {
    pub kind: String,
    pub mode: String,
    pub n: Option<u64>,
    pub s: Option<u64>,
    pub k: u64,
    pub d: Option<u64>,
    pub r: Option<u64>,
    pub e_prime: Option<f64>,
    pub analytic: Option<f64>,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub z_score: Option<f64>,
}

/// One scenario of the SISA comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SisaScenario {
    Shard(ShardingScenario, RequestMode),
    Slice(SlicingScenario, RequestMode),
}

/// Sharding grid `N x S x K` and slicing grid `D x R x K` (e' = 1), each
/// in both modes. Sequential slicing ignores `K`, so it appears once per
/// `(D, R)`.
pub fn default_sisa_grid() -> Vec<SisaScenario> {
    let mut out = Vec::new();
    for n in [100, 1000] {
        for s in [1, 5, 10, 20] {
            for k in [1, 5, 20] {
                let sc = ShardingScenario { n, s, k };
                out.push(SisaScenario::Shard(sc, RequestMode::Sequential));
                out.push(SisaScenario::Shard(sc, RequestMode::Batched));
            }
        }
    }
    for d in [100, 300] {
        for r in [1, 2, 5, 20] {
            out.push(SisaScenario::Slice(
                SlicingScenario {
                    d,
                    r,
                    e_prime: 1.0,
                    k: 1,
                },
                RequestMode::Sequential,
            ));
            for k in [1, 5, 20] {
                out.push(SisaScenario::Slice(
                    SlicingScenario { d, r, e_prime: 1.0, k },
                    RequestMode::Batched,
                ));
            }
        }
    }
    out
}

fn mode_name(mode: RequestMode) -> &'static str {
    match mode {
        RequestMode::Sequential => "sequential",
        RequestMode::Batched => "batched",
    }
}

/// Evaluate scenarios in order; scenario `i` draws from its own sub-seed.
/// Rows whose simulator has no closed form leave `analytic` empty.
pub fn sisa_rows(
    scenarios: &[SisaScenario],
    trials: u64,
    global_seed: u64,
    process: ShardProcess,
    slice_model: SliceMinModel,
) -> Result<Vec<SisaRow>> {
    let base = seed::sub_seed(global_seed, stream::SISA);
    scenarios
        .iter()
        .enumerate()
        .map(|(i, sc)| {
            let mut rng = seed::rng(seed::sub_seed(base, i as u64));
            let (row, z) = match *sc {
                SisaScenario::Shard(sh, mode) => {
                    let est = sisa::simulate_shard_costs(&sh, mode, process, trials, &mut rng)?;
                    let analytic = match (mode, process) {
                        (RequestMode::Sequential, ShardProcess::IidUniform) => {
                            Some(sisa::expected_seq_shard_cost(&sh)?)
                        }
                        (RequestMode::Batched, _) => Some(sisa::expected_batch_shard_cost(&sh)?),
                        _ => None,
                    };
                    (
                        SisaRow {
                            kind: "shard".into(),
                            mode: mode_name(mode).into(),
                            n: Some(sh.n),
                            s: Some(sh.s),
                            k: sh.k,
                            d: None,
                            r: None,
                            e_prime: None,
                            analytic,
                            mc_mean: est.mean,
                            mc_stderr: est.std_error,
                            z_score: None,
                        },
                        analytic.map(|a| est.z_score(a)),
                    )
                }
                SisaScenario::Slice(sl, mode) => {
                    let est = sisa::simulate_slice_costs(&sl, mode, slice_model, trials, &mut rng)?;
                    let analytic = match (mode, slice_model) {
                        (RequestMode::Sequential, _) => Some(sisa::expected_seq_slice_cost(&sl)?),
                        (RequestMode::Batched, SliceMinModel::Continuous) => {
                            Some(sisa::expected_batch_slice_cost(&sl)?)
                        }
                        _ => None,
                    };
                    (
                        SisaRow {
                            kind: "slice".into(),
                            mode: mode_name(mode).into(),
                            n: None,
                            s: None,
                            k: sl.k,
                            d: Some(sl.d),
                            r: Some(sl.r),
                            e_prime: Some(sl.e_prime),
                            analytic,
                            mc_mean: est.mean,
                            mc_stderr: est.std_error,
                            z_score: None,
                        },
                        analytic.map(|a| est.z_score(a)),
                    )
                }
            };
            Ok(SisaRow { z_score: z, ..row })
        })
        .collect()
}

fn sisa_scenarios(args: &SisaArgs) -> Result<Vec<SisaScenario>> {
    let shard_given = args.n.is_some() || args.s.is_some();
    let slice_given = args.d.is_some() || args.r.is_some() || args.e_prime.is_some();
    if !shard_given && !slice_given {
        return Ok(default_sisa_grid());
    }
    let k = args.k.unwrap_or(1);
    let mut out = Vec::new();
    if shard_given {
        let (Some(n), Some(s)) = (args.n, args.s) else {
            return Err(Error::Config("sharding needs both --n and --s".into()));
        };
        let sc = ShardingScenario::new(n, s, k)?;
        out.push(SisaScenario::Shard(sc, RequestMode::Sequential));
        out.push(SisaScenario::Shard(sc, RequestMode::Batched));
    }
    if slice_given {
        let (Some(d), Some(r)) = (args.d, args.r) else {
            return Err(Error::Config("slicing needs both --d and --r".into()));
        };
        let sl = SlicingScenario::new(d, r, args.e_prime.unwrap_or(1.0), k)?;
        out.push(SisaScenario::Slice(sl, RequestMode::Sequential));
        out.push(SisaScenario::Slice(sl, RequestMode::Batched));
    }
    Ok(out)
}

pub fn write_sisa_csv<W: std::io::Write>(writer: W, rows: &[SisaRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_sisa(args: &SisaArgs) -> Result<()> {
    let scenarios = sisa_scenarios(args)?;
    let process = if args.without_replacement {
        ShardProcess::WithoutReplacement
    } else {
        ShardProcess::IidUniform
    };
    let model = if args.discrete_slices {
        SliceMinModel::Discrete
    } else {
        SliceMinModel::Continuous
    };
    let rows = sisa_rows(&scenarios, args.trials, args.seed, process, model)?;
    for row in rows.iter().filter(|r| r.z_score.is_some_and(|z| z > 3.0)) {
        log::warn!(
            "{} {} row off by {:.2} standard errors",
            row.kind,
            row.mode,
            row.z_score.unwrap_or(0.0)
        );
    }
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            write_sisa_csv(std::fs::File::create(dir.join(SISA_FILE))?, &rows)
        }
        None => write_sisa_csv(std::io::stdout().lock(), &rows),
    }
}
