//! One seeded run of the synthetic unlearning experiment with every method
//! evaluated on the same split.

use manifold_unlearn::baselines;
use manifold_unlearn::cli::{run_method, ExperimentConfig, Method};
use manifold_unlearn::datagen::{make_split, Dataset, UnlearnSplit};
use manifold_unlearn::manif_smc::{dist, split_centroids, Distance};
use manifold_unlearn::metrics::{evaluate, MetricsRecord};
use manifold_unlearn::nn::{self, EncoderSpec, ParamVector};

pub struct Run {
    pub cfg: ExperimentConfig,
    pub train: Dataset,
    pub test: Dataset,
    pub theta_o: ParamVector,
    pub split: UnlearnSplit,
    pub original: MetricsRecord,
}

impl Run {
    pub fn new(seed: u64) -> Self {
        let cfg = ExperimentConfig {
            seed,
            ..ExperimentConfig::default()
        };
        let (train, test) = cfg.load_data().unwrap();
        let theta_o = baselines::train(&cfg.encoder, &train, &cfg.train_config()).unwrap();
        let uss = cfg.uss[0];
        let split = make_split(
            &train,
            uss,
            cfg.unlearn.k,
            &cfg.encoder,
            &theta_o,
            cfg.split_seed(uss),
            cfg.erase_mode,
        )
        .unwrap();
        let original = evaluate(&cfg.encoder, &theta_o, &train, &split, &test, 0.0, cfg.train.loss).unwrap();
        Self {
            cfg,
            train,
            test,
            theta_o,
            split,
            original,
        }
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.cfg.encoder
    }

    pub fn method(&self, m: Method) -> (ParamVector, MetricsRecord) {
        let r = run_method(&self.cfg, m, &self.theta_o, &self.train, &self.split).unwrap();
        let rec = evaluate(
            self.spec(),
            &r.theta_u,
            &self.train,
            &self.split,
            &self.test,
            0.0,
            self.cfg.train.loss,
        )
        .unwrap();
        (r.theta_u, rec)
    }

    /// Erased samples whose representation under `theta` is closer to the
    /// neighbor centroid than to the original representation.
    pub fn closer_count(&self, theta: &ParamVector) -> usize {
        let centroids = split_centroids(self.spec(), theta, &self.train, &self.split).unwrap();
        self.split
            .erased
            .iter()
            .enumerate()
            .filter(|&(p, &i)| {
                let f = nn::represent(self.spec(), theta, &self.train.inputs[i]).unwrap();
                dist(&f, &centroids[p], Distance::Euclidean).unwrap()
                    < dist(&f, &self.split.original_reps[p], Distance::Euclidean).unwrap()
            })
            .count()
    }
}
