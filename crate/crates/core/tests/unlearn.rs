mod common;

use manifold_unlearn::baselines::{
    self, batch_objective, fine_tune, gradient_ascent_unlearn, retrain_from_scratch, GaConfig, TrainConfig,
};
use manifold_unlearn::cli::Method;
use manifold_unlearn::datagen::{gen_gaussian_clusters, make_split, Dataset, EraseMode, UnlearnSplit};
use manifold_unlearn::loss::{per_sample_losses, TrainLoss};
use manifold_unlearn::manif_smc::{dist, manif_smc_unlearn, split_centroids, triplet_loss, Distance, UnlearnConfig};
use manifold_unlearn::metrics::{accuracy, evaluate, mia_from_losses};
use manifold_unlearn::nn::{self, Activation, EncoderSpec, ParamVector};

struct Setup {
    spec: EncoderSpec,
    train: Dataset,
    test: Dataset,
    theta_o: ParamVector,
}

fn two_clusters(seed: u64) -> Setup {
    let spec = EncoderSpec::uniform(vec![2, 8, 4, 2], Activation::Tanh).unwrap();
    let train = gen_gaussian_clusters(2, 50, 2, 0.5, seed).unwrap();
    let test = gen_gaussian_clusters(2, 50, 2, 0.5, seed + 1000).unwrap();
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let theta_o = baselines::train(&spec, &train, &cfg).unwrap();
    Setup {
        spec,
        train,
        test,
        theta_o,
    }
}

fn split_of(s: &Setup, uss: usize, seed: u64) -> UnlearnSplit {
    make_split(&s.train, uss, 5, &s.spec, &s.theta_o, seed, EraseMode::Uniform).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_loss(spec: &EncoderSpec, theta: &ParamVector, d: &Dataset) -> f64 {
    mean(&per_sample_losses(spec, theta, TrainLoss::CrossEntropy, &d.inputs, &d.labels).unwrap())
}

#[test]
fn zero_epochs_return_the_original_bits() {
    let s = two_clusters(1);
    let split = split_of(&s, 10, 1);
    let cfg = UnlearnConfig {
        epochs: 0,
        ..UnlearnConfig::default()
    };
    let report = manif_smc_unlearn(&s.spec, &s.theta_o, &s.train, &split, &cfg).unwrap();
    assert_eq!(report.theta_u.to_bytes(), s.theta_o.to_bytes());
    assert!(report.trace.is_empty());
}

#[test]
fn satisfied_margins_leave_parameters_unchanged() {
    let s = two_clusters(2);
    let mut split = split_of(&s, 10, 2);
    // originals far away: every erased sample is already closer to its centroid
    for z in &mut split.original_reps {
        z.iter_mut().for_each(|x| *x = 1e3);
    }
    let cfg = UnlearnConfig::fixed_margin(0.0);
    let targets = split_centroids(&s.spec, &s.theta_o, &s.train, &split).unwrap();
    let loss = triplet_loss(
        &s.spec,
        &s.theta_o,
        &s.train,
        &split,
        Distance::Euclidean,
        &[0.0; 10],
        &targets,
    )
    .unwrap();
    assert_eq!(loss, 0.0);
    let report = manif_smc_unlearn(&s.spec, &s.theta_o, &s.train, &split, &cfg).unwrap();
    assert_eq!(report.theta_u, s.theta_o);
    assert!(report.trace.iter().all(|t| t.triplet_loss == 0.0));
}

#[test]
fn erased_samples_move_toward_their_centroids() {
    let s = two_clusters(3);
    let split = split_of(&s, 10, 3);
    let report = manif_smc_unlearn(&s.spec, &s.theta_o, &s.train, &split, &UnlearnConfig::default()).unwrap();
    let theta_u = &report.theta_u;
    let centroids = split_centroids(&s.spec, theta_u, &s.train, &split).unwrap();
    let closer = split
        .erased
        .iter()
        .enumerate()
        .filter(|&(p, &i)| {
            let f = nn::represent(&s.spec, theta_u, &s.train.inputs[i]).unwrap();
            dist(&f, &centroids[p], Distance::Euclidean).unwrap()
                < dist(&f, &split.original_reps[p], Distance::Euclidean).unwrap()
        })
        .count();
    assert!(
        closer >= 9,
        "only {closer}/10 erased samples moved toward their centroid"
    );
}

#[test]
fn unlearning_is_deterministic() {
    let s = two_clusters(4);
    let split = split_of(&s, 10, 4);
    let cfg = UnlearnConfig {
        seed: 11,
        ..UnlearnConfig::default()
    };
    let a = manif_smc_unlearn(&s.spec, &s.theta_o, &s.train, &split, &cfg).unwrap();
    let b = manif_smc_unlearn(&s.spec, &s.theta_o, &s.train, &split, &cfg).unwrap();
    assert_eq!(a.theta_u.to_bytes(), b.theta_u.to_bytes());
    assert_eq!(a.trace, b.trace);
}

#[test]
fn training_separates_three_tight_clusters() {
    let d = gen_gaussian_clusters(3, 100, 2, 0.05, 5).unwrap();
    let cfg = TrainConfig {
        seed: 5,
        ..TrainConfig::default()
    };
    let probe = EncoderSpec::uniform(vec![2, 3, 3], Activation::Identity).unwrap();
    assert!(accuracy(&probe, &baselines::train(&probe, &d, &cfg).unwrap(), &d).unwrap() >= 0.99);
    let spec = EncoderSpec::uniform(vec![2, 8, 3], Activation::Tanh).unwrap();
    let a = baselines::train(&spec, &d, &cfg).unwrap();
    assert!(accuracy(&spec, &a, &d).unwrap() >= 0.99);
    assert_eq!(a.to_bytes(), baselines::train(&spec, &d, &cfg).unwrap().to_bytes());
}

#[test]
fn retraining_on_everything_matches_training() {
    let s = two_clusters(6);
    let cfg = TrainConfig {
        seed: 6,
        epochs: 20,
        ..TrainConfig::default()
    };
    let all: Vec<usize> = (0..s.train.len()).collect();
    assert_eq!(
        retrain_from_scratch(&s.spec, &s.train, &all, &cfg).unwrap(),
        baselines::train(&s.spec, &s.train, &cfg).unwrap()
    );
}

#[test]
fn retrained_model_treats_erased_like_test_data() {
    let s = two_clusters(7);
    let split = split_of(&s, 10, 7);
    let theta_r = retrain_from_scratch(
        &s.spec,
        &s.train,
        &split.retained,
        &TrainConfig {
            seed: 8,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    assert!(accuracy(&s.spec, &theta_r, &split.retained_data(&s.train)).unwrap() >= 0.95);
    let loss =
        |d: &Dataset| per_sample_losses(&s.spec, &theta_r, TrainLoss::CrossEntropy, &d.inputs, &d.labels).unwrap();
    let (le, lt) = (loss(&split.erased_data(&s.train)), loss(&s.test));
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
    };
    let pooled = (((le.len() - 1) as f64 * var(&le) + (lt.len() - 1) as f64 * var(&lt))
        / (le.len() + lt.len() - 2) as f64)
        .sqrt();
    assert!((mean(&le) - mean(&lt)).abs() < 2.0 * pooled);
}

#[test]
fn one_ascent_step_adds_the_scaled_gradient() {
    let s = two_clusters(9);
    let erased = split_of(&s, 10, 9).erased_data(&s.train);
    let eps = 0.05;
    let cfg = GaConfig {
        steps: 1,
        lr: eps,
        early_stop: false,
        ..GaConfig::default()
    };
    let out = gradient_ascent_unlearn(&s.spec, &s.theta_o, &erased, &cfg).unwrap();
    let all: Vec<usize> = (0..erased.len()).collect();
    let (_, g) = batch_objective(&s.spec, &s.theta_o, &erased, &all, TrainLoss::CrossEntropy, 0.0).unwrap();
    let mut expected = s.theta_o.clone();
    expected.axpy(eps, &g).unwrap();
    assert_eq!(out, expected);
}

#[test]
fn ascent_raises_erased_loss_every_step() {
    let s = two_clusters(10);
    let erased = split_of(&s, 10, 10).erased_data(&s.train);
    let losses: Vec<f64> = (0..6)
        .map(|steps| {
            let cfg = GaConfig {
                steps,
                lr: 0.5,
                early_stop: false,
                ..GaConfig::default()
            };
            mean_loss(
                &s.spec,
                &gradient_ascent_unlearn(&s.spec, &s.theta_o, &erased, &cfg).unwrap(),
                &erased,
            )
        })
        .collect();
    assert!(losses.windows(2).all(|w| w[1] > w[0]), "{losses:?}");
}

#[test]
fn fine_tuning_does_not_lower_retained_accuracy() {
    let s = two_clusters(11);
    let split = split_of(&s, 10, 11);
    let theta_u = manif_smc_unlearn(&s.spec, &s.theta_o, &s.train, &split, &UnlearnConfig::default())
        .unwrap()
        .theta_u;
    let retained = split.retained_data(&s.train);
    let tuned = fine_tune(
        &s.spec,
        &theta_u,
        &retained,
        &TrainConfig {
            epochs: 2,
            lr: 0.02,
            seed: 12,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    assert!(accuracy(&s.spec, &tuned, &retained).unwrap() >= accuracy(&s.spec, &theta_u, &retained).unwrap());
}

#[test]
fn fine_tuning_a_converged_model_barely_moves_it() {
    let d = gen_gaussian_clusters(2, 50, 2, 0.2, 13).unwrap();
    let spec = EncoderSpec::uniform(vec![2, 8, 2], Activation::Tanh).unwrap();
    let theta = baselines::train(
        &spec,
        &d,
        &TrainConfig {
            epochs: 400,
            lr: 0.2,
            seed: 13,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let tuned = fine_tune(
        &spec,
        &theta,
        &d,
        &TrainConfig {
            epochs: 2,
            lr: 0.02,
            seed: 14,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    assert!((mean_loss(&spec, &tuned, &d) - mean_loss(&spec, &theta, &d)).abs() < 1e-3);
}

#[test]
fn accuracy_matches_confusion_counts() {
    let s = two_clusters(15);
    let mut confusion = [[0usize; 2]; 2];
    for (x, &y) in s.test.inputs.iter().zip(&s.test.labels) {
        let logits = nn::forward(&s.spec, &s.theta_o, x).unwrap().logits.unwrap();
        confusion[y][usize::from(logits[1] > logits[0])] += 1;
    }
    let expected = (confusion[0][0] + confusion[1][1]) as f64 / s.test.len() as f64;
    assert_eq!(accuracy(&s.spec, &s.theta_o, &s.test).unwrap(), expected);
}

#[test]
fn original_model_sits_near_the_false_positive_floor() {
    let s = two_clusters(16);
    let split = split_of(&s, 20, 16);
    let m = evaluate(
        &s.spec,
        &s.theta_o,
        &s.train,
        &split,
        &s.test,
        0.0,
        TrainLoss::CrossEntropy,
    )
    .unwrap();
    let sigma = (0.25f64 / 20.0).sqrt();
    assert!(m.mia < 0.5 + 3.0 * sigma, "mia {}", m.mia);
    for v in [m.mia, m.ra.unwrap(), m.ta.unwrap()] {
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn training_members_look_less_like_non_members() {
    let mut gap = 0.0;
    for seed in 0..5 {
        // overlapping classes and a wide net: the model memorizes its members
        let spec = EncoderSpec::uniform(vec![2, 32, 2], Activation::Tanh).unwrap();
        let train = gen_gaussian_clusters(2, 20, 2, 2.0, seed).unwrap();
        let test = gen_gaussian_clusters(2, 20, 2, 2.0, seed + 1000).unwrap();
        let cfg = TrainConfig {
            epochs: 1000,
            lr: 0.2,
            seed,
            ..TrainConfig::default()
        };
        let theta = baselines::train(&spec, &train, &cfg).unwrap();
        let loss =
            |d: &Dataset| per_sample_losses(&spec, &theta, TrainLoss::CrossEntropy, &d.inputs, &d.labels).unwrap();
        let (members, held_out) = (loss(&train), loss(&test));
        let reference = &members[10..];
        gap += mia_from_losses(&held_out, reference).unwrap() - mia_from_losses(&members[..10], reference).unwrap();
    }
    assert!(gap >= 0.0, "members flagged more often than held-out data ({gap})");
}

#[test]
fn unlearning_raises_mia_on_the_synthetic_split() {
    let run = common::experiment::Run::new(0);
    let (_, after) = run.method(Method::ManifSmc);
    assert!(after.mia > run.original.mia, "{} -> {}", run.original.mia, after.mia);
}
