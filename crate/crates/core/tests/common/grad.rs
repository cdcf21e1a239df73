//! Finite-difference checks shared by the gradient tests and the
//! acceptance suite. Each returns the relative error of one random case.

use manifold_unlearn::baselines::batch_objective;
use manifold_unlearn::datagen::{make_split, EraseMode};
use manifold_unlearn::loss::TrainLoss;
use manifold_unlearn::manif_smc::{
    bezier_point, split_centroids, triplet_loss, triplet_loss_grad, BezierPath, Distance, PathObjective, RetainedLoss,
    RetainedObjective,
};
use manifold_unlearn::mmcr::{singular_values, CentroidMatrix};
use manifold_unlearn::nn::{self, Activation, EncoderSpec, ParamVector};
use manifold_unlearn::seed;
use rand::Rng;

use super::{jitter, numeric_grad, random_dataset, random_net, rel_err};

pub const H: f64 = 1e-5;

pub fn cross_entropy_case(case: u64) -> f64 {
    let (spec, theta) = random_net(case, 3, 3);
    let data = random_dataset(case, 6, 3, 3);
    let batch: Vec<usize> = (0..6).collect();
    let (_, g) = batch_objective(&spec, &theta, &data, &batch, TrainLoss::CrossEntropy, 0.0).unwrap();
    let n = numeric_grad(&theta, H, |t| {
        batch_objective(&spec, t, &data, &batch, TrainLoss::CrossEntropy, 0.0)
            .unwrap()
            .0
    });
    rel_err(g.as_slice(), &n)
}

pub fn reconstruction_case(case: u64) -> f64 {
    let mut rng = seed::rng(seed::sub_seed(case, 300));
    let d = rng.random_range(2..=4);
    let spec = EncoderSpec::uniform(vec![d, rng.random_range(2..=4), d], Activation::Tanh).unwrap();
    let theta = nn::init_params(&spec, &mut rng);
    let data = random_dataset(case, 5, d, 1);
    let batch: Vec<usize> = (0..5).collect();
    let (_, g) = batch_objective(&spec, &theta, &data, &batch, TrainLoss::RepresentationMse, 0.0).unwrap();
    let n = numeric_grad(&theta, H, |t| {
        batch_objective(&spec, t, &data, &batch, TrainLoss::RepresentationMse, 0.0)
            .unwrap()
            .0
    });
    rel_err(g.as_slice(), &n)
}

/// Cross-entropy plus the MMCR term; `None` when the centroid matrix has
/// singular values within `1e-3` of each other or of zero, where the
/// nuclear norm is not smooth at the finite-difference scale.
pub fn mmcr_case(case: u64) -> Option<f64> {
    let (spec, theta) = random_net(case, 3, 3);
    let data = random_dataset(case, 9, 3, 3);
    let batch: Vec<usize> = (0..9).collect();
    let columns: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            let mut mu = vec![0.0; spec.representation_dim()];
            for i in batch.iter().filter(|&&i| data.labels[i] == c) {
                let r = nn::represent(&spec, &theta, &data.inputs[*i]).unwrap();
                mu.iter_mut().zip(&r).for_each(|(m, x)| *m += x);
            }
            let norm = mu.iter().map(|x| x * x).sum::<f64>().sqrt();
            mu.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let sigma = singular_values(&CentroidMatrix::from_columns(columns).unwrap()).unwrap();
    if sigma.windows(2).any(|w| (w[0] - w[1]).abs() < 1e-3) || sigma.iter().any(|&s| s < 1e-3) {
        return None;
    }
    let lambda = 0.5;
    let (_, g) = batch_objective(&spec, &theta, &data, &batch, TrainLoss::CrossEntropy, lambda).unwrap();
    let n = numeric_grad(&theta, H, |t| {
        batch_objective(&spec, t, &data, &batch, TrainLoss::CrossEntropy, lambda)
            .unwrap()
            .0
    });
    Some(rel_err(g.as_slice(), &n))
}

/// Triplet loss at a point where no hinge sits near its kink; `None` when
/// the random instance lands within `1e-3` of one.
pub fn triplet_case(case: u64, metric: Distance) -> Option<f64> {
    let (spec, theta_o) = random_net(case, 3, 3);
    let data = random_dataset(case, 12, 3, 3);
    let split = make_split(&data, 4, 3, &spec, &theta_o, case, EraseMode::Uniform).unwrap();
    let theta = jitter(&theta_o, 0.3, seed::sub_seed(case, 1));
    let targets = split_centroids(&spec, &jitter(&theta_o, 0.3, seed::sub_seed(case, 2)), &data, &split).unwrap();
    let mut rng = seed::rng(seed::sub_seed(case, 3));
    let margins: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..0.5)).collect();
    for (p, &i) in split.erased.iter().enumerate() {
        let f = nn::represent(&spec, &theta, &data.inputs[i]).unwrap();
        let dc = metric.eval(&f, &targets[p]).unwrap();
        let dz = metric.eval(&f, &split.original_reps[p]).unwrap();
        if (dc - dz + margins[p]).abs() < 1e-3 {
            return None;
        }
    }
    let batch: Vec<usize> = (0..4).collect();
    let (v, g) = triplet_loss_grad(&spec, &theta, &data, &split, &batch, metric, &margins, &targets).unwrap();
    if v == 0.0 {
        return None;
    }
    let n = numeric_grad(&theta, H, |t| {
        triplet_loss(&spec, t, &data, &split, metric, &margins, &targets).unwrap()
    });
    Some(rel_err(g.as_slice(), &n))
}

/// Retained loss along the Bézier path, differentiated with respect to the
/// control point: `dL(phi_w(t))/dw = 2t(1-t) grad L(phi_w(t))`.
pub fn path_case(case: u64, loss: RetainedLoss) -> f64 {
    let (spec, theta_o) = random_net(case, 3, 3);
    let data = random_dataset(case, 8, 3, 3);
    let indices: Vec<usize> = (0..8).collect();
    let theta_u = jitter(&theta_o, 0.4, seed::sub_seed(case, 4));
    let w0 = jitter(&theta_o, 0.4, seed::sub_seed(case, 5));
    let t = seed::rng(seed::sub_seed(case, 6)).random_range(0.05..0.95);
    // distill targets come from a different model so the loss is not flat
    let reference = jitter(&theta_o, 0.4, seed::sub_seed(case, 7));
    let mut obj = RetainedObjective::new(&spec, &data, loss, &reference, &indices).unwrap();
    let point = |w: &ParamVector| {
        let path = BezierPath::new(theta_u.clone(), w.clone(), theta_o.clone()).unwrap();
        bezier_point(&path, t).unwrap()
    };
    let (_, g) = obj.loss_grad(&point(&w0), &indices).unwrap();
    let analytic = g.scale(2.0 * t * (1.0 - t));
    let n = numeric_grad(&w0, H, |w| obj.loss_grad(&point(w), &indices).unwrap().0);
    rel_err(analytic.as_slice(), &n)
}
