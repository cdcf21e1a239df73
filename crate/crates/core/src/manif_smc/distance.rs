use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Distance between representations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    Euclidean,
    SquaredEuclidean,
    /// `1 - cos(a, b)`.
    Cosine,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Distance {
    pub fn eval(self, a: &[f64], b: &[f64]) -> Result<f64> {
        Ok(self.eval_grad(a, b)?.0)
    }

    /// Distance and its gradient with respect to `a`.
    ///
    /// The Euclidean distance uses the subgradient 0 at `a == b`.
    pub fn eval_grad(self, a: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len("distance operands", a.len(), b.len())?;
        match self {
            Distance::SquaredEuclidean => {
                let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                let d = dot(&diff, &diff);
                Ok((d, diff.into_iter().map(|v| 2.0 * v).collect()))
            }
            Distance::Euclidean => {
                let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                let d = dot(&diff, &diff).sqrt();
                let grad = if d > 0.0 {
                    diff.into_iter().map(|v| v / d).collect()
                } else {
                    vec![0.0; a.len()]
                };
                Ok((d, grad))
            }
            Distance::Cosine => {
                let na = dot(a, a).sqrt();
                let nb = dot(b, b).sqrt();
                if na == 0.0 || nb == 0.0 {
                    return Err(Error::ZeroVector);
                }
                let cos = dot(a, b) / (na * nb);
                let grad = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| -(y / (na * nb) - cos * x / (na * na)))
                    .collect();
                Ok((1.0 - cos, grad))
            }
        }
    }
}

/// Convenience wrapper over [`Distance::eval`].
pub fn dist(a: &[f64], b: &[f64], metric: Distance) -> Result<f64> {
    metric.eval(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identical_points_are_at_zero() {
        let a = [0.3, -1.2, 2.0];
        for m in [Distance::Euclidean, Distance::SquaredEuclidean, Distance::Cosine] {
            assert_relative_eq!(dist(&a, &a, m).unwrap(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn hand_values() {
        assert_eq!(dist(&[0.0, 0.0], &[3.0, 4.0], Distance::Euclidean).unwrap(), 5.0);
        assert_eq!(
            dist(&[0.0, 0.0], &[3.0, 4.0], Distance::SquaredEuclidean).unwrap(),
            25.0
        );
        assert_eq!(dist(&[1.0, 0.0], &[0.0, 1.0], Distance::Cosine).unwrap(), 1.0);
    }

    #[test]
    fn cosine_rejects_zero() {
        assert!(matches!(
            dist(&[0.0, 0.0], &[1.0, 0.0], Distance::Cosine),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let a = [0.4, -0.7, 1.3];
        let b = [-0.2, 0.5, 0.9];
        let h = 1e-6;
        for m in [Distance::Euclidean, Distance::SquaredEuclidean, Distance::Cosine] {
            let (_, g) = m.eval_grad(&a, &b).unwrap();
            for i in 0..3 {
                let mut p = a;
                let mut q = a;
                p[i] += h;
                q[i] -= h;
                let fd = (m.eval(&p, &b).unwrap() - m.eval(&q, &b).unwrap()) / (2.0 * h);
                assert_relative_eq!(g[i], fd, epsilon = 1e-8);
            }
        }
    }
}
