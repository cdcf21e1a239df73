//! Nuclear-norm (MMCR) regularization of class centroids.
//!
//! The singular value decomposition is a one-sided (Hestenes) Jacobi
//! iteration: column pairs are rotated until mutually orthogonal, after
//! which the column norms are the singular values.

use crate::error::{Error, Result};

/// Rotation threshold on `|<a_p, a_q>| / (||a_p|| ||a_q||)`.
pub const JACOBI_TOL: f64 = 1e-10;
pub const MAX_SWEEPS: usize = 200;
/// Singular value gaps (and smallest values) below this are flagged.
pub const GAP_TOL: f64 = 1e-8;

/// `D x P` matrix stored as `P` columns of length `D`.
#[derive(Clone, Debug, PartialEq)]
pub struct CentroidMatrix {
    columns: Vec<Vec<f64>>,
}

impl CentroidMatrix {
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let d = columns.first().map(Vec::len).unwrap_or(0);
        if columns.is_empty() || d == 0 {
            return Err(Error::InvalidArgument(
                "centroid matrix needs at least one nonempty column".into(),
            ));
        }
        if columns.iter().any(|c| c.len() != d) {
            return Err(Error::InvalidArgument("centroid columns differ in length".into()));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite centroid entry".into()));
        }
        Ok(Self { columns })
    }

    pub fn rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.columns.iter().flatten().map(|v| v * v).sum()
    }

    fn transpose(&self) -> Vec<Vec<f64>> {
        (0..self.rows())
            .map(|i| self.columns.iter().map(|c| c[i]).collect())
            .collect()
    }
}

/// Thin SVD `A = sum_j sigma_j u_j v_j^T` with `sigma` nonincreasing.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
    pub v: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rotate(x: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = x.split_at_mut(q);
    for (xp, xq) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (a, b) = (*xp, *xq);
        *xp = c * a - s * b;
        *xq = s * a + c * b;
    }
}

/// Hestenes iteration on tall input (`columns.len() <= column length`).
fn hestenes(mut a: Vec<Vec<f64>>) -> Result<Svd> {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let sign = if zeta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence { sweeps: MAX_SWEEPS });
    }
    let sigma: Vec<f64> = a.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    let scale = sigma.iter().cloned().fold(0.0, f64::max);
    let u = order
        .iter()
        .map(|&j| {
            if sigma[j] > scale * 1e-14 && sigma[j] > 0.0 {
                a[j].iter().map(|x| x / sigma[j]).collect()
            } else {
                vec![0.0; a[j].len()]
            }
        })
        .collect();
    Ok(Svd {
        u,
        sigma: order.iter().map(|&j| sigma[j]).collect(),
        v: order.iter().map(|&j| v[j].clone()).collect(),
    })
}

pub fn jacobi_svd(m: &CentroidMatrix) -> Result<Svd> {
    if m.cols() <= m.rows() {
        hestenes(m.columns.clone())
    } else {
        let t = hestenes(m.transpose())?;
        Ok(Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        })
    }
}

/// `min(D, P)` singular values, nonincreasing.
pub fn singular_values(m: &CentroidMatrix) -> Result<Vec<f64>> {
    Ok(jacobi_svd(m)?.sigma)
}

/// Nuclear norm and its (sub)gradient `U V^T`, as columns of a `D x P`
/// matrix. Directions with a zero singular value contribute nothing.
/// The flag reports a singular value gap, or a smallest value, under
/// [`GAP_TOL`].
pub fn nuclear_norm_grad(m: &CentroidMatrix) -> Result<(f64, Vec<Vec<f64>>, bool)> {
    let svd = jacobi_svd(m)?;
    let mut grad = vec![vec![0.0; m.rows()]; m.cols()];
    for ((u, v), &s) in svd.u.iter().zip(&svd.v).zip(&svd.sigma) {
        if s == 0.0 || u.iter().all(|&x| x == 0.0) {
            continue;
        }
        for (col, &vc) in grad.iter_mut().zip(v) {
            for (g, &ui) in col.iter_mut().zip(u) {
                *g += ui * vc;
            }
        }
    }
    let near_degenerate =
        svd.sigma.windows(2).any(|w| w[0] - w[1] < GAP_TOL) || svd.sigma.last().is_some_and(|&s| s < GAP_TOL);
    Ok((svd.sigma.iter().sum(), grad, near_degenerate))
}

/// Additive MMCR loss term and its gradient with respect to every
/// representation, grouped like the input.
#[derive(Clone, Debug)]
pub struct MmcrTerm {
    pub loss: f64,
    pub nuclear_norm: f64,
    pub grads: Vec<Vec<Vec<f64>>>,
}

/// `-lambda * ||[m_1 .. m_P]||_*` where `m_c` is the L2-normalized mean of
/// group `c`.
pub fn mmcr_regularizer(groups: &[Vec<Vec<f64>>], lambda: f64) -> Result<MmcrTerm> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mmcr lambda {lambda} must be nonnegative"
        )));
    }
    if groups.is_empty() || groups.iter().any(Vec::is_empty) {
        return Err(Error::InvalidArgument(
            "every mmcr group needs at least one representation".into(),
        ));
    }
    let zero_grads = || -> Vec<Vec<Vec<f64>>> {
        groups
            .iter()
            .map(|g| g.iter().map(|r| vec![0.0; r.len()]).collect())
            .collect()
    };
    let mut means = Vec::with_capacity(groups.len());
    let mut norms = Vec::with_capacity(groups.len());
    for g in groups {
        let d = g[0].len();
        let mut mu = vec![0.0; d];
        for r in g {
            if r.len() != d {
                return Err(Error::InvalidArgument("representations differ in length".into()));
            }
            for (m, x) in mu.iter_mut().zip(r) {
                *m += x;
            }
        }
        mu.iter_mut().for_each(|m| *m /= g.len() as f64);
        let norm = dot(&mu, &mu).sqrt();
        if norm == 0.0 {
            return Err(Error::Numeric("zero group centroid cannot be normalized".into()));
        }
        means.push(mu);
        norms.push(norm);
    }
    let columns: Vec<Vec<f64>> = means
        .iter()
        .zip(&norms)
        .map(|(mu, n)| mu.iter().map(|x| x / n).collect())
        .collect();
    let matrix = CentroidMatrix::from_columns(columns)?;
    if lambda == 0.0 {
        let nuclear = singular_values(&matrix)?.iter().sum();
        return Ok(MmcrTerm {
            loss: 0.0,
            nuclear_norm: nuclear,
            grads: zero_grads(),
        });
    }
    let (nuclear, g_matrix, near_degenerate) = nuclear_norm_grad(&matrix)?;
    if near_degenerate {
        log::debug!("mmcr: near-repeated or vanishing singular values, using U V^T subgradient");
    }
    let grads = groups
        .iter()
        .zip(matrix.columns())
        .zip(&g_matrix)
        .zip(&norms)
        .map(|(((g, m), gc), &norm)| {
            // d(-lambda ||M||_*) / d mu = -lambda (I - m m^T) g / ||mu||
            let proj = dot(m, gc);
            let dmu: Vec<f64> = gc
                .iter()
                .zip(m)
                .map(|(gi, mi)| -lambda * (gi - mi * proj) / norm)
                .collect();
            let per = 1.0 / g.len() as f64;
            g.iter().map(|_| dmu.iter().map(|x| x * per).collect()).collect()
        })
        .collect();
    Ok(MmcrTerm {
        loss: -lambda * nuclear,
        nuclear_norm: nuclear,
        grads,
    })
}
