//! Gaussian naive Bayes with per-sample importance weights.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::check_training;
use crate::error::{Error, Result};
use crate::labels::{Labels, PosteriorMatrix};

/// Relative variance floor: a class variance never drops below this
/// fraction of the feature's variance over the whole training set.
pub const VARIANCE_FLOOR: f64 = 1e-9;
const ABSOLUTE_VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    priors: Vec<f64>,
    /// `m × d`
    means: DMatrix<f64>,
    /// `m × d`
    variances: DMatrix<f64>,
}

impl GnbModel {
    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }

    pub fn variances(&self) -> &DMatrix<f64> {
        &self.variances
    }

    pub fn n_classes(&self) -> usize {
        self.priors.len()
    }

    pub fn predict_posterior(&self, x: &DMatrix<f64>) -> Result<PosteriorMatrix> {
        let d = self.means.ncols();
        if x.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.ncols(),
            });
        }
        let m = self.n_classes();
        let log_norm: Vec<f64> = (0..m)
            .map(|c| {
                self.priors[c].ln()
                    - 0.5
                        * (0..d)
                            .map(|j| (2.0 * std::f64::consts::PI * self.variances[(c, j)]).ln())
                            .sum::<f64>()
            })
            .collect();
        let mut probs = DMatrix::zeros(x.nrows(), m);
        let mut logp = vec![0.0; m];
        for i in 0..x.nrows() {
            for c in 0..m {
                let mut acc = log_norm[c];
                for j in 0..d {
                    let diff = x[(i, j)] - self.means[(c, j)];
                    acc -= diff * diff / (2.0 * self.variances[(c, j)]);
                }
                logp[c] = acc;
            }
            let top = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logp.iter().map(|l| (l - top).exp()).sum();
            for c in 0..m {
                probs[(i, c)] = (logp[c] - top).exp() / z;
            }
        }
        PosteriorMatrix::new(probs)
    }
}

/// Weighted maximum-likelihood fit: priors `Σ_{i∈c} w_i / Σ_i w_i`, and
/// weighted per-feature means and variances per class.
pub fn fit_weighted_gnb(x: &DMatrix<f64>, y: &Labels, w: &[f64]) -> Result<GnbModel> {
    check_training(x, y, w)?;
    let (n, d) = x.shape();
    let m = y.n_classes();

    let floors: Vec<f64> = (0..d)
        .map(|j| {
            let col = x.column(j);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            (VARIANCE_FLOOR * var).max(ABSOLUTE_VARIANCE_FLOOR)
        })
        .collect();

    let mut mass = vec![0.0; m];
    let mut means: DMatrix<f64> = DMatrix::zeros(m, d);
    for i in 0..n {
        let c = y.get(i);
        mass[c] += w[i];
        for j in 0..d {
            means[(c, j)] += w[i] * x[(i, j)];
        }
    }
    if let Some(c) = mass.iter().position(|&s| s <= 0.0) {
        return Err(Error::EmptyClass(c));
    }
    for c in 0..m {
        for j in 0..d {
            means[(c, j)] /= mass[c];
        }
    }
    let mut variances: DMatrix<f64> = DMatrix::zeros(m, d);
    for i in 0..n {
        let c = y.get(i);
        for j in 0..d {
            let diff: f64 = x[(i, j)] - means[(c, j)];
            variances[(c, j)] += w[i] * diff * diff;
        }
    }
    for c in 0..m {
        for j in 0..d {
            variances[(c, j)] = (variances[(c, j)] / mass[c]).max(floors[j]);
        }
    }
    let total: f64 = mass.iter().sum();
    let priors = mass.iter().map(|s| s / total).collect();
    Ok(GnbModel { priors, means, variances })
}
