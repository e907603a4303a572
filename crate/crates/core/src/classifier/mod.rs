//! Importance-weighted probabilistic classifiers and importance-weighted
//! cross-validation.

mod cv;
mod gnb;
mod wlspc;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use cv::{cross_validated_accuracy, iwcv_scores, iwcv_select, stratified_folds, weighted_error, IwcvScore};
pub use gnb::{fit_weighted_gnb, GnbModel, VARIANCE_FLOOR};
pub use wlspc::{fit_wlspc, WlspcModel};

use crate::density_ratio::{scaled_grid, DEFAULT_LAMBDA_GRID, DEFAULT_MAX_CENTERS, DEFAULT_SIGMA_FACTORS};
use crate::error::{Error, Result};
use crate::kernel::{median_heuristic, sample_centers};
use crate::labels::{Labels, PosteriorMatrix};

pub(crate) fn check_training(x: &DMatrix<f64>, y: &Labels, w: &[f64]) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::EmptyInput("training sample"));
    }
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if w.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: w.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features"));
    }
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::param("weights", "must be finite and non-negative"));
    }
    if !w.iter().any(|&v| v > 0.0) {
        return Err(Error::param("weights", "all weights are zero"));
    }
    y.require_all_present()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Gnb,
    Wlspc,
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gnb" => Ok(Self::Gnb),
            "wlspc" => Ok(Self::Wlspc),
            other => Err(Error::Config(format!("unknown classifier `{other}` (expected gnb or wlspc)"))),
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gnb => "gnb",
            Self::Wlspc => "wlspc",
        })
    }
}

/// A fitted classifier of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Gnb(GnbModel),
    Wlspc(WlspcModel),
}

impl Model {
    pub fn predict_posterior(&self, x: &DMatrix<f64>) -> Result<PosteriorMatrix> {
        match self {
            Model::Gnb(m) => m.predict_posterior(x),
            Model::Wlspc(m) => m.predict_posterior(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WlspcSettings {
    pub sigma: f64,
    pub lambda: f64,
    pub centers: DMatrix<f64>,
}

/// Everything needed to refit a classifier under new weights.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierSpec {
    Gnb,
    Wlspc(WlspcSettings),
}

impl ClassifierSpec {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Self::Gnb => ClassifierKind::Gnb,
            Self::Wlspc(_) => ClassifierKind::Wlspc,
        }
    }

    pub fn fit(&self, x: &DMatrix<f64>, y: &Labels, w: &[f64]) -> Result<Model> {
        match self {
            Self::Gnb => fit_weighted_gnb(x, y, w).map(Model::Gnb),
            Self::Wlspc(s) => fit_wlspc(x, y, w, s.sigma, s.lambda, &s.centers).map(Model::Wlspc),
        }
    }
}

/// Grids and fold count used when a WLSPC needs hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierGrid {
    /// Multipliers of the median pairwise distance of the training inputs.
    pub sigma_factors: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
    pub max_centers: usize,
}

impl Default for ClassifierGrid {
    fn default() -> Self {
        Self {
            sigma_factors: DEFAULT_SIGMA_FACTORS.to_vec(),
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            folds: 5,
            max_centers: DEFAULT_MAX_CENTERS,
        }
    }
}

/// Resolves a classifier kind into a fit-ready spec. For WLSPC this draws
/// the basis centers from the training rows and selects `(σ, λ)` by
/// importance-weighted cross-validation under `w`.
pub fn prepare_classifier(
    kind: ClassifierKind,
    x: &DMatrix<f64>,
    y: &Labels,
    w: &[f64],
    grid: &ClassifierGrid,
    seed: u64,
) -> Result<ClassifierSpec> {
    match kind {
        ClassifierKind::Gnb => Ok(ClassifierSpec::Gnb),
        ClassifierKind::Wlspc => {
            let base = median_heuristic(x)?;
            let sigmas = scaled_grid(base, &grid.sigma_factors);
            let (sigma, lambda) = iwcv_select(x, y, w, &sigmas, &grid.lambda_grid, grid.folds, seed)?;
            let centers = sample_centers(x, grid.max_centers, seed ^ 0x5eed)?;
            Ok(ClassifierSpec::Wlspc(WlspcSettings { sigma, lambda, centers }))
        }
    }
}
