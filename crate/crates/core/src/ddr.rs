//! Discriminative density-ratio estimation.
//!
//! The joint ratio `p_ts(x, y) / p_tr(x, y)` is split per class into a
//! class-conditional ratio `β(x | c)` and a prior ratio `γ(c)`, and each
//! training sample is weighted by `β(x_i | y_i) · γ(y_i)`. Test labels are
//! unknown, so the procedure alternates:
//!
//! 1. fit an importance-weighted classifier on the training data (unit
//!    weights on the first pass);
//! 2. predict posteriors for the test rows;
//! 3. fit one soft-matching uLSIF ratio per class, with the test rows
//!    weighted by their posterior for that class;
//! 4. estimate the prior ratio from the soft test counts;
//! 5. combine into new weights.
//!
//! Every candidate weight vector is scored by the mutual information between
//! the test rows and the labels predicted by a classifier trained on it; the
//! best-scoring iteration is returned.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::classifier::{prepare_classifier, ClassifierGrid, ClassifierKind, ClassifierSpec};
use crate::density_ratio::{evaluate_ratio, select_soft_hyperparams, RatioGrid, RatioModel, RatioProblem, RidgeSystem, TestConfidence};
use crate::error::{Error, Result};
use crate::kernel::{sample_centers, select_rows, KernelParams};
use crate::labels::{Labels, PosteriorMatrix};

/// Test-posterior mass below which a class is treated as vanished.
pub const MIN_CLASS_MASS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdrConfig {
    pub max_iters: usize,
    /// Stop once `‖w⁽ᵗ⁾ − w⁽ᵗ⁻¹⁾‖₂` falls to this value. `None` means
    /// `1e-4 · √n_tr`.
    pub weight_tol: Option<f64>,
    pub classifier: ClassifierKind,
    pub classifier_grid: ClassifierGrid,
    pub ratio_grid: RatioGrid,
    /// Re-run the class-ratio hyperparameter search on every iteration
    /// instead of only the first.
    pub reselect_each_iter: bool,
    /// Divide each soft class ratio by the class's mean test posterior so it
    /// estimates `p_ts(x | c) / p_tr(x | c)` rather than
    /// `p_ts(c) · p_ts(x | c) / p_tr(x | c)`.
    pub normalize_class_ratio: bool,
    pub seed: u64,
}

impl Default for DdrConfig {
    fn default() -> Self {
        Self {
            max_iters: 20,
            weight_tol: None,
            classifier: ClassifierKind::Gnb,
            classifier_grid: ClassifierGrid::default(),
            ratio_grid: RatioGrid::default(),
            reselect_each_iter: false,
            normalize_class_ratio: true,
            seed: 0,
        }
    }
}

impl DdrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if let Some(t) = self.weight_tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::param("weight_tol", format!("must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub gamma: Vec<f64>,
    /// Mutual information of the test posteriors produced by a classifier
    /// trained on this iteration's weights.
    pub mutual_information: f64,
    pub weight_delta: f64,
    pub selected: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdrResult {
    pub weights: Vec<f64>,
    pub trace: Vec<IterationRecord>,
    /// Mutual information of the unit-weight classifier.
    pub initial_mutual_information: f64,
    /// `(σ, λ)` of each class ratio, `None` while a class had no test mass.
    pub class_hyperparams: Vec<Option<(f64, f64)>>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl DdrResult {
    pub fn selected_iteration(&self) -> Option<&IterationRecord> {
        self.trace.iter().find(|r| r.selected)
    }
}

/// `γ_c = p̂_ts(c) / p_tr(c)`, with `p̂_ts(c)` the mean test posterior of
/// class `c` and `p_tr(c)` its empirical training frequency.
pub fn estimate_prior_ratio(posteriors: &PosteriorMatrix, y_tr: &Labels) -> Result<Vec<f64>> {
    if posteriors.n_classes() != y_tr.n_classes() {
        return Err(Error::DimensionMismatch {
            expected: y_tr.n_classes(),
            got: posteriors.n_classes(),
        });
    }
    if posteriors.n_rows() == 0 {
        return Err(Error::EmptyInput("test posteriors"));
    }
    y_tr.require_all_present()?;
    let p_tr = y_tr.frequencies();
    Ok(posteriors.mean().iter().zip(&p_tr).map(|(ts, tr)| ts / tr).collect())
}

/// Running mean, exact when all inputs are equal.
fn running_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut mean = 0.0;
    for (k, v) in values.enumerate() {
        mean += (v - mean) / (k + 1) as f64;
    }
    mean
}

/// `H(p̂₀) − mean_t H(p̂_t)` with `p̂₀` the mean posterior and natural-log
/// entropies. Computed as the mean KL divergence of each row from `p̂₀`,
/// which is the same quantity.
pub fn mutual_information(posteriors: &PosteriorMatrix) -> f64 {
    let p = posteriors.probs();
    let (n, m) = p.shape();
    if n == 0 {
        return 0.0;
    }
    let prior: Vec<f64> = (0..m).map(|c| running_mean(p.column(c).iter().copied())).collect();
    let mut total = 0.0;
    for row in p.row_iter() {
        let mut kl = 0.0;
        for c in 0..m {
            let v = row[c];
            if v > 0.0 {
                kl += v * (v / prior[c]).ln();
            }
        }
        total += kl;
    }
    (total / n as f64).max(0.0)
}

/// `w_i = β_{y_i}(x_i) · γ_{y_i}`. `beta_per_class[c]` lists the ratio of
/// every class-`c` training sample in row order.
pub fn combine_weights(beta_per_class: &BTreeMap<usize, Vec<f64>>, gamma: &[f64], y_tr: &Labels) -> Result<Vec<f64>> {
    if gamma.len() != y_tr.n_classes() {
        return Err(Error::DimensionMismatch {
            expected: y_tr.n_classes(),
            got: gamma.len(),
        });
    }
    let counts = y_tr.counts();
    for (c, &count) in counts.iter().enumerate() {
        match beta_per_class.get(&c) {
            None if count > 0 => return Err(Error::EmptyClass(c)),
            Some(b) if b.len() != count => {
                return Err(Error::DimensionMismatch {
                    expected: count,
                    got: b.len(),
                });
            }
            _ => {}
        }
    }
    let mut cursor = vec![0usize; y_tr.n_classes()];
    let mut w = Vec::with_capacity(y_tr.len());
    for &c in y_tr.as_slice() {
        let b = beta_per_class[&c][cursor[c]];
        cursor[c] += 1;
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::param(
                "beta",
                format!("class {c} ratio {b} is not a finite non-negative value"),
            ));
        }
        w.push(b * gamma[c]);
    }
    Ok(w)
}

/// Per-class ratios of the class members, in row order.
pub type ClassRatios = BTreeMap<usize, Vec<f64>>;

/// Soft ratio fit for one class, with the training Gram factorized once so
/// later iterations only re-solve for a new `ŝ`.
struct ClassRatio {
    x_class: DMatrix<f64>,
    fitted: Option<FittedClassRatio>,
}

struct FittedClassRatio {
    sigma: f64,
    lambda: f64,
    problem: RatioProblem,
    system: RidgeSystem,
}

/// Shared inputs of the per-class ratio estimators.
pub struct ClassRatioEstimator {
    classes: Vec<ClassRatio>,
    members: Vec<Vec<usize>>,
    x_ts: DMatrix<f64>,
    centers: DMatrix<f64>,
    sigma_grid: Vec<f64>,
    grid: RatioGrid,
    normalize: bool,
    seed: u64,
}

impl ClassRatioEstimator {
    pub fn new(x_tr: &DMatrix<f64>, y_tr: &Labels, x_ts: &DMatrix<f64>, grid: &RatioGrid, normalize: bool, seed: u64) -> Result<Self> {
        if y_tr.len() != x_tr.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x_tr.nrows(),
                got: y_tr.len(),
            });
        }
        y_tr.require_all_present()?;
        let centers = sample_centers(x_ts, grid.max_centers, seed)?;
        let sigma_grid = grid.sigma_grid(x_tr, x_ts)?;
        let members: Vec<Vec<usize>> = (0..y_tr.n_classes()).map(|c| y_tr.members(c)).collect();
        let classes = members
            .iter()
            .map(|rows| ClassRatio {
                x_class: select_rows(x_tr, rows),
                fitted: None,
            })
            .collect();
        Ok(Self {
            classes,
            members,
            x_ts: x_ts.clone(),
            centers,
            sigma_grid,
            grid: grid.clone(),
            normalize,
            seed,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn hyperparams(&self) -> Vec<Option<(f64, f64)>> {
        self.classes
            .iter()
            .map(|c| c.fitted.as_ref().map(|f| (f.sigma, f.lambda)))
            .collect()
    }

    /// Class-conditional ratio of every training sample of class `c`,
    /// matched against test rows weighted by `conf`. Returns `None` when the
    /// class has (numerically) no test mass.
    pub fn class_ratio(&mut self, c: usize, conf: &TestConfidence, reselect: bool) -> Result<Option<Vec<f64>>> {
        let mass = conf.mass();
        if mass < MIN_CLASS_MASS {
            return Ok(None);
        }
        let entry = &mut self.classes[c];
        if entry.fitted.is_none() || reselect {
            let (sigma, lambda) = select_soft_hyperparams(
                &entry.x_class,
                &self.x_ts,
                Some(conf),
                &self.centers,
                &self.sigma_grid,
                &self.grid.lambda_grid,
                self.grid.folds,
                self.seed.wrapping_add(1 + c as u64),
            )?;
            let problem = RatioProblem::new(&entry.x_class, &self.x_ts, &self.centers, KernelParams::new(sigma)?)?;
            let system = RidgeSystem::new(&problem.s_hat, lambda)?;
            entry.fitted = Some(FittedClassRatio {
                sigma,
                lambda,
                problem,
                system,
            });
        }
        let f = entry.fitted.as_ref().expect("fitted above");
        let alpha = f.system.solve(&f.problem.s_vec(conf.values()))?;
        let model = RatioModel::new(self.centers.clone(), alpha, f.sigma, f.lambda)?;
        let mut beta = evaluate_ratio(&model, &entry.x_class)?;
        if self.normalize {
            let scale = self.x_ts.nrows() as f64 / mass;
            beta.iter_mut().for_each(|b| *b *= scale);
        }
        Ok(Some(beta))
    }

    /// Ratios for every class, with vanished classes set to one.
    pub fn all_class_ratios(&mut self, posteriors: &PosteriorMatrix, reselect: bool) -> Result<(ClassRatios, Vec<String>)> {
        if posteriors.n_classes() != self.n_classes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_classes(),
                got: posteriors.n_classes(),
            });
        }
        if posteriors.n_rows() != self.x_ts.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.x_ts.nrows(),
                got: posteriors.n_rows(),
            });
        }
        let mut out = BTreeMap::new();
        let mut warnings = vec![];
        for c in 0..self.n_classes() {
            let conf = TestConfidence::new(posteriors.column(c))?;
            let beta = match self.class_ratio(c, &conf, reselect)? {
                Some(b) => b,
                None => {
                    warnings.push(format!("class {c} has test posterior mass {:.3e}; ratio set to 1", conf.mass()));
                    vec![1.0; self.members[c].len()]
                }
            };
            out.insert(c, beta);
        }
        Ok((out, warnings))
    }
}

/// One pass of steps 3–5 with externally supplied test posteriors.
pub fn class_ratios(
    x_tr: &DMatrix<f64>,
    y_tr: &Labels,
    x_ts: &DMatrix<f64>,
    posteriors: &PosteriorMatrix,
    grid: &RatioGrid,
    normalize: bool,
    seed: u64,
) -> Result<ClassRatios> {
    let mut est = ClassRatioEstimator::new(x_tr, y_tr, x_ts, grid, normalize, seed)?;
    Ok(est.all_class_ratios(posteriors, false)?.0)
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Runs the iterative procedure and returns the weights of the iteration
/// with the highest mutual information (earliest on ties).
pub fn ddr_fit(x_tr: &DMatrix<f64>, y_tr: &Labels, x_ts: &DMatrix<f64>, config: &DdrConfig) -> Result<DdrResult> {
    config.validate()?;
    if x_ts.nrows() == 0 {
        return Err(Error::EmptyInput("test sample"));
    }
    if x_ts.ncols() != x_tr.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x_tr.ncols(),
            got: x_ts.ncols(),
        });
    }
    y_tr.require_all_present()?;
    let n_tr = x_tr.nrows();
    let tol = config.weight_tol.unwrap_or(1e-4 * (n_tr as f64).sqrt());

    let mut weights = vec![1.0; n_tr];
    let spec: ClassifierSpec = prepare_classifier(config.classifier, x_tr, y_tr, &weights, &config.classifier_grid, config.seed)?;
    let mut posteriors = spec.fit(x_tr, y_tr, &weights)?.predict_posterior(x_ts)?;
    let initial_mutual_information = mutual_information(&posteriors);

    let mut estimator = ClassRatioEstimator::new(
        x_tr,
        y_tr,
        x_ts,
        &config.ratio_grid,
        config.normalize_class_ratio,
        config.seed.wrapping_add(17),
    )?;
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut warnings = Vec::new();
    let mut converged = false;

    for t in 1..=config.max_iters {
        let reselect = config.reselect_each_iter && t > 1;
        let (betas, mut notes) = estimator.all_class_ratios(&posteriors, reselect)?;
        let gamma = estimate_prior_ratio(&posteriors, y_tr)?;
        let next = combine_weights(&betas, &gamma, y_tr)?;
        let delta = l2_distance(&next, &weights);

        let refit = spec.fit(x_tr, y_tr, &next).and_then(|m| m.predict_posterior(x_ts));
        let next_posteriors = match refit {
            Ok(p) => p,
            Err(e) if t > 1 => {
                warnings.push(format!("iteration {t}: classifier could not be fit ({e}); stopping"));
                break;
            }
            Err(e) => return Err(e),
        };
        if delta <= tol {
            notes.push(format!("weight change {delta:.3e} within tolerance {tol:.3e}"));
        }
        trace.push(IterationRecord {
            iteration: t,
            gamma,
            mutual_information: mutual_information(&next_posteriors),
            weight_delta: delta,
            selected: false,
            warnings: notes,
        });
        history.push(next.clone());
        weights = next;
        posteriors = next_posteriors;
        if delta <= tol {
            converged = true;
            break;
        }
    }

    let mut best = 0;
    for (i, r) in trace.iter().enumerate() {
        if r.mutual_information > trace[best].mutual_information {
            best = i;
        }
    }
    trace[best].selected = true;
    Ok(DdrResult {
        weights: history.swap_remove(best),
        trace,
        initial_mutual_information,
        class_hyperparams: estimator.hyperparams(),
        converged,
        warnings,
    })
}
