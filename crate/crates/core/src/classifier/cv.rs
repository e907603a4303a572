use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training, fit_wlspc, ClassifierSpec};
use crate::error::{Error, Result};
use crate::kernel::{sample_centers, select_rows};
use crate::labels::{Labels, PosteriorMatrix};

/// Stratified fold label per row. Each class is shuffled and dealt
/// round-robin, so every fold holds every class when each class has at
/// least `folds` members.
pub fn stratified_folds(y: &Labels, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::param("folds", format!("need at least 2, got {folds}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assign = vec![0; y.len()];
    for c in 0..y.n_classes() {
        let mut members = y.members(c);
        if members.len() < folds {
            return Err(Error::DegenerateFolds(format!(
                "class {c} has {} samples for {folds} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (pos, i) in members.into_iter().enumerate() {
            assign[i] = pos % folds;
        }
    }
    Ok(assign)
}

/// Importance-weighted 0-1 error: `Σ w_i 1[ŷ_i ≠ y_i] / Σ w_i`.
pub fn weighted_error(posteriors: &PosteriorMatrix, y: &Labels, w: &[f64]) -> Result<f64> {
    if y.len() != posteriors.n_rows() || w.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: posteriors.n_rows(),
            got: y.len().min(w.len()),
        });
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateFolds("held-out fold has zero total weight".into()));
    }
    let miss: f64 = posteriors
        .argmax()
        .iter()
        .zip(y.as_slice())
        .zip(w)
        .filter(|((p, t), _)| p != t)
        .map(|(_, w)| w)
        .sum();
    Ok(miss / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IwcvScore {
    pub sigma: f64,
    pub lambda: f64,
    pub error: f64,
}

fn split(assign: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
    (0..assign.len()).partition(|&i| assign[i] != f)
}

/// Mean importance-weighted held-out error of a WLSPC for every grid pair,
/// in σ-major order. Folds whose held-out rows all carry zero weight are
/// skipped.
pub fn iwcv_scores(
    x: &DMatrix<f64>,
    y: &Labels,
    w: &[f64],
    sigma_grid: &[f64],
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<Vec<IwcvScore>> {
    check_training(x, y, w)?;
    if sigma_grid.is_empty() || lambda_grid.is_empty() {
        return Err(Error::param("grid", "hyperparameter grid is empty"));
    }
    let assign = stratified_folds(y, folds, seed)?;
    let mut parts = Vec::with_capacity(folds);
    for f in 0..folds {
        let (fit_rows, out_rows) = split(&assign, f);
        let w_out: Vec<f64> = out_rows.iter().map(|&i| w[i]).collect();
        if w_out.iter().sum::<f64>() <= 0.0 {
            continue;
        }
        let x_fit = select_rows(x, &fit_rows);
        let centers = sample_centers(&x_fit, crate::density_ratio::DEFAULT_MAX_CENTERS, seed.wrapping_add(f as u64))?;
        parts.push((
            x_fit,
            y.subset(&fit_rows),
            fit_rows.iter().map(|&i| w[i]).collect::<Vec<_>>(),
            select_rows(x, &out_rows),
            y.subset(&out_rows),
            w_out,
            centers,
        ));
    }
    if parts.is_empty() {
        return Err(Error::DegenerateFolds("every held-out fold has zero total weight".into()));
    }
    let mut scores = Vec::with_capacity(sigma_grid.len() * lambda_grid.len());
    for &sigma in sigma_grid {
        for &lambda in lambda_grid {
            let mut err = 0.0;
            for (x_fit, y_fit, w_fit, x_out, y_out, w_out, centers) in &parts {
                let model = fit_wlspc(x_fit, y_fit, w_fit, sigma, lambda, centers)?;
                err += weighted_error(&model.predict_posterior(x_out)?, y_out, w_out)?;
            }
            scores.push(IwcvScore {
                sigma,
                lambda,
                error: err / parts.len() as f64,
            });
        }
    }
    Ok(scores)
}

/// Grid pair with the lowest importance-weighted held-out error. Ties go to
/// the larger λ, then the larger σ.
pub fn iwcv_select(
    x: &DMatrix<f64>,
    y: &Labels,
    w: &[f64],
    sigma_grid: &[f64],
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let scores = iwcv_scores(x, y, w, sigma_grid, lambda_grid, folds, seed)?;
    let mut best = scores[0];
    for s in &scores[1..] {
        let better = s.error < best.error
            || (s.error == best.error && (s.lambda > best.lambda || (s.lambda == best.lambda && s.sigma > best.sigma)));
        if better {
            best = *s;
        }
    }
    Ok((best.sigma, best.lambda))
}

/// Plain stratified k-fold accuracy with unit weights: the fraction of rows
/// classified correctly when held out.
pub fn cross_validated_accuracy(spec: &ClassifierSpec, x: &DMatrix<f64>, y: &Labels, folds: usize, seed: u64) -> Result<f64> {
    let assign = stratified_folds(y, folds, seed)?;
    let mut hits = 0usize;
    for f in 0..folds {
        let (fit_rows, out_rows) = split(&assign, f);
        let x_fit = select_rows(x, &fit_rows);
        let spec = match spec {
            ClassifierSpec::Gnb => ClassifierSpec::Gnb,
            ClassifierSpec::Wlspc(s) => {
                let mut s = s.clone();
                s.centers = sample_centers(&x_fit, s.centers.nrows(), seed.wrapping_add(f as u64))?;
                ClassifierSpec::Wlspc(s)
            }
        };
        let model = spec.fit(&x_fit, &y.subset(&fit_rows), &vec![1.0; fit_rows.len()])?;
        let pred = model.predict_posterior(&select_rows(x, &out_rows))?.argmax();
        hits += pred.iter().zip(&out_rows).filter(|(p, &i)| **p == y.get(i)).count();
    }
    Ok(hits as f64 / y.len() as f64)
}
