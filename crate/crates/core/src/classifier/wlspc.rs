//! Importance-weighted least-squares probabilistic classifier.
//!
//! For every class `c` a kernel model `f_c(x) = Σ_l θ_cl k(x, x_l)` is fit
//! to the indicator `1[y = c]` by weighted ridge regression. Posteriors are
//! the clipped outputs normalized across classes.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::check_training;
use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, KernelParams};
use crate::labels::{Labels, PosteriorMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WlspcModel {
    centers: DMatrix<f64>,
    /// `b × m`, one column per class.
    coefficients: DMatrix<f64>,
    kernel: KernelParams,
    lambda: f64,
    class_proportions: Vec<f64>,
}

impl WlspcModel {
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn centers(&self) -> &DMatrix<f64> {
        &self.centers
    }

    pub fn sigma(&self) -> f64 {
        self.kernel.sigma()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_classes(&self) -> usize {
        self.coefficients.ncols()
    }

    /// Weighted class proportions of the training data.
    pub fn class_proportions(&self) -> &[f64] {
        &self.class_proportions
    }

    /// Raw `n × m` outputs before clipping.
    pub fn decision_values(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.centers.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.centers.ncols(),
                got: x.ncols(),
            });
        }
        Ok(kernel_matrix(x, &self.centers, self.kernel)? * &self.coefficients)
    }

    pub fn predict_posterior(&self, x: &DMatrix<f64>) -> Result<PosteriorMatrix> {
        let raw = self.decision_values(x)?.map(|v| v.max(0.0));
        Ok(PosteriorMatrix::normalize_rows(raw, &self.class_proportions))
    }
}

/// Minimizes `Σ_i w_i (f_c(x_i) − 1[y_i = c])² + λ ‖θ_c‖²` for every class.
pub fn fit_wlspc(x: &DMatrix<f64>, y: &Labels, w: &[f64], sigma: f64, lambda: f64, centers: &DMatrix<f64>) -> Result<WlspcModel> {
    check_training(x, y, w)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::param("lambda", format!("must be strictly positive, got {lambda}")));
    }
    if centers.nrows() == 0 {
        return Err(Error::EmptyInput("basis centers"));
    }
    if centers.ncols() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: centers.ncols(),
        });
    }
    let kernel = KernelParams::new(sigma)?;
    let m = y.n_classes();
    let mut mass = vec![0.0; m];
    for (i, &c) in y.as_slice().iter().enumerate() {
        mass[c] += w[i];
    }
    let total: f64 = mass.iter().sum();

    let phi = kernel_matrix(x, centers, kernel)?;
    let b = centers.nrows();
    let mut weighted = phi.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= w[i];
    }
    let lhs = weighted.transpose() * &phi + DMatrix::identity(b, b) * lambda;
    let chol = Cholesky::new(lhs).ok_or(Error::Singular)?;

    let mut coefficients = DMatrix::zeros(b, m);
    for c in 0..m {
        let target = DVector::from_fn(x.nrows(), |i, _| if y.get(i) == c { 1.0 } else { 0.0 });
        let theta = chol.solve(&(weighted.transpose() * target));
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Singular);
        }
        coefficients.set_column(c, &theta);
    }
    Ok(WlspcModel {
        centers: centers.clone(),
        coefficients,
        kernel,
        lambda,
        class_proportions: mass.iter().map(|s| s / total).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::sample_centers;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn two_blobs(n: usize, seed: u64) -> (DMatrix<f64>, Labels) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let neg = Normal::new(-3.0, 1.0).unwrap();
        let pos = Normal::new(3.0, 1.0).unwrap();
        let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = DMatrix::from_fn(n, 1, |i, _| if y[i] == 0 { neg.sample(&mut rng) } else { pos.sample(&mut rng) });
        (x, Labels::new(y, 2).unwrap())
    }

    #[test]
    fn separates_blobs() {
        let (x, y) = two_blobs(200, 1);
        let centers = sample_centers(&x, 100, 2).unwrap();
        let m = fit_wlspc(&x, &y, &vec![1.0; 200], 1.0, 0.1, &centers).unwrap();
        let acc = m.predict_posterior(&x).unwrap().accuracy(&y).unwrap();
        assert!(acc >= 0.95, "accuracy {acc}");
    }

    #[test]
    fn duplicate_equals_double_weight() {
        let (x, y) = two_blobs(40, 3);
        let centers = sample_centers(&x, 15, 4).unwrap();
        let mut w = vec![1.0; 40];
        w[7] = 2.0;
        let doubled = fit_wlspc(&x, &y, &w, 1.5, 0.05, &centers).unwrap();

        let mut rows: Vec<usize> = (0..40).collect();
        rows.push(7);
        let xd = crate::kernel::select_rows(&x, &rows);
        let yd = y.subset(&rows);
        let dup = fit_wlspc(&xd, &yd, &vec![1.0; 41], 1.5, 0.05, &centers).unwrap();
        for (a, b) in doubled.coefficients().iter().zip(dup.coefficients().iter()) {
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn unit_weights_match_kernel_ridge() {
        let (x, y) = two_blobs(30, 5);
        let centers = sample_centers(&x, 10, 6).unwrap();
        let m = fit_wlspc(&x, &y, &vec![1.0; 30], 1.0, 0.3, &centers).unwrap();
        let phi = kernel_matrix(&x, &centers, KernelParams::new(1.0).unwrap()).unwrap();
        let t = DVector::from_fn(30, |i, _| if y.get(i) == 1 { 1.0 } else { 0.0 });
        let lhs = phi.transpose() * &phi + DMatrix::identity(10, 10) * 0.3;
        let theta = lhs.lu().solve(&(phi.transpose() * t)).unwrap();
        for l in 0..10 {
            assert!((theta[l] - m.coefficients()[(l, 1)]).abs() <= 1e-9);
        }
    }

    #[test]
    fn far_away_rows_fall_back_to_proportions() {
        let (x, y) = two_blobs(20, 7);
        let centers = sample_centers(&x, 5, 8).unwrap();
        let mut w = vec![1.0; 20];
        w[0] = 3.0;
        let m = fit_wlspc(&x, &y, &w, 0.5, 0.1, &centers).unwrap();
        let p = m.predict_posterior(&DMatrix::from_row_slice(1, 1, &[1e6])).unwrap();
        assert_eq!(p.probs()[(0, 0)], m.class_proportions()[0]);
        assert!((m.class_proportions()[0] - 12.0 / 22.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let (x, y) = two_blobs(10, 9);
        let c = sample_centers(&x, 4, 1).unwrap();
        assert!(fit_wlspc(&x, &y, &[0.0; 10], 1.0, 0.1, &c).is_err());
        assert!(fit_wlspc(&x, &y, &[1.0; 10], 1.0, 0.0, &c).is_err());
        let absent = Labels::new(vec![0; 10], 2).unwrap();
        assert!(matches!(
            fit_wlspc(&x, &absent, &[1.0; 10], 1.0, 0.1, &c),
            Err(Error::EmptyClass(1))
        ));
        let m = fit_wlspc(&x, &y, &[1.0; 10], 1.0, 0.1, &c).unwrap();
        assert!(m.predict_posterior(&DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn posterior_rows_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = DMatrix::from_fn(60, 2, |_, _| rng.random_range(-2.0..2.0));
        let y = Labels::new((0..60).map(|i| i % 3).collect(), 3).unwrap();
        let w: Vec<f64> = (0..60).map(|_| rng.random_range(0.0..2.0)).collect();
        let c = sample_centers(&x, 20, 11).unwrap();
        let m = fit_wlspc(&x, &y, &w, 0.8, 0.01, &c).unwrap();
        let q = DMatrix::from_fn(200, 2, |_, _| rng.random_range(-4.0..4.0));
        let p = m.predict_posterior(&q).unwrap();
        for row in p.probs().row_iter() {
            assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!((row.sum() - 1.0).abs() <= 1e-9);
        }
    }
}
