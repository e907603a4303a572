//! Gaussian kernel evaluations shared by the ratio estimators and the
//! kernel classifier.
//!
//! All functions are pure. Sample matrices are `n × d` with one sample per
//! row.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest sample used by [`median_heuristic`].
pub const MEDIAN_SUBSAMPLE: usize = 1000;

const MEDIAN_SEED: u64 = 0x6d65_6469_616e;

/// Width of the Gaussian kernel `exp(-‖x − y‖² / (2σ²))`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelParams {
    sigma: f64,
}

impl KernelParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::param("sigma", format!("must be positive and finite, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    fn eval_sq_dist(&self, sq_dist: f64) -> f64 {
        (-sq_dist / (2.0 * self.sigma * self.sigma)).exp()
    }
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn gaussian_kernel(x: &[f64], y: &[f64], params: KernelParams) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kernel argument"));
    }
    Ok(params.eval_sq_dist(sq_dist(x, y)))
}

/// Kernel between two samples carrying confidence scores in `[0, 1]`:
/// `wx · wy · k(x, y)`.
pub fn weighted_kernel(x: &[f64], wx: f64, y: &[f64], wy: f64, params: KernelParams) -> Result<f64> {
    for w in [wx, wy] {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::param("confidence", format!("must lie in [0, 1], got {w}")));
        }
    }
    Ok(wx * wy * gaussian_kernel(x, y, params)?)
}

/// Copies the rows of `m` into a contiguous row-major buffer.
pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<f64> {
    let (n, d) = m.shape();
    let mut out = Vec::with_capacity(n * d);
    for i in 0..n {
        out.extend(m.row(i).iter());
    }
    out
}

/// `K[i, l] = k(X_i, C_l)`.
pub fn kernel_matrix(x: &DMatrix<f64>, centers: &DMatrix<f64>, params: KernelParams) -> Result<DMatrix<f64>> {
    let d = x.ncols();
    if centers.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: centers.ncols(),
        });
    }
    if x.iter().chain(centers.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kernel matrix input"));
    }
    let xr = rows_of(x);
    let cr = rows_of(centers);
    let (n, b) = (x.nrows(), centers.nrows());
    Ok(DMatrix::from_fn(n, b, |i, l| {
        if d == 0 {
            return 1.0;
        }
        params.eval_sq_dist(sq_dist(&xr[i * d..(i + 1) * d], &cr[l * d..(l + 1) * d]))
    }))
}

/// Gathers the given rows of `x` into a new matrix.
pub fn select_rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

/// Draws `min(max_centers, n)` distinct rows of `x` uniformly at random to
/// serve as kernel basis centers. Row order follows the original order.
pub fn sample_centers(x: &DMatrix<f64>, max_centers: usize, seed: u64) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if n == 0 || max_centers == 0 {
        return Err(Error::EmptyInput("no rows to draw basis centers from"));
    }
    let b = max_centers.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, n, b).into_vec();
    idx.sort_unstable();
    Ok(select_rows(x, &idx))
}

/// Median pairwise Euclidean distance, computed on a uniform subsample of at
/// most [`MEDIAN_SUBSAMPLE`] rows.
pub fn median_heuristic(x: &DMatrix<f64>) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::EmptyInput("median heuristic needs at least two points"));
    }
    let d = x.ncols();
    let rows = rows_of(x);
    let idx: Vec<usize> = if n > MEDIAN_SUBSAMPLE {
        let mut rng = ChaCha8Rng::seed_from_u64(MEDIAN_SEED);
        let mut v = index::sample(&mut rng, n, MEDIAN_SUBSAMPLE).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..n).collect()
    };
    let mut dists = Vec::with_capacity(idx.len() * (idx.len() - 1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            dists.push(sq_dist(&rows[i * d..(i + 1) * d], &rows[j * d..(j + 1) * d]).sqrt());
        }
    }
    if dists.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("median heuristic input"));
    }
    dists.sort_unstable_by(|a, b| a.total_cmp(b));
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if median <= 0.0 {
        return Err(Error::param("bandwidth", "median pairwise distance is zero"));
    }
    Ok(median)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn params(s: f64) -> KernelParams {
        KernelParams::new(s).unwrap()
    }

    #[test]
    fn rejects_bad_sigma() {
        assert!(KernelParams::new(0.0).is_err());
        assert!(KernelParams::new(-1.0).is_err());
        assert!(KernelParams::new(f64::NAN).is_err());
        assert!(KernelParams::new(f64::INFINITY).is_err());
    }

    #[test]
    fn kernel_anchor_values() {
        assert_eq!(gaussian_kernel(&[3.0, -2.0], &[3.0, -2.0], params(0.7)).unwrap(), 1.0);
        let s = 1.3;
        let k = gaussian_kernel(&[0.0], &[s * 2f64.sqrt()], params(s)).unwrap();
        assert_relative_eq!(k, (-1.0f64).exp(), epsilon = 1e-12);
        // squared distance 9 + 16 = 25, 2σ² = 12.5
        let k = gaussian_kernel(&[1.0, 5.0], &[4.0, 1.0], params(2.5)).unwrap();
        assert_relative_eq!(k, (-2.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn kernel_errors() {
        assert!(matches!(
            gaussian_kernel(&[1.0], &[1.0, 2.0], params(1.0)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            gaussian_kernel(&[f64::NAN], &[1.0], params(1.0)),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn weighted_kernel_cases() {
        let x = [0.3, 1.0];
        let y = [-1.0, 2.0];
        let p = params(0.9);
        assert_eq!(weighted_kernel(&x, 1.0, &y, 1.0, p).unwrap(), gaussian_kernel(&x, &y, p).unwrap());
        assert_eq!(weighted_kernel(&x, 0.0, &y, 0.7, p).unwrap(), 0.0);
        assert_eq!(weighted_kernel(&x, 0.5, &x, 0.5, p).unwrap(), 0.25);
        assert!(weighted_kernel(&x, 1.5, &y, 0.5, p).is_err());
        assert!(weighted_kernel(&x, 0.5, &y, -0.1, p).is_err());
    }

    #[test]
    fn kernel_matrix_shapes() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 5.0]);
        let c = DMatrix::from_row_slice(1, 2, &[4.0, 1.0]);
        let k = kernel_matrix(&x, &c, params(2.5)).unwrap();
        assert_eq!(k.shape(), (1, 1));
        assert_eq!(k[(0, 0)], gaussian_kernel(&[1.0, 5.0], &[4.0, 1.0], params(2.5)).unwrap());
        let bad = DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 0.0]);
        assert!(kernel_matrix(&x, &bad, params(1.0)).is_err());
    }

    #[test]
    fn self_kernel_is_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(50, 3, |_, _| StandardNormal.sample(&mut rng));
        let k = kernel_matrix(&x, &x, params(1.1)).unwrap();
        for i in 0..50 {
            assert_eq!(k[(i, i)], 1.0);
            for j in 0..50 {
                assert_eq!(k[(i, j)], k[(j, i)]);
            }
        }
        let shifted = &k + DMatrix::identity(50, 50) * 1e-9;
        let eig = shifted.symmetric_eigenvalues();
        assert!(eig.iter().all(|&e| e >= -1e-8), "min eigenvalue {}", eig.min());
    }

    #[test]
    fn median_small_cases() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 2.0]);
        assert_eq!(median_heuristic(&x).unwrap(), 2.0);
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
        assert_eq!(median_heuristic(&x).unwrap(), 1.0);
        assert!(median_heuristic(&DMatrix::from_row_slice(1, 1, &[0.0])).is_err());
        assert!(median_heuristic(&DMatrix::from_row_slice(3, 1, &[4.0, 4.0, 4.0])).is_err());
    }

    #[test]
    fn median_of_gaussian_cloud() {
        // Differences of two N(0, I₂) points are N(0, 2I₂); their norm is
        // √2 · chi₂ whose median is √2 · √(2 ln 2).
        let analytic = 2f64.sqrt() * (2.0 * 2f64.ln()).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(500, 2, |_, _| StandardNormal.sample(&mut rng));
        let m = median_heuristic(&x).unwrap();
        assert!((m - analytic).abs() / analytic < 0.2, "{m} vs {analytic}");
    }

    #[test]
    fn median_subsamples_large_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(3000, 2, |_, _| StandardNormal.sample(&mut rng));
        let a = median_heuristic(&x).unwrap();
        let b = median_heuristic(&x).unwrap();
        assert_eq!(a, b);
        assert!((a - 1.665).abs() < 0.2);
    }

    proptest! {
        #[test]
        fn kernel_symmetric_and_bounded(
            x in prop::collection::vec(-10.0f64..10.0, 3),
            y in prop::collection::vec(-10.0f64..10.0, 3),
            s in 0.05f64..5.0,
        ) {
            let p = params(s);
            let kxy = gaussian_kernel(&x, &y, p).unwrap();
            let kyx = gaussian_kernel(&y, &x, p).unwrap();
            prop_assert_eq!(kxy, kyx);
            prop_assert!((0.0..=1.0).contains(&kxy));
            if x != y {
                prop_assert!(kxy < 1.0);
            }
        }

        #[test]
        fn weighted_kernel_factorizes(
            x in prop::collection::vec(-3.0f64..3.0, 2),
            y in prop::collection::vec(-3.0f64..3.0, 2),
            wx in 0.0f64..=1.0,
            wy in 0.0f64..=1.0,
        ) {
            let p = params(1.0);
            let k = gaussian_kernel(&x, &y, p).unwrap();
            prop_assert_eq!(weighted_kernel(&x, wx, &y, wy, p).unwrap(), wx * wy * k);
        }
    }
}
