//! Direct density-ratio estimation by unconstrained least-squares importance
//! fitting (uLSIF) and its soft-matching variant.
//!
//! The ratio `p_ts(x) / p_tr(x)` is modelled as `β(x) = Σ_l α_l k(x, x_l)`
//! over a fixed set of basis centers. The coefficients solve the ridge
//! system `(Ŝ + λI) α = ŝ` where
//!
//! * `Ŝ[l, l'] = mean_i k(x_i, x_l) k(x_i, x_l')` over training rows, and
//! * `ŝ[l] = (1/n_ts) Σ_j c_j k(x_j, x_l)` over test rows, with `c_j ≡ 1`
//!   for plain uLSIF and `c_j = p(class | x_j)` for soft matching.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, KernelParams};

/// Multipliers applied to the median heuristic to build the σ grid.
pub const DEFAULT_SIGMA_FACTORS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [1e-3, 1e-2, 1e-1, 1.0, 10.0];
/// Upper bound on the number of basis centers drawn from the test set.
pub const DEFAULT_MAX_CENTERS: usize = 100;

/// Fitted kernel density-ratio function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioModel {
    centers: DMatrix<f64>,
    alpha: DVector<f64>,
    kernel: KernelParams,
    lambda: f64,
}

impl RatioModel {
    pub fn new(centers: DMatrix<f64>, alpha: DVector<f64>, sigma: f64, lambda: f64) -> Result<Self> {
        if centers.nrows() == 0 {
            return Err(Error::EmptyInput("ratio model needs at least one center"));
        }
        if alpha.len() != centers.nrows() {
            return Err(Error::DimensionMismatch {
                expected: centers.nrows(),
                got: alpha.len(),
            });
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("ratio coefficients"));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::param("lambda", format!("must be non-negative, got {lambda}")));
        }
        Ok(Self {
            centers,
            alpha,
            kernel: KernelParams::new(sigma)?,
            lambda,
        })
    }

    pub fn centers(&self) -> &DMatrix<f64> {
        &self.centers
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.kernel.sigma()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Unclipped `Σ_l α_l k(x, x_l)` per row.
    pub fn evaluate_raw(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let k = kernel_matrix(x, &self.centers, self.kernel)?;
        Ok(k * &self.alpha)
    }
}

/// Per-test-sample probability of belonging to the class being matched.
#[derive(Debug, Clone, PartialEq)]
pub struct TestConfidence(Vec<f64>);

impl TestConfidence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param("confidence", format!("must lie in [0, 1], got {v}")));
        }
        Ok(Self(values))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.0.iter().sum()
    }
}

fn check_inputs(x_tr: &DMatrix<f64>, x_ts: &DMatrix<f64>, centers: &DMatrix<f64>) -> Result<()> {
    if x_tr.nrows() == 0 {
        return Err(Error::EmptyInput("training sample"));
    }
    if x_ts.nrows() == 0 {
        return Err(Error::EmptyInput("test sample"));
    }
    if centers.nrows() == 0 {
        return Err(Error::EmptyInput("basis centers"));
    }
    for m in [x_ts, centers] {
        if m.ncols() != x_tr.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x_tr.ncols(),
                got: m.ncols(),
            });
        }
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::param("lambda", format!("must be strictly positive, got {lambda}")));
    }
    Ok(())
}

/// `Σ_i K[i, ·]ᵀ K[i, ·]` restricted to `rows` (unnormalized).
fn gram_sum(k: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    let b = k.ncols();
    let mut s = DMatrix::zeros(b, b);
    for &i in rows {
        let r = k.row(i);
        for l in 0..b {
            let kl = r[l];
            if kl == 0.0 {
                continue;
            }
            for m in l..b {
                s[(l, m)] += kl * r[m];
            }
        }
    }
    for l in 0..b {
        for m in 0..l {
            s[(l, m)] = s[(m, l)];
        }
    }
    s
}

/// `Σ_j c_j K[j, ·]` restricted to `rows` (unnormalized).
fn mean_kernel_sum(k: &DMatrix<f64>, conf: &[f64], rows: &[usize]) -> DVector<f64> {
    let b = k.ncols();
    let mut s = DVector::zeros(b);
    for &j in rows {
        let c = conf[j];
        if c == 0.0 {
            continue;
        }
        for l in 0..b {
            s[l] += c * k[(j, l)];
        }
    }
    s
}

/// Cholesky factor of `Ŝ + λI`, reusable across right-hand sides.
pub(crate) struct RidgeSystem {
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl RidgeSystem {
    pub(crate) fn new(s_hat: &DMatrix<f64>, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if s_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular);
        }
        let b = s_hat.nrows();
        let a = s_hat + DMatrix::identity(b, b) * lambda;
        let chol = Cholesky::new(a).ok_or(Error::Singular)?;
        Ok(Self { chol })
    }

    pub(crate) fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let alpha = self.chol.solve(rhs);
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::Singular);
        }
        Ok(alpha)
    }
}

/// Kernel matrices of one (training set, test set, centers, σ) combination.
/// The training Gram `Ŝ` is fixed; only the confidence-weighted `ŝ` changes
/// between soft fits.
pub(crate) struct RatioProblem {
    pub(crate) k_ts: DMatrix<f64>,
    pub(crate) s_hat: DMatrix<f64>,
}

impl RatioProblem {
    pub(crate) fn new(x_tr: &DMatrix<f64>, x_ts: &DMatrix<f64>, centers: &DMatrix<f64>, kernel: KernelParams) -> Result<Self> {
        check_inputs(x_tr, x_ts, centers)?;
        let k_tr = kernel_matrix(x_tr, centers, kernel)?;
        let k_ts = kernel_matrix(x_ts, centers, kernel)?;
        let all: Vec<usize> = (0..x_tr.nrows()).collect();
        let s_hat = gram_sum(&k_tr, &all) / x_tr.nrows() as f64;
        Ok(Self { k_ts, s_hat })
    }

    pub(crate) fn s_vec(&self, conf: &[f64]) -> DVector<f64> {
        let all: Vec<usize> = (0..self.k_ts.nrows()).collect();
        mean_kernel_sum(&self.k_ts, conf, &all) / self.k_ts.nrows() as f64
    }
}

/// Fits the plain uLSIF ratio `p_ts / p_tr`.
pub fn fit_ulsif(x_tr: &DMatrix<f64>, x_ts: &DMatrix<f64>, centers: &DMatrix<f64>, sigma: f64, lambda: f64) -> Result<RatioModel> {
    let conf = TestConfidence::ones(x_ts.nrows());
    fit_soft_ulsif(x_tr, x_ts, &conf, centers, sigma, lambda)
}

/// Fits the soft-matching ratio: every test row contributes to `ŝ` in
/// proportion to its confidence.
pub fn fit_soft_ulsif(
    x_tr: &DMatrix<f64>,
    x_ts: &DMatrix<f64>,
    conf: &TestConfidence,
    centers: &DMatrix<f64>,
    sigma: f64,
    lambda: f64,
) -> Result<RatioModel> {
    check_lambda(lambda)?;
    if conf.len() != x_ts.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x_ts.nrows(),
            got: conf.len(),
        });
    }
    if conf.mass() <= 0.0 {
        return Err(Error::EmptyInput("confidence vector is all zero"));
    }
    let kernel = KernelParams::new(sigma)?;
    let problem = RatioProblem::new(x_tr, x_ts, centers, kernel)?;
    let system = RidgeSystem::new(&problem.s_hat, lambda)?;
    let alpha = system.solve(&problem.s_vec(conf.values()))?;
    RatioModel::new(centers.clone(), alpha, sigma, lambda)
}

/// Evaluates the fitted ratio with negative values clipped to zero.
pub fn evaluate_ratio(model: &RatioModel, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x.ncols() != model.centers.ncols() {
        return Err(Error::DimensionMismatch {
            expected: model.centers.ncols(),
            got: x.ncols(),
        });
    }
    Ok(model.evaluate_raw(x)?.iter().map(|v| v.max(0.0)).collect())
}

/// Mean held-out uLSIF objective for one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub sigma: f64,
    pub lambda: f64,
    pub objective: f64,
}

/// Round-robin fold labels over a seeded permutation of `0..n`.
pub(crate) fn fold_assignment(n: usize, folds: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut fold = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

fn check_grid(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::param(name, "grid is empty"));
    }
    Ok(())
}

/// Cross-validated held-out objective `J = ½ αᵀ Ŝ α − ŝᵀ α` for every
/// `(σ, λ)` pair, in σ-major order.
#[allow(clippy::too_many_arguments)]
pub fn heldout_objectives(
    x_tr: &DMatrix<f64>,
    x_ts: &DMatrix<f64>,
    conf: Option<&TestConfidence>,
    centers: &DMatrix<f64>,
    sigma_grid: &[f64],
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<Vec<GridScore>> {
    check_grid("sigma", sigma_grid)?;
    check_grid("lambda", lambda_grid)?;
    check_inputs(x_tr, x_ts, centers)?;
    if folds < 2 {
        return Err(Error::param("folds", format!("need at least 2, got {folds}")));
    }
    let (n_tr, n_ts) = (x_tr.nrows(), x_ts.nrows());
    if n_tr < folds || n_ts < folds {
        return Err(Error::DegenerateFolds(format!(
            "{folds} folds over {n_tr} training and {n_ts} test rows"
        )));
    }
    let ones;
    let conf = match conf {
        Some(c) => {
            if c.len() != n_ts {
                return Err(Error::DimensionMismatch {
                    expected: n_ts,
                    got: c.len(),
                });
            }
            c.values()
        }
        None => {
            ones = vec![1.0; n_ts];
            &ones[..]
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tr_fold = fold_assignment(n_tr, folds, &mut rng);
    let ts_fold = fold_assignment(n_ts, folds, &mut rng);
    let rows_in =
        |assign: &[usize], f: usize| -> Vec<usize> { assign.iter().enumerate().filter(|(_, &a)| a == f).map(|(i, _)| i).collect() };
    let tr_rows: Vec<Vec<usize>> = (0..folds).map(|f| rows_in(&tr_fold, f)).collect();
    let ts_rows: Vec<Vec<usize>> = (0..folds).map(|f| rows_in(&ts_fold, f)).collect();

    let mut scores = Vec::with_capacity(sigma_grid.len() * lambda_grid.len());
    for &sigma in sigma_grid {
        let kernel = KernelParams::new(sigma)?;
        let k_tr = kernel_matrix(x_tr, centers, kernel)?;
        let k_ts = kernel_matrix(x_ts, centers, kernel)?;
        let s_parts: Vec<DMatrix<f64>> = tr_rows.iter().map(|r| gram_sum(&k_tr, r)).collect();
        let h_parts: Vec<DVector<f64>> = ts_rows.iter().map(|r| mean_kernel_sum(&k_ts, conf, r)).collect();
        let s_total: DMatrix<f64> = s_parts.iter().fold(DMatrix::zeros(centers.nrows(), centers.nrows()), |a, s| a + s);
        let h_total: DVector<f64> = h_parts.iter().fold(DVector::zeros(centers.nrows()), |a, h| a + h);

        let mut per_lambda = vec![0.0; lambda_grid.len()];
        for f in 0..folds {
            let (nf_tr, nf_ts) = (tr_rows[f].len() as f64, ts_rows[f].len() as f64);
            let s_fit = (&s_total - &s_parts[f]) / (n_tr as f64 - nf_tr);
            let h_fit = (&h_total - &h_parts[f]) / (n_ts as f64 - nf_ts);
            let s_out = &s_parts[f] / nf_tr;
            let h_out = &h_parts[f] / nf_ts;
            for (li, &lambda) in lambda_grid.iter().enumerate() {
                let alpha = RidgeSystem::new(&s_fit, lambda)?.solve(&h_fit)?;
                let j = 0.5 * alpha.dot(&(&s_out * &alpha)) - h_out.dot(&alpha);
                per_lambda[li] += j / folds as f64;
            }
        }
        for (li, &lambda) in lambda_grid.iter().enumerate() {
            scores.push(GridScore {
                sigma,
                lambda,
                objective: per_lambda[li],
            });
        }
    }
    Ok(scores)
}

/// First minimum in σ-major order.
fn argmin(scores: &[GridScore]) -> GridScore {
    let mut best = scores[0];
    for s in &scores[1..] {
        if s.objective < best.objective {
            best = *s;
        }
    }
    best
}

/// Picks `(σ, λ)` minimizing the mean held-out uLSIF objective.
pub fn select_hyperparams(
    x_tr: &DMatrix<f64>,
    x_ts: &DMatrix<f64>,
    centers: &DMatrix<f64>,
    sigma_grid: &[f64],
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    select_soft_hyperparams(x_tr, x_ts, None, centers, sigma_grid, lambda_grid, folds, seed)
}

/// As [`select_hyperparams`], with test rows weighted by `conf` in the
/// held-out objective.
#[allow(clippy::too_many_arguments)]
pub fn select_soft_hyperparams(
    x_tr: &DMatrix<f64>,
    x_ts: &DMatrix<f64>,
    conf: Option<&TestConfidence>,
    centers: &DMatrix<f64>,
    sigma_grid: &[f64],
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let scores = heldout_objectives(x_tr, x_ts, conf, centers, sigma_grid, lambda_grid, folds, seed)?;
    let best = argmin(&scores);
    Ok((best.sigma, best.lambda))
}

/// Hyperparameter search space for a ratio model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioGrid {
    /// Multipliers of the median pairwise distance of the pooled inputs.
    pub sigma_factors: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
    pub max_centers: usize,
}

impl Default for RatioGrid {
    fn default() -> Self {
        Self {
            sigma_factors: DEFAULT_SIGMA_FACTORS.to_vec(),
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            folds: 5,
            max_centers: DEFAULT_MAX_CENTERS,
        }
    }
}

impl RatioGrid {
    /// σ candidates scaled by the median pairwise distance of the rows of
    /// both samples.
    pub fn sigma_grid(&self, x_tr: &DMatrix<f64>, x_ts: &DMatrix<f64>) -> Result<Vec<f64>> {
        let pooled = stack_rows(x_tr, x_ts)?;
        Ok(scaled_grid(crate::kernel::median_heuristic(&pooled)?, &self.sigma_factors))
    }
}

/// Vertical concatenation of two sample matrices.
pub fn stack_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            got: b.ncols(),
        });
    }
    let na = a.nrows();
    Ok(DMatrix::from_fn(na + b.nrows(), a.ncols(), |i, j| {
        if i < na {
            a[(i, j)]
        } else {
            b[(i - na, j)]
        }
    }))
}

/// Plain uLSIF with centers drawn from the test rows and `(σ, λ)` chosen by
/// held-out objective.
pub fn fit_ulsif_auto(x_tr: &DMatrix<f64>, x_ts: &DMatrix<f64>, grid: &RatioGrid, seed: u64) -> Result<RatioModel> {
    let centers = crate::kernel::sample_centers(x_ts, grid.max_centers, seed)?;
    let sigmas = grid.sigma_grid(x_tr, x_ts)?;
    let (sigma, lambda) = select_hyperparams(x_tr, x_ts, &centers, &sigmas, &grid.lambda_grid, grid.folds, seed.wrapping_add(1))?;
    fit_ulsif(x_tr, x_ts, &centers, sigma, lambda)
}

/// `base × factor` for every factor.
pub fn scaled_grid(base: f64, factors: &[f64]) -> Vec<f64> {
    factors.iter().map(|f| base * f).collect()
}
