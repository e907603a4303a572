//! Deliberately biased train/test splits with known selection probabilities.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Steepness of the logistic selection curve in units of the projection's
/// standard deviation.
const SELECTION_SCALE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasedSplit {
    pub train: Dataset,
    pub test: Dataset,
    /// `P(s = 1 | x)` for each kept training row.
    pub selection_prob: Vec<f64>,
    /// `1 / P(s = 1 | x)`.
    pub oracle_importance: Vec<f64>,
    pub omega: Vec<f64>,
}

/// Moves `p` toward one half, one ulp at a time, until `(1/p)·p` rounds to
/// exactly one.
fn exact_reciprocal(mut p: f64) -> f64 {
    while (1.0 / p) * p != 1.0 {
        let bits = p.to_bits();
        p = f64::from_bits(if p < 0.5 { bits + 1 } else { bits - 1 });
    }
    p
}

/// `P(s = 1 | x) = 1 / (1 + e^{−v})` with `v = 4·ωᵀ(x − x̄) / σ`, where `x̄`
/// and the sample standard deviation `σ` of the projection are taken over
/// the rows of `pool`.
pub fn selection_probabilities(pool: &DMatrix<f64>, omega: &[f64]) -> Result<Vec<f64>> {
    let (n, d) = pool.shape();
    if omega.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: omega.len(),
        });
    }
    if omega.iter().any(|w| !w.is_finite()) || omega.iter().all(|&w| w == 0.0) {
        return Err(Error::param("omega", "must be a finite non-zero vector"));
    }
    if n < 2 {
        return Err(Error::EmptyInput("selection pool"));
    }
    let proj: Vec<f64> = pool.row_iter().map(|r| r.iter().zip(omega).map(|(x, w)| x * w).sum()).collect();
    let mean = proj.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = proj.iter().map(|p| p - mean).collect();
    let sd = (centered.iter().map(|c| c * c).sum::<f64>() / (n - 1) as f64).sqrt();
    let scale = proj.iter().fold(0.0f64, |a, p| a.max(p.abs()));
    if sd.is_nan() || sd <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::param("omega", "projection of the data is constant"));
    }
    Ok(centered
        .iter()
        .map(|c| {
            let v = SELECTION_SCALE * c / sd;
            let p = (1.0 / (1.0 + (-v).exp())).clamp(f64::EPSILON, 1.0 - f64::EPSILON);
            exact_reciprocal(p)
        })
        .collect())
}

/// Indices kept by independent Bernoulli draws with the given probabilities.
pub fn subsample(probs: &[f64], rng: &mut impl Rng) -> Vec<usize> {
    probs
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| rng.random_bool(p).then_some(i))
        .collect()
}

/// Half the rows, uniformly at random, form the test set; the rest are
/// kept for training with probability [`selection_probabilities`].
pub fn biased_split(data: &Dataset, omega: &[f64], seed: u64) -> Result<BiasedSplit> {
    let n = data.n_rows();
    if n < 4 {
        return Err(Error::param("data", format!("needs at least 4 rows, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (test_idx, pool_idx) = order.split_at(n / 2);
    let mut test_idx = test_idx.to_vec();
    let mut pool_idx = pool_idx.to_vec();
    test_idx.sort_unstable();
    pool_idx.sort_unstable();

    let pool = data.rows(&pool_idx);
    let probs = selection_probabilities(pool.x(), omega)?;
    let kept = subsample(&probs, &mut rng);
    if kept.is_empty() {
        return Err(Error::EmptyInput("biased training selection"));
    }
    let selection_prob: Vec<f64> = kept.iter().map(|&i| probs[i]).collect();
    Ok(BiasedSplit {
        train: pool.rows(&kept),
        test: data.rows(&test_idx),
        oracle_importance: selection_prob.iter().map(|p| 1.0 / p).collect(),
        selection_prob,
        omega: omega.to_vec(),
    })
}

/// Draws `candidates` vectors uniformly from `[−1, 1]^d` and returns the one
/// maximizing `acc_oracle − acc_unweighted` as reported by `eval` (first on
/// ties).
pub fn choose_bias_vector<F>(data: &Dataset, candidates: usize, seed: u64, mut eval: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<(f64, f64)>,
{
    if candidates == 0 {
        return Err(Error::param("candidates", "must be at least 1"));
    }
    let d = data.n_features();
    if d == 0 {
        return Err(Error::EmptyInput("features"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..candidates {
        let omega: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let (unweighted, oracle) = eval(&omega)?;
        let gap = oracle - unweighted;
        if best.as_ref().is_none_or(|(g, _)| gap > *g) {
            best = Some((gap, omega));
        }
    }
    Ok(best.map(|(_, w)| w).expect("at least one candidate"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_two_class_four_cluster, Domain};
    use std::collections::BTreeSet;

    fn line(n: usize) -> Dataset {
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { i as f64 } else { 1.0 });
        Dataset::new(x, Some((0..n as i64).map(|i| i % 2).collect()), "line").unwrap()
    }

    #[test]
    fn midpoint_has_half_probability() {
        let pool = DMatrix::from_row_slice(3, 1, &[-1.0, 0.0, 1.0]);
        let p = selection_probabilities(&pool, &[1.0]).unwrap();
        assert_eq!(p[1], 0.5);
        // v = 4·(±1)/1
        assert!((p[2] - 1.0 / (1.0 + (-4.0f64).exp())).abs() <= 1e-15);
        assert!((p[0] + p[2] - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn constant_projection_is_rejected() {
        let d = line(10);
        assert!(matches!(biased_split(&d, &[0.0, 1.0], 1), Err(e) if e.is_config()));
        assert!(biased_split(&d, &[0.0, 0.0], 1).is_err());
        assert!(biased_split(&d, &[1.0], 1).is_err());
        assert!(biased_split(&line(3), &[1.0, 0.0], 1).is_err());
    }

    #[test]
    fn split_partitions_rows() {
        let d = line(41);
        let s = biased_split(&d, &[1.0, 0.3], 5).unwrap();
        assert_eq!(s.test.n_rows(), 20);
        let test: BTreeSet<i64> = s.test.x().column(0).iter().map(|&v| v as i64).collect();
        let train: BTreeSet<i64> = s.train.x().column(0).iter().map(|&v| v as i64).collect();
        assert!(test.is_disjoint(&train));
        assert_eq!(train.len(), s.train.n_rows());
        for (p, r) in s.selection_prob.iter().zip(&s.oracle_importance) {
            assert!(*p > 0.0 && *p < 1.0);
            assert_eq!(p * r, 1.0);
        }
        assert_eq!(biased_split(&d, &[1.0, 0.3], 5).unwrap(), s);
    }

    #[test]
    fn reciprocal_is_exact_for_many_values() {
        let pool = DMatrix::from_fn(5000, 1, |i, _| ((i * 7919) % 5000) as f64 / 37.0);
        for p in selection_probabilities(&pool, &[1.3]).unwrap() {
            assert_eq!((1.0 / p) * p, 1.0);
        }
    }

    #[test]
    fn keep_frequency_matches_probability() {
        let pool = DMatrix::from_fn(12, 2, |i, j| (i as f64 * 0.37 + j as f64).sin());
        let probs = selection_probabilities(&pool, &[0.8, -0.5]).unwrap();
        let reps = 4000;
        let mut counts = vec![0usize; probs.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..reps {
            for i in subsample(&probs, &mut rng) {
                counts[i] += 1;
            }
        }
        for (c, p) in counts.iter().zip(&probs) {
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            assert!((*c as f64 / reps as f64 - p).abs() <= 4.0 * se);
        }
    }

    #[test]
    fn bias_vector_choice() {
        let d = line(10);
        let single = choose_bias_vector(&d, 1, 3, |_| Ok((0.5, 0.5))).unwrap();
        let mut seen = vec![];
        let first = choose_bias_vector(&d, 5, 3, |w| {
            seen.push(w.to_vec());
            Ok((0.5, 0.5))
        })
        .unwrap();
        assert_eq!(first, single);
        assert_eq!(first, seen[0]);
        assert!(seen.iter().flatten().all(|v| (-1.0..=1.0).contains(v)));
        assert!(choose_bias_vector(&d, 0, 3, |_| Ok((0.0, 0.0))).is_err());
        assert!(choose_bias_vector(&d, 3, 3, |_| Err(Error::Singular)).is_err());
    }

    #[test]
    fn bias_vector_is_exhaustive_maximum() {
        use crate::classifier::fit_weighted_gnb;
        let data = gen_two_class_four_cluster(400, Domain::Train, 21).unwrap();
        let classes = data.classes().unwrap();
        let gap = |w: &[f64]| -> Result<(f64, f64)> {
            let s = biased_split(&data, w, 4)?;
            let y_tr = s.train.encode_labels(&classes)?;
            let y_ts = s.test.encode_labels(&classes)?;
            let plain = fit_weighted_gnb(s.train.x(), &y_tr, &vec![1.0; y_tr.len()])?;
            let oracle = fit_weighted_gnb(s.train.x(), &y_tr, &s.oracle_importance)?;
            Ok((
                plain.predict_posterior(s.test.x())?.accuracy(&y_ts)?,
                oracle.predict_posterior(s.test.x())?.accuracy(&y_ts)?,
            ))
        };
        let mut all = vec![];
        let chosen = choose_bias_vector(&data, 10, 8, |w| {
            let r = gap(w)?;
            all.push((r.1 - r.0, w.to_vec()));
            Ok(r)
        })
        .unwrap();
        let max = all.iter().map(|(g, _)| *g).fold(f64::NEG_INFINITY, f64::max);
        let (g, w) = all.iter().find(|(g, _)| *g == max).unwrap();
        assert_eq!(*w, chosen);
        assert_eq!(gap(&chosen).map(|r| r.1 - r.0).unwrap(), *g);
    }
}
