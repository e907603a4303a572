use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    pub significant: bool,
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample (`n − 1`) standard deviation, `None` for fewer than two values.
pub fn sample_std(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = mean(v);
    Some((v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

/// Two-sided unequal-variance t-test.
pub fn welch_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::param("samples", "each needs at least two values"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-test samples"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let va = sample_std(a).expect("len checked").powi(2) / na;
    let vb = sample_std(b).expect("len checked").powi(2) / nb;
    let se2 = va + vb;
    if se2 == 0.0 {
        let p_value = if ma == mb { 1.0 } else { 0.0 };
        let t = if ma == mb { 0.0 } else { (ma - mb).signum() * f64::INFINITY };
        return Ok(WelchTest {
            t,
            df: na + nb - 2.0,
            p_value,
            significant: p_value < alpha,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::param("df", e.to_string()))?;
    let p_value = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(WelchTest {
        t,
        df,
        p_value,
        significant: p_value < alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn identical_samples() {
        let a = [0.9, 0.91, 0.95, 0.93];
        let r = welch_t_test(&a, &a, 0.05).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(!r.significant);
        let c = [0.5; 3];
        assert_eq!(welch_t_test(&c, &c, 0.05).unwrap().p_value, 1.0);
        assert!(welch_t_test(&c, &[0.6; 3], 0.05).unwrap().significant);
    }

    #[test]
    fn separated_samples() {
        let a = [0.0, 1e-6, -1e-6, 2e-6];
        let b = [1.0, 1.0 + 1e-6, 1.0 - 1e-6, 1.0];
        let r = welch_t_test(&a, &b, 0.05).unwrap();
        assert!(r.significant);
        assert!(r.t < 0.0);
    }

    #[test]
    fn known_value() {
        // Equal sizes and variances: df = 2n − 2 and t = −√(n/2)·Δ/s.
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        let r = welch_t_test(&a, &b, 0.05).unwrap();
        assert!((r.df - 8.0).abs() < 1e-12);
        assert!((r.t + 1.0).abs() < 1e-12);
        // two-sided p for t = 1 with 8 degrees of freedom
        assert!((r.p_value - 0.346_593_4).abs() < 1e-6);
    }

    #[test]
    fn rejects_short_samples() {
        assert!(welch_t_test(&[1.0], &[1.0, 2.0], 0.05).is_err());
        assert!(welch_t_test(&[1.0, 2.0], &[1.0, 2.0], 1.5).is_err());
    }

    #[test]
    fn power_against_unit_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (z, o) = (Normal::new(0.0, 1.0).unwrap(), Normal::new(1.0, 1.0).unwrap());
        let hits = (0..100)
            .filter(|_| {
                let a: Vec<f64> = (0..30).map(|_| z.sample(&mut rng)).collect();
                let b: Vec<f64> = (0..30).map(|_| o.sample(&mut rng)).collect();
                welch_t_test(&a, &b, 0.05).unwrap().significant
            })
            .count();
        assert!(hits > 95, "{hits}");
    }

    #[test]
    fn std_conventions() {
        assert_eq!(sample_std(&[1.0]), None);
        assert!((sample_std(&[1.0, 3.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }
}
