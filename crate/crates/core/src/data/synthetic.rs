//! Two-class, four-cluster Gaussian mixture with prior and likelihood shift.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Cluster centers per class: `[class][component]`.
pub const CLUSTER_CENTERS: [[[f64; 2]; 2]; 2] = [[[1.0, 5.0], [4.0, 5.0]], [[1.0, 1.0], [4.0, 1.0]]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Train,
    Test,
}

impl Domain {
    /// Probability of class 1 (label 1, index 0).
    fn first_class_prior(self) -> f64 {
        match self {
            Domain::Train => 0.5,
            Domain::Test => 0.6,
        }
    }

    /// Weight of the first component of `class`.
    fn first_component_weight(self, class: usize) -> f64 {
        match (self, class) {
            (Domain::Train, 0) => 0.9,
            (Domain::Train, _) => 0.1,
            (Domain::Test, _) => 0.5,
        }
    }
}

/// `n` labelled 2-D points. Labels are 1 and 2.
pub fn gen_two_class_four_cluster(n: usize, domain: Domain, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, 2);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let class = usize::from(!rng.random_bool(domain.first_class_prior()));
        let component = usize::from(!rng.random_bool(domain.first_component_weight(class)));
        let center = CLUSTER_CENTERS[class][component];
        for (j, c) in center.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            x[(i, j)] = c + z;
        }
        y.push(class as i64 + 1);
    }
    let name = match domain {
        Domain::Train => "synthetic-train",
        Domain::Test => "synthetic-test",
    };
    Dataset::new(x, Some(y), name)
}
