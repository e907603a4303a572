//! Datasets, loaders, normalization, and generators.

mod biased;
mod io;
mod synthetic;

pub use biased::{biased_split, choose_bias_vector, selection_probabilities, subsample, BiasedSplit};
pub use io::{load_csv, load_sparse_text, parse_csv, parse_sparse_text, CsvOptions};
pub use synthetic::{gen_two_class_four_cluster, Domain, CLUSTER_CENTERS};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::select_rows;
use crate::labels::Labels;

/// Feature matrix with optional raw labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Option<Vec<i64>>,
    name: String,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Option<Vec<i64>>, name: impl Into<String>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset features"));
        }
        if let Some(labels) = &y {
            if labels.len() != x.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: x.nrows(),
                    got: labels.len(),
                });
            }
        }
        Ok(Self { x, y, name: name.into() })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> Option<&[i64]> {
        self.y.as_deref()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn rows(&self, idx: &[usize]) -> Self {
        Self {
            x: select_rows(&self.x, idx),
            y: self.y.as_ref().map(|y| idx.iter().map(|&i| y[i]).collect()),
            name: self.name.clone(),
        }
    }

    /// Sorted distinct label values.
    pub fn classes(&self) -> Result<Vec<i64>> {
        let y = self.y.as_ref().ok_or(Error::EmptyInput("labels"))?;
        let mut values = y.clone();
        values.sort_unstable();
        values.dedup();
        Ok(values)
    }

    /// Labels as indices into `classes`.
    pub fn encode_labels(&self, classes: &[i64]) -> Result<Labels> {
        let y = self.y.as_ref().ok_or(Error::EmptyInput("labels"))?;
        let idx = y
            .iter()
            .map(|v| {
                classes
                    .binary_search(v)
                    .map_err(|_| Error::param("labels", format!("value {v} is not one of {classes:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Labels::new(idx, classes.len())
    }
}

/// Per-feature affine map sending the reference min to −1 and max to +1,
/// applied to every target. Constant features map to 0.
pub fn normalize_minmax(reference: &Dataset, targets: &[&Dataset]) -> Result<Vec<Dataset>> {
    if reference.n_rows() == 0 {
        return Err(Error::EmptyInput("normalization reference"));
    }
    let d = reference.n_features();
    let bounds: Vec<(f64, f64)> = (0..d)
        .map(|j| {
            let col = reference.x.column(j);
            (col.min(), col.max())
        })
        .collect();
    targets
        .iter()
        .map(|t| {
            if t.n_features() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: t.n_features(),
                });
            }
            let x = DMatrix::from_fn(t.n_rows(), d, |i, j| {
                let (lo, hi) = bounds[j];
                if hi > lo {
                    2.0 * (t.x[(i, j)] - lo) / (hi - lo) - 1.0
                } else {
                    0.0
                }
            });
            Dataset::new(x, t.y.clone(), t.name.clone())
        })
        .collect()
}
