//! Class labels as dense indices `0..m` and class-posterior matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum tolerance for [`PosteriorMatrix`].
pub const POSTERIOR_SUM_TOL: f64 = 1e-9;

/// Class index per sample, with the number of classes fixed up front.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    index: Vec<usize>,
    n_classes: usize,
}

impl Labels {
    pub fn new(index: Vec<usize>, n_classes: usize) -> Result<Self> {
        if let Some(&bad) = index.iter().find(|&&c| c >= n_classes) {
            return Err(Error::param("labels", format!("class {bad} out of range for {n_classes} classes")));
        }
        Ok(Self { index, n_classes })
    }

    /// Number of classes taken as `max index + 1`.
    pub fn from_indices(index: Vec<usize>) -> Self {
        let n_classes = index.iter().max().map_or(0, |m| m + 1);
        Self { index, n_classes }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, i: usize) -> usize {
        self.index[i]
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &y in &self.index {
            c[y] += 1;
        }
        c
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.index.len() as f64;
        self.counts().into_iter().map(|c| c as f64 / n).collect()
    }

    /// Errors unless every class occurs at least once.
    pub fn require_all_present(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::param("labels", format!("need at least 2 classes, got {}", self.n_classes)));
        }
        match self.counts().iter().position(|&c| c == 0) {
            Some(c) => Err(Error::EmptyClass(c)),
            None => Ok(()),
        }
    }

    /// Row indices belonging to class `c`, in order.
    pub fn members(&self, c: usize) -> Vec<usize> {
        self.index.iter().enumerate().filter(|(_, &y)| y == c).map(|(i, _)| i).collect()
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            index: rows.iter().map(|&i| self.index[i]).collect(),
            n_classes: self.n_classes,
        }
    }
}

/// Per-sample class-membership probabilities; rows are non-negative and sum
/// to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMatrix {
    probs: DMatrix<f64>,
}

impl PosteriorMatrix {
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        if probs.ncols() == 0 {
            return Err(Error::EmptyInput("posterior matrix has no classes"));
        }
        for (i, row) in probs.row_iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::param("posteriors", format!("row {i} has an entry outside [0, 1]")));
            }
            if (row.sum() - 1.0).abs() > POSTERIOR_SUM_TOL {
                return Err(Error::param("posteriors", format!("row {i} sums to {}", row.sum())));
            }
        }
        Ok(Self { probs })
    }

    /// Posteriors that put all mass on the given class of each row.
    pub fn one_hot(labels: &Labels) -> Self {
        let probs = DMatrix::from_fn(labels.len(), labels.n_classes(), |i, c| if labels.get(i) == c { 1.0 } else { 0.0 });
        Self { probs }
    }

    /// Row-normalizes a non-negative score matrix, substituting `fallback`
    /// for rows whose scores are all zero.
    pub(crate) fn normalize_rows(mut scores: DMatrix<f64>, fallback: &[f64]) -> Self {
        for mut row in scores.row_iter_mut() {
            let s = row.sum();
            if s > 0.0 && s.is_finite() {
                row /= s;
            } else {
                for (c, v) in row.iter_mut().enumerate() {
                    *v = fallback[c];
                }
            }
            for v in row.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
        }
        Self { probs: scores }
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn n_rows(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.probs.ncols()
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.probs.column(c).iter().copied().collect()
    }

    /// Column means: the soft class frequencies of the rows.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.probs.nrows() as f64;
        (0..self.n_classes()).map(|c| self.probs.column(c).sum() / n).collect()
    }

    /// Most probable class per row; ties go to the lower index.
    pub fn argmax(&self) -> Vec<usize> {
        self.probs
            .row_iter()
            .map(|row| {
                let mut best = 0;
                for c in 1..row.len() {
                    if row[c] > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }

    /// Fraction of rows whose argmax equals the label.
    pub fn accuracy(&self, labels: &Labels) -> Result<f64> {
        if labels.len() != self.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows(),
                got: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::EmptyInput("no rows to score"));
        }
        let hits = self.argmax().iter().zip(labels.as_slice()).filter(|(a, b)| a == b).count();
        Ok(hits as f64 / labels.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_bookkeeping() {
        let y = Labels::new(vec![0, 1, 1, 2], 3).unwrap();
        assert_eq!(y.counts(), vec![1, 2, 1]);
        assert_eq!(y.members(1), vec![1, 2]);
        assert!(y.require_all_present().is_ok());
        assert!(Labels::new(vec![0, 3], 3).is_err());
        let missing = Labels::new(vec![0, 0, 2], 3).unwrap();
        assert!(matches!(missing.require_all_present(), Err(Error::EmptyClass(1))));
        assert_eq!(Labels::from_indices(vec![1, 0, 1]).n_classes(), 2);
    }

    #[test]
    fn posterior_validation() {
        assert!(PosteriorMatrix::new(DMatrix::from_row_slice(1, 2, &[0.3, 0.7])).is_ok());
        assert!(PosteriorMatrix::new(DMatrix::from_row_slice(1, 2, &[0.3, 0.6])).is_err());
        assert!(PosteriorMatrix::new(DMatrix::from_row_slice(1, 2, &[-0.1, 1.1])).is_err());
    }

    #[test]
    fn fallback_rows() {
        let p = PosteriorMatrix::normalize_rows(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 3.0]), &[0.4, 0.6]);
        assert_eq!(p.column(0), vec![0.4, 0.25]);
        assert_eq!(p.argmax(), vec![1, 1]);
    }
}
