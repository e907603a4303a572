use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::stats::{mean, sample_std, welch_t_test};
use super::{ExperimentConfig, Method};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean: f64,
    /// Sample standard deviation; absent for a single run.
    pub std: Option<f64>,
    /// Accuracy per surviving run, in run order.
    pub accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub a: Method,
    pub b: Method,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub run: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Indices of the runs every method completed.
    pub runs: Vec<usize>,
    pub methods: Vec<MethodSummary>,
    /// Welch tests for every unordered pair of methods, in declaration order.
    pub significance: Vec<PairwiseTest>,
    pub failed_runs: Vec<FailedRun>,
    pub wall_clock_secs: Option<f64>,
}

impl ExperimentReport {
    pub(super) fn build(
        config: &ExperimentConfig,
        accuracies: Vec<(usize, Vec<f64>)>,
        failed: Vec<FailedRun>,
        wall: Option<f64>,
    ) -> Result<Self> {
        if accuracies.is_empty() {
            let first = failed.first().map_or_else(String::new, |f| f.error.clone());
            return Err(crate::Error::AllRunsFailed(first));
        }
        let runs = accuracies.iter().map(|(r, _)| *r).collect();
        let methods: Vec<MethodSummary> = config
            .methods
            .iter()
            .enumerate()
            .map(|(k, &method)| {
                let acc: Vec<f64> = accuracies.iter().map(|(_, a)| a[k]).collect();
                MethodSummary {
                    method,
                    mean: mean(&acc),
                    std: sample_std(&acc),
                    accuracies: acc,
                }
            })
            .collect();
        let mut significance = Vec::new();
        if accuracies.len() >= 2 {
            for i in 0..methods.len() {
                for j in i + 1..methods.len() {
                    let t = welch_t_test(&methods[i].accuracies, &methods[j].accuracies, config.alpha)?;
                    significance.push(PairwiseTest {
                        a: methods[i].method,
                        b: methods[j].method,
                        p_value: t.p_value,
                        significant: t.significant,
                    });
                }
            }
        }
        Ok(Self {
            config: config.clone(),
            runs,
            methods,
            significance,
            failed_runs: failed,
            wall_clock_secs: wall,
        })
    }

    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Table with one column per method: rows `mean`, `std`, then one row
    /// per run.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row");
        for m in &self.methods {
            write!(out, ",{}", m.method).unwrap();
        }
        out.push('\n');
        out.push_str("mean");
        for m in &self.methods {
            write!(out, ",{}", m.mean).unwrap();
        }
        out.push_str("\nstd");
        for m in &self.methods {
            match m.std {
                Some(s) => write!(out, ",{s}").unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
        for (k, run) in self.runs.iter().enumerate() {
            write!(out, "run{run}").unwrap();
            for m in &self.methods {
                write!(out, ",{}", m.accuracies[k]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}
