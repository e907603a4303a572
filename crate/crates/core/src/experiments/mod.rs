//! Multi-seed comparison of weighting methods.

mod report;
mod stats;

pub use report::{ExperimentReport, FailedRun, MethodSummary, PairwiseTest};
pub use stats::{mean, sample_std, welch_t_test, WelchTest};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{cross_validated_accuracy, prepare_classifier, ClassifierGrid, ClassifierKind};
use crate::data::{biased_split, choose_bias_vector, gen_two_class_four_cluster, load_csv, normalize_minmax, CsvOptions, Dataset, Domain};
use crate::ddr::{ddr_fit, DdrConfig};
use crate::density_ratio::{evaluate_ratio, fit_ulsif_auto, RatioGrid};
use crate::error::{Error, Result};
use crate::labels::Labels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Two-class, four-cluster generator with prior and likelihood shift.
    Synthetic,
    /// One labelled CSV, split with deliberate selection bias per run.
    BiasedCsv,
    /// Fixed labelled train and test CSV files.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Unweighted,
    Ulsif,
    Ddr,
    /// Inverse selection probability; biased task only.
    OracleImp,
    /// Cross-validated accuracy of a classifier trained on the labelled test set.
    OracleCvtest,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Unweighted,
        Method::Ulsif,
        Method::Ddr,
        Method::OracleImp,
        Method::OracleCvtest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Unweighted => "unweighted",
            Method::Ulsif => "ulsif",
            Method::Ddr => "ddr",
            Method::OracleImp => "oracle-imp",
            Method::OracleCvtest => "oracle-cvtest",
        }
    }

    /// Comma-separated list, e.g. `unweighted,ddr`.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        s.split(',').map(|m| m.trim().parse()).collect()
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Config(format!("unknown format `{other}` (expected csv or json)"))),
        }
    }
}

/// Settings of the iterative estimator that are not derived per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdrSettings {
    pub max_iters: usize,
    pub weight_tol: Option<f64>,
    pub reselect_each_iter: bool,
    pub normalize_class_ratio: bool,
}

impl Default for DdrSettings {
    fn default() -> Self {
        let d = DdrConfig::default();
        Self {
            max_iters: d.max_iters,
            weight_tol: d.weight_tol,
            reselect_each_iter: d.reselect_each_iter,
            normalize_class_ratio: d.normalize_class_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    /// Labelled CSV for `biased-csv`, training CSV for `custom`.
    pub dataset: Option<PathBuf>,
    /// Test CSV for `custom`.
    pub test_dataset: Option<PathBuf>,
    pub label_column: usize,
    pub has_header: bool,
    pub n_tr: usize,
    pub n_ts: usize,
    pub runs: usize,
    pub methods: Vec<Method>,
    pub classifier: ClassifierKind,
    pub classifier_grid: ClassifierGrid,
    pub ratio_grid: RatioGrid,
    pub ddr: DdrSettings,
    /// Number of random bias directions tried per run on `biased-csv`.
    pub bias_candidates: usize,
    pub cv_folds: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Record wall-clock time in the report (makes output non-reproducible).
    pub timing: bool,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: Task::Synthetic,
            dataset: None,
            test_dataset: None,
            label_column: 0,
            has_header: false,
            n_tr: 100,
            n_ts: 2000,
            runs: 30,
            methods: vec![Method::Unweighted, Method::Ulsif, Method::Ddr],
            classifier: ClassifierKind::Gnb,
            classifier_grid: ClassifierGrid::default(),
            ratio_grid: RatioGrid::default(),
            ddr: DdrSettings::default(),
            bias_candidates: 10,
            cv_folds: 5,
            seed: 0,
            alpha: 0.05,
            timing: false,
            output: None,
            format: OutputFormat::Json,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        if self.bias_candidates == 0 {
            return bad("bias_candidates must be at least 1".into());
        }
        if self.cv_folds < 2 {
            return bad("cv_folds must be at least 2".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        match self.task {
            Task::Synthetic => {
                if self.n_tr < 2 || self.n_ts < 2 {
                    return bad("n_tr and n_ts must be at least 2".into());
                }
                if self.methods.contains(&Method::OracleImp) {
                    return bad("oracle-imp needs the biased-csv task".into());
                }
            }
            Task::BiasedCsv => {
                if self.dataset.is_none() {
                    return bad("biased-csv needs `dataset`".into());
                }
            }
            Task::Custom => {
                if self.dataset.is_none() || self.test_dataset.is_none() {
                    return bad("custom needs `dataset` and `test_dataset`".into());
                }
                if self.methods.contains(&Method::OracleImp) {
                    return bad("oracle-imp needs the biased-csv task".into());
                }
            }
        }
        self.ddr_config(0).validate()
    }

    fn ddr_config(&self, seed: u64) -> DdrConfig {
        DdrConfig {
            max_iters: self.ddr.max_iters,
            weight_tol: self.ddr.weight_tol,
            classifier: self.classifier,
            classifier_grid: self.classifier_grid.clone(),
            ratio_grid: self.ratio_grid.clone(),
            reselect_each_iter: self.ddr.reselect_each_iter,
            normalize_class_ratio: self.ddr.normalize_class_ratio,
            seed,
        }
    }

    fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            label_column: Some(self.label_column),
            has_header: self.has_header,
        }
    }
}

/// One labelled train/test pair.
pub struct Trial<'a> {
    pub x_tr: &'a DMatrix<f64>,
    pub y_tr: &'a Labels,
    pub x_ts: &'a DMatrix<f64>,
    pub y_ts: &'a Labels,
    pub oracle_weights: Option<&'a [f64]>,
}

fn weighted_accuracy(config: &ExperimentConfig, t: &Trial<'_>, w: &[f64], seed: u64) -> Result<f64> {
    let spec = prepare_classifier(config.classifier, t.x_tr, t.y_tr, w, &config.classifier_grid, seed)?;
    spec.fit(t.x_tr, t.y_tr, w)?.predict_posterior(t.x_ts)?.accuracy(t.y_ts)
}

/// Test accuracy of one method on one trial.
pub fn evaluate_method(config: &ExperimentConfig, method: Method, t: &Trial<'_>, seed: u64) -> Result<f64> {
    let n = t.x_tr.nrows();
    match method {
        Method::Unweighted => weighted_accuracy(config, t, &vec![1.0; n], seed),
        Method::Ulsif => {
            let model = fit_ulsif_auto(t.x_tr, t.x_ts, &config.ratio_grid, seed)?;
            let w = evaluate_ratio(&model, t.x_tr)?;
            weighted_accuracy(config, t, &w, seed)
        }
        Method::Ddr => {
            let fit = ddr_fit(t.x_tr, t.y_tr, t.x_ts, &config.ddr_config(seed))?;
            weighted_accuracy(config, t, &fit.weights, seed)
        }
        Method::OracleImp => {
            let w = t
                .oracle_weights
                .ok_or_else(|| Error::Config("oracle-imp needs selection probabilities".into()))?;
            weighted_accuracy(config, t, w, seed)
        }
        Method::OracleCvtest => {
            let ones = vec![1.0; t.x_ts.nrows()];
            let spec = prepare_classifier(config.classifier, t.x_ts, t.y_ts, &ones, &config.classifier_grid, seed)?;
            cross_validated_accuracy(&spec, t.x_ts, t.y_ts, config.cv_folds, seed)
        }
    }
}

fn evaluate_all(config: &ExperimentConfig, t: &Trial<'_>, seed: u64) -> Result<Vec<f64>> {
    config.methods.iter().map(|&m| evaluate_method(config, m, t, seed)).collect()
}

fn encode_pair(train: &Dataset, test: &Dataset) -> Result<(Labels, Labels)> {
    let mut classes = train.classes()?;
    classes.extend(test.classes()?);
    classes.sort_unstable();
    classes.dedup();
    Ok((train.encode_labels(&classes)?, test.encode_labels(&classes)?))
}

fn dataset_trial(config: &ExperimentConfig, train: &Dataset, test: &Dataset, oracle: Option<&[f64]>, seed: u64) -> Result<Vec<f64>> {
    let (y_tr, y_ts) = encode_pair(train, test)?;
    let t = Trial {
        x_tr: train.x(),
        y_tr: &y_tr,
        x_ts: test.x(),
        y_ts: &y_ts,
        oracle_weights: oracle,
    };
    evaluate_all(config, &t, seed)
}

fn run_seed(config: &ExperimentConfig, run: usize) -> u64 {
    config.seed.wrapping_add(run as u64)
}

fn synthetic_run(config: &ExperimentConfig, run: usize) -> Result<Vec<f64>> {
    let seed = run_seed(config, run);
    let train = gen_two_class_four_cluster(config.n_tr, Domain::Train, seed.wrapping_mul(2))?;
    let test = gen_two_class_four_cluster(config.n_ts, Domain::Test, seed.wrapping_mul(2).wrapping_add(1))?;
    dataset_trial(config, &train, &test, None, seed)
}

/// Draws the split for one run, retrying with a shifted seed when the
/// selection keeps no rows.
fn split_with_retry(data: &Dataset, omega: &[f64], seed: u64) -> Result<crate::data::BiasedSplit> {
    let mut last = None;
    for attempt in 0..10u64 {
        match biased_split(data, omega, seed.wrapping_add(attempt << 32)) {
            Err(e @ Error::EmptyInput(_)) => last = Some(e),
            other => return other,
        }
    }
    Err(last.expect("at least one attempt"))
}

fn biased_run(config: &ExperimentConfig, data: &Dataset, run: usize) -> Result<Vec<f64>> {
    let seed = run_seed(config, run);
    let gap_config = ExperimentConfig {
        methods: vec![Method::Unweighted, Method::OracleImp],
        ..config.clone()
    };
    // A direction whose split cannot train both classifiers ranks last.
    let omega = choose_bias_vector(data, config.bias_candidates, seed, |w| {
        let gap =
            split_with_retry(data, w, seed).and_then(|s| dataset_trial(&gap_config, &s.train, &s.test, Some(&s.oracle_importance), seed));
        match gap {
            Ok(acc) => Ok((acc[0], acc[1])),
            Err(e) if e.is_config() => Err(e),
            Err(_) => Ok((0.0, f64::NEG_INFINITY)),
        }
    })?;
    let s = split_with_retry(data, &omega, seed)?;
    dataset_trial(config, &s.train, &s.test, Some(&s.oracle_importance), seed)
}

fn collect(config: &ExperimentConfig, results: Vec<Result<Vec<f64>>>, started: Instant) -> Result<ExperimentReport> {
    let mut accuracies = Vec::new();
    let mut failed = Vec::new();
    for (run, r) in results.into_iter().enumerate() {
        match r {
            Ok(acc) => accuracies.push((run, acc)),
            Err(e) if e.is_config() => return Err(e),
            Err(e) => failed.push(FailedRun { run, error: e.to_string() }),
        }
    }
    let wall = config.timing.then(|| started.elapsed().as_secs_f64());
    ExperimentReport::build(config, accuracies, failed, wall)
}

pub fn run_synthetic(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if config.task != Task::Synthetic {
        return Err(Error::Config("run_synthetic needs task = synthetic".into()));
    }
    let started = Instant::now();
    let results = (0..config.runs).into_par_iter().map(|r| synthetic_run(config, r)).collect();
    collect(config, results, started)
}

pub fn run_biased(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if config.task != Task::BiasedCsv {
        return Err(Error::Config("run_biased needs task = biased-csv".into()));
    }
    let started = Instant::now();
    let path = config.dataset.as_ref().expect("validated");
    let raw = load_csv(path, &config.csv_options())?;
    let data = normalize_minmax(&raw, &[&raw])?.remove(0);
    let results = (0..config.runs).into_par_iter().map(|r| biased_run(config, &data, r)).collect();
    collect(config, results, started)
}

pub fn run_custom(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if config.task != Task::Custom {
        return Err(Error::Config("run_custom needs task = custom".into()));
    }
    let started = Instant::now();
    let opts = config.csv_options();
    let train = load_csv(config.dataset.as_ref().expect("validated"), &opts)?;
    let test = load_csv(config.test_dataset.as_ref().expect("validated"), &opts)?;
    let results = (0..config.runs)
        .into_par_iter()
        .map(|r| dataset_trial(config, &train, &test, None, run_seed(config, r)))
        .collect();
    collect(config, results, started)
}

/// Dispatches on `config.task`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    match config.task {
        Task::Synthetic => run_synthetic(config),
        Task::BiasedCsv => run_biased(config),
        Task::Custom => run_custom(config),
    }
}
