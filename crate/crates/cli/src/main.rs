use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ddr_core::classifier::ClassifierKind;
use ddr_core::data::{gen_two_class_four_cluster, load_csv, CsvOptions, Dataset, Domain};
use ddr_core::ddr::{ddr_fit, DdrConfig};
use ddr_core::density_ratio::{evaluate_ratio, fit_soft_ulsif, fit_ulsif_auto, select_soft_hyperparams, RatioGrid, TestConfidence};
use ddr_core::experiments::{run_experiment, welch_t_test, ExperimentConfig, Method, OutputFormat};
use ddr_core::kernel::sample_centers;
use ddr_core::{Error, Result};
use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "ddr", version, about = "Covariate-shift weighting with discriminative density ratios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the two-class, four-cluster train and test samples as CSV.
    Synth(SynthArgs),
    /// Fit a uLSIF density ratio and print one weight per training row.
    Ratio(RatioArgs),
    /// Run the iterative class-wise estimator and print weights and trace.
    Ddr(DdrArgs),
    /// Run a multi-seed comparison from a JSON config.
    Experiment(ExperimentArgs),
    /// Welch two-sample t-test on two comma-separated samples.
    Ttest(TtestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Training and test inputs: CSV files, or synthetic samples when omitted.
#[derive(Args)]
struct Inputs {
    /// Training CSV.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test CSV.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Zero-based label column of both CSVs.
    #[arg(long, default_value_t = 0)]
    label_column: usize,
    /// Test CSV has no label column.
    #[arg(long)]
    unlabeled_test: bool,
    #[arg(long)]
    header: bool,
    #[arg(long, default_value_t = 100)]
    n_tr: usize,
    #[arg(long, default_value_t = 2000)]
    n_ts: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100)]
    n_tr: usize,
    #[arg(long, default_value_t = 2000)]
    n_ts: usize,
}

#[derive(Args)]
struct RatioArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    inputs: Inputs,
    /// Kernel width; selected by held-out objective when omitted.
    #[arg(long, requires = "lambda")]
    sigma: Option<f64>,
    #[arg(long, requires = "sigma")]
    lambda: Option<f64>,
    /// File with one confidence in [0, 1] per test row (soft matching).
    #[arg(long)]
    confidence: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct DdrArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value = "gnb")]
    classifier: ClassifierKind,
    #[arg(long, default_value_t = 20)]
    max_iters: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON config; fields not given take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    n_tr: Option<usize>,
    #[arg(long)]
    n_ts: Option<usize>,
    #[arg(long)]
    classifier: Option<ClassifierKind>,
    /// Comma-separated subset of unweighted, ulsif, ddr, oracle-imp, oracle-cvtest.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Include wall-clock time in the report.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct TtestArgs {
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    a: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    b: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn synth(args: &SynthArgs) -> Result<String> {
    let train = gen_two_class_four_cluster(args.n_tr, Domain::Train, args.common.seed.wrapping_mul(2))?;
    let test = gen_two_class_four_cluster(args.n_ts, Domain::Test, args.common.seed.wrapping_mul(2).wrapping_add(1))?;
    let mut out = String::from("domain,label,x1,x2\n");
    for (tag, d) in [("train", &train), ("test", &test)] {
        let y = d.y().expect("generator labels every row");
        for i in 0..d.n_rows() {
            writeln!(out, "{tag},{},{},{}", y[i], d.x()[(i, 0)], d.x()[(i, 1)]).unwrap();
        }
    }
    Ok(out)
}

fn load_inputs(inputs: &Inputs, seed: u64) -> Result<(Dataset, Dataset)> {
    match (&inputs.train, &inputs.test) {
        (Some(tr), Some(ts)) => {
            let opts = CsvOptions {
                label_column: Some(inputs.label_column),
                has_header: inputs.header,
            };
            let test_opts = CsvOptions {
                label_column: (!inputs.unlabeled_test).then_some(inputs.label_column),
                ..opts.clone()
            };
            Ok((load_csv(tr, &opts)?, load_csv(ts, &test_opts)?))
        }
        (None, None) => Ok((
            gen_two_class_four_cluster(inputs.n_tr, Domain::Train, seed.wrapping_mul(2))?,
            gen_two_class_four_cluster(inputs.n_ts, Domain::Test, seed.wrapping_mul(2).wrapping_add(1))?,
        )),
        _ => Err(Error::Config("--train and --test must be given together".into())),
    }
}

fn read_confidence(path: &PathBuf) -> Result<TestConfidence> {
    let text = std::fs::read_to_string(path)?;
    let values = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            l.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: k + 1,
                reason: format!("{:?} is not a number", l.trim()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TestConfidence::new(values)
}

#[derive(Serialize)]
struct RatioOutput<'a> {
    sigma: f64,
    lambda: f64,
    weights: &'a [f64],
}

fn weights_csv(w: &[f64]) -> String {
    let mut out = String::from("index,weight\n");
    for (i, v) in w.iter().enumerate() {
        writeln!(out, "{i},{v}").unwrap();
    }
    out
}

fn ratio(args: &RatioArgs) -> Result<String> {
    let seed = args.common.seed;
    let (train, test) = load_inputs(&args.inputs, seed)?;
    let (x_tr, x_ts): (&DMatrix<f64>, &DMatrix<f64>) = (train.x(), test.x());
    let grid = RatioGrid::default();
    let model = match (&args.confidence, args.sigma, args.lambda) {
        (None, None, None) => fit_ulsif_auto(x_tr, x_ts, &grid, seed)?,
        (conf, sigma, lambda) => {
            let conf = match conf {
                Some(p) => read_confidence(p)?,
                None => TestConfidence::ones(x_ts.nrows()),
            };
            let centers = sample_centers(x_ts, grid.max_centers, seed)?;
            let (s, l) = match (sigma, lambda) {
                (Some(s), Some(l)) => (s, l),
                _ => {
                    let sigmas = grid.sigma_grid(x_tr, x_ts)?;
                    select_soft_hyperparams(
                        x_tr,
                        x_ts,
                        Some(&conf),
                        &centers,
                        &sigmas,
                        &grid.lambda_grid,
                        grid.folds,
                        seed.wrapping_add(1),
                    )?
                }
            };
            fit_soft_ulsif(x_tr, x_ts, &conf, &centers, s, l)?
        }
    };
    let w = evaluate_ratio(&model, x_tr)?;
    match args.format {
        Format::Csv => Ok(weights_csv(&w)),
        Format::Json => json(&RatioOutput {
            sigma: model.sigma(),
            lambda: model.lambda(),
            weights: &w,
        }),
    }
}

fn ddr(args: &DdrArgs) -> Result<String> {
    let seed = args.common.seed;
    let (train, test) = load_inputs(&args.inputs, seed)?;
    let classes = train.classes()?;
    let y_tr = train.encode_labels(&classes)?;
    let config = DdrConfig {
        max_iters: args.max_iters,
        classifier: args.classifier,
        seed,
        ..DdrConfig::default()
    };
    let fit = ddr_fit(train.x(), &y_tr, test.x(), &config)?;
    match args.format {
        Format::Csv => Ok(weights_csv(&fit.weights)),
        Format::Json => json(&fit),
    }
}

fn experiment(args: &ExperimentArgs) -> Result<(String, Option<PathBuf>)> {
    let mut config = match &args.config {
        Some(p) => ExperimentConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.runs {
        config.runs = v;
    }
    if let Some(v) = args.n_tr {
        config.n_tr = v;
    }
    if let Some(v) = args.n_ts {
        config.n_ts = v;
    }
    if let Some(v) = args.classifier {
        config.classifier = v;
    }
    if let Some(m) = &args.methods {
        config.methods = Method::parse_list(m)?;
    }
    if let Some(f) = args.format {
        config.format = f.into();
    }
    if args.out.is_some() {
        config.output = args.out.clone();
    }
    config.timing |= args.timing;
    let report = run_experiment(&config)?;
    let text = match config.format {
        OutputFormat::Json => report.to_json()?,
        OutputFormat::Csv => report.to_csv(),
    };
    Ok((text, config.output))
}

fn ttest(args: &TtestArgs) -> Result<String> {
    json(&welch_t_test(&args.a, &args.b, args.alpha)?)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => emit(a.common.out.as_ref(), &synth(a)?),
        Command::Ratio(a) => emit(a.common.out.as_ref(), &ratio(a)?),
        Command::Ddr(a) => emit(a.common.out.as_ref(), &ddr(a)?),
        Command::Experiment(a) => {
            let (text, out) = experiment(a)?;
            emit(out.as_ref(), &text)
        }
        Command::Ttest(a) => emit(a.out.as_ref(), &ttest(a)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
