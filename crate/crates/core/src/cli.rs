//! Command-line front end. [`run`] parses arguments, does the work and
//! returns the process exit code.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::decoders::{predict, DecoderSpec};
use crate::error::{Error, Result};
use crate::harness::{
    run_histogram_experiment, run_ranking_experiment, run_robust_experiment, ExperimentResult, HistogramConfig,
    RankingConfig, RobustConfig,
};
use crate::kernels::KernelSpec;
use crate::losses::{LossFunction, Output, RatingProfile};
use crate::model_selection::{cross_validate, CvPlan};
use crate::surrogate::{ModelBlob, TrainedSurrogate};
use crate::theory::{comparison_sweep, consistency_check, equivalence_sweep, fisher_sweep};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SURRLOSS_THREADS";

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

#[derive(Parser, Debug)]
#[command(name = "surrloss", version, about = "Structured prediction with a least-squares surrogate")]
struct Cli {
    /// Seed for every random choice (folds, data generation, sweeps).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON configuration file for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model on a CSV file and write the model as JSON.
    Train(TrainArgs),
    /// Predict outputs for the inputs of a CSV file.
    Predict(PredictArgs),
    /// Cross-validate a kernel and lambda grid and write the report as JSON.
    Cv(CvArgs),
    /// Run a synthetic experiment.
    Experiment {
        #[arg(value_enum)]
        which: ExperimentKind,
        #[command(flatten)]
        opts: ExperimentArgs,
    },
    /// Run a randomized numerical check of the theory.
    Check {
        #[arg(value_enum)]
        which: CheckKind,
        /// Number of random trials; each check has its own default.
        #[arg(long)]
        trials: Option<usize>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Scalar,
    Label,
    Ratings,
    Histogram,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ExperimentKind {
    Robust,
    Ranking,
    Histogram,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum CheckKind {
    Fisher,
    Comparison,
    Equivalence,
    Consistency,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV with columns x0..xd and targets: y, r0..rM, or p0..pd.
    #[arg(long)]
    data: PathBuf,
    /// Kind of the target columns.
    #[arg(long, value_enum)]
    output: Option<OutputKind>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Gaussian kernel bandwidth.
    #[arg(long)]
    sigma: Option<f64>,
    /// Use the linear kernel instead of the Gaussian.
    #[arg(long)]
    linear: bool,
    #[arg(long)]
    lambda: Option<f64>,
    /// Cauchy scale, for scalar outputs.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Model written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// CSV whose x0..xd columns are the queries; other columns are ignored.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args, Debug)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    folds: Option<usize>,
    /// Comma-separated lambda grid.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Comma-separated Gaussian bandwidth grid.
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long)]
    repetitions: Option<usize>,
    /// Comma-separated training set sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
}

/// Settings of `train`; every field may come from `--config` and be
/// overridden by flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub output: Option<OutputKind>,
    pub kernel: Option<KernelSpec>,
    pub lambda: Option<f64>,
    pub loss: Option<LossFunction>,
    pub decoder: Option<DecoderSpec>,
}

/// Settings of `cv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub output: Option<OutputKind>,
    pub folds: usize,
    pub lambdas: Vec<f64>,
    pub kernels: Vec<KernelSpec>,
    pub decode_losses: Option<Vec<LossFunction>>,
    pub scoring: Option<LossFunction>,
    pub decoder: Option<DecoderSpec>,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            output: None,
            folds: 5,
            lambdas: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            kernels: [0.01, 0.05, 0.1, 0.5, 1.0]
                .iter()
                .map(|&s| KernelSpec::Gaussian { sigma: s })
                .collect(),
            decode_losses: None,
            scoring: None,
            decoder: None,
        }
    }
}

/// JSON envelope of every report.
#[derive(Serialize)]
struct Report<'a, C: Serialize, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: Option<u64>,
    config: &'a C,
    #[serde(skip_serializing_if = "Option::is_none")]
    passed: Option<bool>,
    results: R,
}

enum Failure {
    Usage(String),
    Numerical(String),
    CheckFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Entry point used by the binary; `argv[0]` is the program name.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            EXIT_NUMERICAL
        }
        Err(Failure::CheckFailed) => {
            eprintln!("check failed");
            EXIT_CHECK_FAILED
        }
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
    // a pool built earlier in the same process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Train(a) => train(cli, a),
        Command::Predict(a) => predict_cmd(cli, a),
        Command::Cv(a) => cv(cli, a),
        Command::Experiment { which, opts } => experiment(cli, *which, opts),
        Command::Check { which, trials } => check(cli, *which, *trials),
    }
}

fn read_config<C: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<C> {
    match path {
        None => Ok(C::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
        }
    }
}

fn writer(out: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout()),
    })
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> CliResult<()> {
    let mut w = writer(out)?;
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    writeln!(w, "{text}").map_err(Error::from)?;
    Ok(())
}

/// Inputs and targets read from a CSV file.
pub struct Table {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Output>,
}

fn columns_with_prefix(headers: &csv::StringRecord, prefix: &str) -> Vec<usize> {
    let mut cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            h.trim()
                .strip_prefix(prefix)
                .and_then(|rest| rest.parse::<usize>().ok())
                .map(|k| (k, i))
        })
        .collect();
    cols.sort_unstable();
    cols.into_iter().map(|(_, i)| i).collect()
}

fn parse_field(record: &csv::StringRecord, col: usize, line: usize) -> Result<f64> {
    let raw = record.get(col).unwrap_or("").trim();
    raw.parse::<f64>()
        .map_err(|_| Error::InvalidParameter(format!("line {line}: cannot parse {raw:?} as a number")))
}

/// Reads `x0..xd` and, when `kind` is given, the target columns.
pub fn read_table(path: &Path, kind: Option<OutputKind>) -> Result<Table> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let xcols = columns_with_prefix(&headers, "x");
    if xcols.is_empty() {
        return Err(Error::InvalidParameter(format!("{}: no x0.. input columns", path.display())));
    }
    let ycols = match kind {
        None => vec![],
        Some(OutputKind::Scalar | OutputKind::Label) => {
            let c = headers
                .iter()
                .position(|h| h.trim() == "y")
                .ok_or_else(|| Error::InvalidParameter(format!("{}: no y column", path.display())))?;
            vec![c]
        }
        Some(OutputKind::Ratings) => columns_with_prefix(&headers, "r"),
        Some(OutputKind::Histogram) => columns_with_prefix(&headers, "p"),
    };
    if kind.is_some() && ycols.is_empty() {
        return Err(Error::InvalidParameter(format!("{}: no target columns", path.display())));
    }
    let mut t = Table { inputs: Vec::new(), outputs: Vec::new() };
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        t.inputs.push(xcols.iter().map(|&c| parse_field(&rec, c, line)).collect::<Result<_>>()?);
        let Some(kind) = kind else { continue };
        let vals = ycols.iter().map(|&c| parse_field(&rec, c, line)).collect::<Result<Vec<f64>>>()?;
        let y = match kind {
            OutputKind::Scalar => Output::Scalar(vals[0]),
            OutputKind::Label => {
                let v = vals[0];
                if !(v >= 0.0 && v.fract() == 0.0) {
                    return Err(Error::InvalidOutput(format!("line {line}: label {v} is not a class index")));
                }
                Output::Label(v as usize)
            }
            OutputKind::Ratings => Output::Ratings(RatingProfile::new(vals)?),
            OutputKind::Histogram => {
                crate::losses::check_simplex(&vals).map_err(|e| e.context(format!("line {line}")))?;
                Output::Histogram(vals)
            }
        };
        t.outputs.push(y);
    }
    if t.inputs.is_empty() {
        return Err(Error::Empty("CSV rows"));
    }
    Ok(t)
}

/// Number of classes, items or bins implied by the targets.
fn output_size(kind: OutputKind, outputs: &[Output]) -> usize {
    match kind {
        OutputKind::Scalar => 1,
        OutputKind::Label => outputs.iter().filter_map(|o| o.as_label().ok()).max().map_or(1, |m| m + 1).max(2),
        OutputKind::Ratings | OutputKind::Histogram => outputs.first().map_or(0, |o| o.to_vector().len()),
    }
}

/// Loss and decoder used when none is configured.
pub fn default_loss_and_decoder(kind: OutputKind, outputs: &[Output], gamma: Option<f64>) -> Result<(LossFunction, DecoderSpec)> {
    let size = output_size(kind, outputs);
    Ok(match kind {
        OutputKind::Scalar => (LossFunction::cauchy(gamma.unwrap_or(1.0))?, DecoderSpec::ROBUST_DEFAULT),
        OutputKind::Label => (
            LossFunction::ZeroOne { classes: size },
            DecoderSpec::Exhaustive { candidates: (0..size).map(Output::Label).collect() },
        ),
        OutputKind::Ratings => (LossFunction::RankLoss { normalize: true }, DecoderSpec::RankingFas { items: size }),
        OutputKind::Histogram => (LossFunction::SquaredHellinger, DecoderSpec::SimplexHellinger),
    })
}

fn need_kind(flag: Option<OutputKind>, config: Option<OutputKind>) -> CliResult<OutputKind> {
    flag.or(config)
        .ok_or_else(|| Failure::Usage("the target kind is required (--output scalar|label|ratings|histogram)".into()))
}

fn train(cli: &Cli, a: &TrainArgs) -> CliResult<()> {
    let cfg: TrainConfig = read_config(cli.config.as_deref())?;
    let kind = need_kind(a.data.output, cfg.output)?;
    let table = read_table(&a.data.data, Some(kind))?;
    let kernel = if a.linear {
        KernelSpec::Linear
    } else if let Some(s) = a.sigma {
        KernelSpec::gaussian(s)?
    } else {
        cfg.kernel.clone().unwrap_or(KernelSpec::Gaussian { sigma: 0.1 })
    };
    let lambda = a.lambda.or(cfg.lambda).unwrap_or(1e-3);
    let (dloss, ddec) = default_loss_and_decoder(kind, &table.outputs, a.gamma)?;
    let loss = match (a.gamma, &cfg.loss) {
        (None, Some(l)) => l.clone(),
        _ => dloss,
    };
    let decoder = cfg.decoder.clone().unwrap_or(ddec);
    decoder.validate()?;
    let model = TrainedSurrogate::fit(table.inputs, table.outputs, kernel, lambda)?;
    let mut blob = model.to_blob();
    blob.loss = Some(loss);
    blob.decoder = Some(decoder);
    let text = blob.to_json()?;
    let mut w = writer(cli.out.as_deref())?;
    writeln!(w, "{text}").map_err(Error::from)?;
    Ok(())
}

fn prediction_header(sample: &Output, dim: usize) -> Vec<String> {
    let mut h: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    match sample {
        Output::Label(_) | Output::Scalar(_) => h.push("y".into()),
        Output::Ranking(r) => h.extend((0..r.len()).map(|i| format!("rank{i}"))),
        Output::Ratings(r) => h.extend((0..r.len()).map(|i| format!("r{i}"))),
        Output::Histogram(p) => h.extend((0..p.len()).map(|i| format!("p{i}"))),
    }
    h
}

fn prediction_fields(y: &Output) -> Vec<String> {
    match y {
        Output::Label(l) => vec![l.to_string()],
        Output::Scalar(v) => vec![v.to_string()],
        Output::Ranking(r) => r.ranks().iter().map(|v| v.to_string()).collect(),
        Output::Ratings(r) => r.ratings().iter().map(|v| v.to_string()).collect(),
        Output::Histogram(p) => p.iter().map(|v| v.to_string()).collect(),
    }
}

fn predict_cmd(cli: &Cli, a: &PredictArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.model).map_err(|e| Failure::Usage(format!("{}: {e}", a.model.display())))?;
    let blob = ModelBlob::from_json(&text)?;
    let (loss, decoder) = (blob.loss.clone(), blob.decoder.clone());
    let model = blob.into_model()?;
    let (loss, decoder) = match (loss, decoder) {
        (Some(l), Some(d)) => (l, d),
        _ => return Err(Failure::Usage("model file has no loss or decoder".into())),
    };
    let queries = read_table(&a.data, None)?;
    let preds = queries
        .inputs
        .iter()
        .map(|x| predict(&model, &decoder, &loss, x))
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(writer(cli.out.as_deref())?);
    w.write_record(prediction_header(&preds[0], model.input_dim())).map_err(Error::from)?;
    for (x, y) in queries.inputs.iter().zip(&preds) {
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        row.extend(prediction_fields(y));
        w.write_record(row).map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn cv(cli: &Cli, a: &CvArgs) -> CliResult<()> {
    let mut cfg: CvConfig = read_config(cli.config.as_deref())?;
    let kind = need_kind(a.data.output, cfg.output)?;
    cfg.output = Some(kind);
    if let Some(f) = a.folds {
        cfg.folds = f;
    }
    if let Some(l) = &a.lambdas {
        cfg.lambdas = l.clone();
    }
    if let Some(s) = &a.sigmas {
        cfg.kernels = s.iter().map(|&s| KernelSpec::gaussian(s)).collect::<Result<_>>()?;
    }
    let table = read_table(&a.data.data, Some(kind))?;
    let (dloss, ddec) = default_loss_and_decoder(kind, &table.outputs, None)?;
    let plan = CvPlan {
        folds: cfg.folds,
        seed: cli.seed.unwrap_or(0),
        lambdas: cfg.lambdas.clone(),
        kernels: cfg.kernels.clone(),
        decode_losses: cfg.decode_losses.clone().unwrap_or_else(|| vec![dloss.clone()]),
        scoring: cfg.scoring.clone().unwrap_or(match kind {
            OutputKind::Scalar => LossFunction::AbsoluteValue,
            _ => dloss,
        }),
    };
    let decoder = cfg.decoder.clone().unwrap_or(ddec);
    let report = cross_validate(&table.inputs, &table.outputs, &plan, &decoder)?;
    write_json(
        cli.out.as_deref(),
        &Report { tool: "surrloss", version: VERSION, command: "cv", seed: cli.seed, config: &plan, passed: None, results: &report },
    )
}

fn learning_curve_csv(path: &Path, results: &[ExperimentResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "metric", "n", "mean", "std", "repetitions", "wall_time_secs"])?;
    for r in results {
        w.write_record([
            r.method.clone(),
            r.metric.clone(),
            r.n.to_string(),
            r.mean.to_string(),
            r.std.to_string(),
            r.raw.len().to_string(),
            r.wall_time_secs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn emit_experiment<C: Serialize>(cli: &Cli, name: &str, cfg: &C, results: &[ExperimentResult]) -> CliResult<()> {
    let command = format!("experiment {name}");
    write_json(
        cli.out.as_deref(),
        &Report { tool: "surrloss", version: VERSION, command: &command, seed: cli.seed, config: cfg, passed: None, results },
    )?;
    if let Some(out) = &cli.out {
        learning_curve_csv(&out.with_extension("csv"), results)?;
    }
    Ok(())
}

macro_rules! apply_overrides {
    ($cfg:expr, $cli:expr, $opts:expr) => {{
        if let Some(s) = $cli.seed {
            $cfg.base_seed = s;
        }
        if let Some(r) = $opts.repetitions {
            $cfg.repetitions = r;
        }
        if let Some(s) = &$opts.sizes {
            $cfg.sizes = s.clone();
        }
    }};
}

fn experiment(cli: &Cli, which: ExperimentKind, opts: &ExperimentArgs) -> CliResult<()> {
    match which {
        ExperimentKind::Robust => {
            let mut cfg: RobustConfig = read_config(cli.config.as_deref())?;
            apply_overrides!(cfg, cli, opts);
            let r = run_robust_experiment(&cfg)?;
            emit_experiment(cli, "robust", &cfg, &r)
        }
        ExperimentKind::Ranking => {
            let mut cfg: RankingConfig = read_config(cli.config.as_deref())?;
            apply_overrides!(cfg, cli, opts);
            let r = run_ranking_experiment(&cfg)?;
            emit_experiment(cli, "ranking", &cfg, &r)
        }
        ExperimentKind::Histogram => {
            let mut cfg: HistogramConfig = read_config(cli.config.as_deref())?;
            apply_overrides!(cfg, cli, opts);
            let r = run_histogram_experiment(&cfg)?;
            emit_experiment(cli, "histogram", &cfg, &r)
        }
    }
}

#[derive(Serialize)]
struct CheckConfig {
    trials: usize,
    seed: u64,
}

fn check(cli: &Cli, which: CheckKind, trials: Option<usize>) -> CliResult<()> {
    let seed = cli.seed.unwrap_or(0);
    let (name, default_trials) = match which {
        CheckKind::Fisher => ("fisher", 50),
        CheckKind::Comparison => ("comparison", 1000),
        CheckKind::Equivalence => ("equivalence", 100),
        CheckKind::Consistency => ("consistency", 20),
    };
    let cfg = CheckConfig { trials: trials.unwrap_or(default_trials), seed };
    let command = format!("check {name}");
    let (passed, results) = match which {
        CheckKind::Fisher => {
            let r = fisher_sweep(cfg.trials, seed)?;
            (r.iter().all(|s| s.passed), serde_json::to_value(r).map_err(Error::from)?)
        }
        CheckKind::Comparison => {
            let r = comparison_sweep(cfg.trials, seed)?;
            (r.passed, serde_json::to_value(r).map_err(Error::from)?)
        }
        CheckKind::Equivalence => {
            let r = equivalence_sweep(cfg.trials, seed)?;
            (r.passed, serde_json::to_value(r).map_err(Error::from)?)
        }
        CheckKind::Consistency => {
            let r = consistency_check(cfg.trials, seed)?;
            (r.holds, serde_json::to_value(r).map_err(Error::from)?)
        }
    };
    write_json(
        cli.out.as_deref(),
        &Report { tool: "surrloss", version: VERSION, command: &command, seed: cli.seed, config: &cfg, passed: Some(passed), results },
    )?;
    if passed {
        Ok(())
    } else {
        Err(Failure::CheckFailed)
    }
}
