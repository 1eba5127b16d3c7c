use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "regvar",
    version,
    about = "Sparse regenerative VAR forecasting toolkit"
)]
pub struct Cli {
    /// Worker threads (falls back to REGVAR_THREADS, then the core count).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Progress messages on stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate raw probe-vehicle logs into a day tensor CSV.
    Ingest(IngestArgs),
    /// Chronological train / validation / test split by whole days.
    Split(SplitArgs),
    /// Fit a forecasting model and write it as JSON.
    Fit(FitArgs),
    /// One-step (or rolled-out) forecasts for every day of a tensor.
    Predict(PredictArgs),
    /// MSE / MAE of a model on a tensor.
    Evaluate(EvaluateArgs),
    /// Cross-validated risk curve over switch candidates.
    DetectSwitch(DetectArgs),
    /// Generate a synthetic data set and its ground truth.
    Simulate(SimulateArgs),
    /// Edge list of the first-lag coefficient matrix.
    ExportGraph(GraphArgs),
    /// Rank sections by summed positive outgoing coefficients.
    Influence(InfluenceArgs),
    /// Cluster sections by speed profile and report the variable group.
    VariableSections(VariableArgs),
    /// Generate, fit every method, detect the switch and score, over seeds.
    ReproduceSim(ReproduceArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    pub raw: PathBuf,
    /// One section id per line.
    #[arg(long)]
    pub sections: PathBuf,
    #[arg(long, default_value_t = 15)]
    pub slot_minutes: u32,
    #[arg(long, default_value = "15:00")]
    pub day_start: String,
    #[arg(long, default_value = "20:00")]
    pub day_end: String,
    /// Local zone offset from UTC in minutes.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub utc_offset: i32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.63)]
    pub train: f64,
    #[arg(long, default_value_t = 0.27)]
    pub val: f64,
    #[arg(long, default_value_t = 0.10)]
    pub test: f64,
    /// Outputs go to `<prefix>_train.csv`, `<prefix>_val.csv`, `<prefix>_test.csv`.
    #[arg(long)]
    pub out_prefix: PathBuf,
    /// Fill missing cells of every split with training-set historical means.
    #[arg(long)]
    pub impute: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ols,
    Lasso,
    Ridge,
    Enet,
    Group,
    RsLasso,
    TsLasso,
    Ha,
    Ar,
    Po,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyArg {
    Prepass,
    Nested,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct SolverArgs {
    /// Folds for λ selection and switch detection.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Seed of the fold assignment.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 50)]
    pub lambda_grid_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lambda_min_ratio: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub out: PathBuf,
    /// Fixed λ; λ is chosen by cross-validation when absent.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Elastic-net mixing weight of the ℓ1 part.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// One CV-selected λ shared by all lines instead of one per line.
    #[arg(long)]
    pub single_lambda: bool,
    /// Slot window `first:last` (defaults to the whole day).
    #[arg(long)]
    pub window: Option<String>,
    /// Number of lagged slots in the design.
    #[arg(long, default_value_t = 1)]
    pub lags: usize,
    /// Each line only sees its own section.
    #[arg(long)]
    pub diagonal: bool,
    /// Rescale covariates to unit variance before solving.
    #[arg(long)]
    pub standardize: bool,
    /// Switch slot for rs-lasso; detected by CV when absent.
    #[arg(long)]
    pub switch: Option<usize>,
    #[arg(long, value_enum, default_value_t = PolicyArg::Prepass)]
    pub lambda_policy: PolicyArg,
    /// AR order for `--method ar`.
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Roll the model forward from this slot instead of predicting one step
    /// ahead; slots up to it are copied from the data.
    #[arg(long)]
    pub observed: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Section ids (one per line) for a subset breakdown.
    #[arg(long)]
    pub subset: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct DetectArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = PolicyArg::Prepass)]
    pub lambda_policy: PolicyArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Cell-level checkpoint file; finished cells are reused on restart.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Experimental greedy search for up to this many switches.
    #[arg(long)]
    pub greedy: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    #[arg(long, default_value_t = 150)]
    pub days: usize,
    /// Slots per day (`T + 1`).
    #[arg(long, default_value_t = 20)]
    pub slots: usize,
    #[arg(long, default_value_t = 11)]
    pub switch: usize,
    #[arg(long, default_value_t = 8.0)]
    pub avg_degree: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Evaluate the intercept profile at integer slot indices.
    #[arg(long)]
    pub raw_t: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFormat {
    Csv,
    Json,
}

#[derive(Debug, Args, Serialize)]
pub struct GraphArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub min_weight: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = GraphFormat::Csv)]
    pub format: GraphFormat,
    /// Which piece of a multi-window model.
    #[arg(long, default_value_t = 0)]
    pub piece: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct InfluenceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub piece: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct VariableArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct ReproduceArgs {
    /// First data seed; replication `i` uses `seed + i`.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    #[arg(long, default_value_t = 135)]
    pub train_days: usize,
    #[arg(long, default_value_t = 15)]
    pub test_days: usize,
    #[arg(long, default_value_t = 20)]
    pub slots: usize,
    #[arg(long, default_value_t = 11)]
    pub switch: usize,
    #[arg(long, default_value_t = 8.0)]
    pub avg_degree: f64,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, value_enum, default_value_t = PolicyArg::Prepass)]
    pub lambda_policy: PolicyArg,
    #[arg(long)]
    pub raw_t: bool,
    #[arg(long, default_value = "reproduce-sim")]
    pub out_dir: PathBuf,
    /// Reuse per-seed results already present in the output directory.
    #[arg(long)]
    pub resume: bool,
}
