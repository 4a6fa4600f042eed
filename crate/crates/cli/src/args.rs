use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mtptune_core::hpo::Method;
use mtptune_core::metrics::MetricSpec;
use mtptune_core::mtp::{ScoreAnswer, TargetSideInfo, ValidationSetting};

#[derive(Debug, Parser)]
#[command(
    name = "mtptune",
    version,
    about = "Route multi-target prediction problems and tune two-branch networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Answer the questionnaire and report the matching problem settings.
    Infer(InferArgs),
    /// Tune one method on one dataset and write a run directory.
    Tune(TuneArgs),
    /// Run every (dataset, method, repeat) combination and rank the methods.
    Benchmark(BenchmarkArgs),
    /// Regenerate CSV and SVG summaries from a results directory.
    Report(ReportArgs),
    /// Write a synthetic dataset in the loader's file layout.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Score file: `instance_id,target_id,value` triplets or a dense matrix.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub instance_features: Option<PathBuf>,
    #[arg(long)]
    pub target_features: Option<PathBuf>,
    /// Held-out scores; when absent the test fold is split off the scores.
    #[arg(long)]
    pub test: Option<PathBuf>,
}

fn yes_no(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "yes" | "y" | "true" => Ok(true),
        "no" | "n" | "false" => Ok(false),
        _ => Err(format!("expected yes or no, got `{s}`")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetInfoArg {
    No,
    Yes,
    Hierarchy,
}

impl From<TargetInfoArg> for TargetSideInfo {
    fn from(a: TargetInfoArg) -> Self {
        match a {
            TargetInfoArg::No => TargetSideInfo::No,
            TargetInfoArg::Yes => TargetSideInfo::Yes,
            TargetInfoArg::Hierarchy => TargetSideInfo::YesHierarchy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreArg {
    Binary,
    Nominal,
    Ordinal,
    Real,
    Any,
}

impl From<ScoreArg> for ScoreAnswer {
    fn from(a: ScoreArg) -> Self {
        match a {
            ScoreArg::Binary => ScoreAnswer::Binary,
            ScoreArg::Nominal => ScoreAnswer::Nominal,
            ScoreArg::Ordinal => ScoreAnswer::Ordinal,
            ScoreArg::Real => ScoreAnswer::Real,
            ScoreArg::Any => ScoreAnswer::Any,
        }
    }
}

/// Explicit questionnaire answers. Each one overrides the value detected
/// from data.
#[derive(Debug, Clone, Default, Args)]
pub struct AnswerArgs {
    /// Novel instances at test time.
    #[arg(long, value_parser = yes_no)]
    pub q1: Option<bool>,
    /// Novel targets at test time.
    #[arg(long, value_parser = yes_no)]
    pub q2: Option<bool>,
    /// Instance side information available.
    #[arg(long, value_parser = yes_no)]
    pub q3: Option<bool>,
    /// Target side information available.
    #[arg(long, value_enum)]
    pub q4: Option<TargetInfoArg>,
    /// Score matrix fully observed.
    #[arg(long, value_parser = yes_no)]
    pub q5: Option<bool>,
    /// Score type.
    #[arg(long, value_enum)]
    pub q6: Option<ScoreArg>,
}

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long, requires = "scores")]
    pub instance_features: Option<PathBuf>,
    #[arg(long, requires = "scores")]
    pub target_features: Option<PathBuf>,
    #[arg(long, requires = "scores")]
    pub test: Option<PathBuf>,
    #[command(flatten)]
    pub answers: AnswerArgs,
}

/// Settings shared by `tune` and `benchmark`.
#[derive(Debug, Clone, Args)]
pub struct TuneOptions {
    #[arg(long, default_value_t = 3)]
    pub eta: u32,
    /// Maximum epochs per configuration; calibrated from random probes when absent.
    #[arg(long)]
    pub max_budget: Option<u32>,
    /// Epoch budget for the whole run; defaults to the epoch cost of one
    /// full Hyperband cycle for the chosen maximum budget and eta.
    #[arg(long)]
    pub total_budget: Option<u64>,
    /// YAML or JSON search space; a default space is derived from the data otherwise.
    #[arg(long)]
    pub space: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Concurrent trial evaluations.
    #[arg(long = "parallel", default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub parallel: u32,
    /// Headline test metric, e.g. macro_aupr or micro_rmse.
    #[arg(long)]
    pub metric: Option<MetricSpec>,
    /// Validation setting used for the test split (A-D); inferred otherwise.
    #[arg(long)]
    pub setting: Option<ValidationSetting>,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Random configurations trained while calibrating the maximum budget.
    #[arg(long, default_value_t = 20)]
    pub probes: usize,
    /// Epoch cap for calibration probes.
    #[arg(long, default_value_t = 81)]
    pub epoch_cap: u32,
    /// Record wall-clock seconds per trial (ledgers stop being reproducible).
    #[arg(long)]
    pub wall_clock: bool,
    /// Target side information describes a hierarchy.
    #[arg(long)]
    pub hierarchy: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "hyperband")]
    pub method: Method,
    #[command(flatten)]
    pub options: TuneOptions,
    #[arg(long, env = "MTPTUNE_OUT", default_value = "mtptune-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    /// Dataset directory holding scores.csv and optional
    /// instance_features.csv, target_features.csv and test.csv. Repeatable.
    #[arg(long = "dataset", required = true)]
    pub datasets: Vec<PathBuf>,
    /// Comma-separated methods; all five by default.
    #[arg(
        long = "method",
        value_delimiter = ',',
        default_value = "random,random2x,hyperband,bohb,smac"
    )]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub repeats: u32,
    #[command(flatten)]
    pub options: TuneOptions,
    /// Grid points for the ranking table.
    #[arg(long, default_value_t = 100)]
    pub resolution: usize,
    #[arg(long, env = "MTPTUNE_OUT", default_value = "mtptune-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Results directory written by `tune` or `benchmark`.
    pub results: PathBuf,
    /// Where to write the report; defaults to the results directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub resolution: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Low-rank matrix with uniformly missing cells.
    MatrixCompletion,
    /// Fully observed binary labels driven by instance features.
    Multilabel,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    #[arg(long, default_value_t = 80)]
    pub targets: usize,
    #[arg(long, default_value_t = 3)]
    pub rank: usize,
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.3)]
    pub observed: f64,
    #[arg(long, default_value_t = 10)]
    pub features: usize,
    #[arg(long, default_value_t = 0.1)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}
