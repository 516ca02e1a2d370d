//! `ef`: batch pipeline over the ensemble-fusion engine.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 numeric failure. Failures print one `error code=... kind=... message=...`
//! line on stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ensemble_fusion::ErrorKind;

#[derive(Debug, Parser)]
#[command(name = "ef", version, about = "Fuse classifier score tables and run the surrounding pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stratified train/test split of a manifest.
    Split(SplitArgs),
    /// Resize, normalize and (for training samples) augment manifest images.
    Preprocess(PreprocessArgs),
    /// Turn manifest images into a feature CSV.
    Features(FeaturesArgs),
    /// Train the linear base classifier.
    TrainBase(TrainBaseArgs),
    /// Out-of-fold scores of the base classifier, for training stackers.
    Oof(OofArgs),
    /// Score a feature file with a saved model.
    Predict(PredictArgs),
    /// Train a bagged ensemble of base classifiers.
    Bag(BagArgs),
    /// Train a boosted ensemble of base classifiers.
    Boost(BoostArgs),
    /// Combine aligned score tables.
    Fuse(FuseArgs),
    /// Fuse a binary detector with a multiclass classifier.
    Cascade(CascadeArgs),
    /// Confusion matrix, metrics and report for a labeled score table.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Seed for every random choice made by the command.
    #[arg(long, env = "EF_SEED", default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ClassesArg {
    /// Comma-separated label space; inferred from first appearance when absent.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub ratio: f64,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub classes: ClassesArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Pad,
    Stretch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AugmentArg {
    None,
    Rot90,
    FlipH,
    FlipV,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Split file; training samples are augmented, test samples are not.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, default_value_t = 224)]
    pub size: usize,
    #[arg(long, value_enum, default_value = "pad")]
    pub mode: ModeArg,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "none")]
    pub augment: Vec<AugmentArg>,
    /// Skip min-max normalization.
    #[arg(long)]
    pub no_normalize: bool,
    #[command(flatten)]
    pub classes: ClassesArg,
    /// Output directory for PGM files and `manifest.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Images are resampled to side×side before flattening.
    #[arg(long, default_value_t = 16)]
    pub side: usize,
    #[command(flatten)]
    pub classes: ClassesArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PartitionArg {
    Train,
    Test,
}

#[derive(Debug, Args)]
pub struct FeatureInput {
    #[arg(long)]
    pub features: PathBuf,
    /// Keep only rows whose source sample lies in `--partition` of this split.
    #[arg(long, requires = "partition")]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum, requires = "split")]
    pub partition: Option<PartitionArg>,
    #[command(flatten)]
    pub classes: ClassesArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct TrainBaseArgs {
    #[command(flatten)]
    pub input: FeatureInput,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OofArgs {
    #[command(flatten)]
    pub input: FeatureInput,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: FeatureInput,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BagArgs {
    #[command(flatten)]
    pub input: FeatureInput,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = 15)]
    pub replicates: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoostArgs {
    #[command(flatten)]
    pub input: FeatureInput,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = 10)]
    pub rounds: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Majority,
    Max,
    Avg,
    Wavg,
    Stack,
    Moe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TieArg {
    Lowest,
    Random,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Aligned score tables, one per model.
    #[arg(long, num_args = 1.., required = true)]
    pub scores: Vec<PathBuf>,
    /// `w1,w2,...`, or `accuracy` / `grid` to fit weights on the validation tables.
    #[arg(long, required_if_eq("method", "wavg"))]
    pub weights: Option<String>,
    /// Labeled tables for fitting weights; defaults to `--scores`.
    #[arg(long, num_args = 1..)]
    pub validation_scores: Option<Vec<PathBuf>>,
    /// Grid resolution for `--weights grid`.
    #[arg(long, default_value_t = 10)]
    pub grid_steps: usize,
    #[arg(long, value_enum, default_value = "lowest")]
    pub tie: TieArg,
    /// Saved meta-model (stack) or gate (moe).
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Labeled out-of-fold tables to train the meta-model or gate on.
    #[arg(long, num_args = 1..)]
    pub train_scores: Option<Vec<PathBuf>>,
    /// Gate features for the rows of `--train-scores`.
    #[arg(long)]
    pub train_features: Option<PathBuf>,
    /// Gate features for the rows of `--scores`.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Where to save a freshly trained meta-model or gate.
    #[arg(long)]
    pub save_meta: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Lift,
    Gate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PostArg {
    Avg,
    Wavg,
}

#[derive(Debug, Args)]
pub struct CascadeArgs {
    #[arg(long)]
    pub binary: PathBuf,
    #[arg(long)]
    pub multi: PathBuf,
    #[arg(long, value_enum, default_value = "lift")]
    pub rule: RuleArg,
    /// Gate threshold on the detector's negative probability.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Combiner applied to the lifted detector and the multiclass vector.
    #[arg(long, value_enum, default_value = "avg")]
    pub post: PostArg,
    /// `w_lifted,w_multi` for `--post wavg`.
    #[arg(long, value_delimiter = ',', required_if_eq("post", "wavg"))]
    pub weights: Option<Vec<f64>>,
    #[arg(long, default_value = "no")]
    pub binary_negative: String,
    #[arg(long, default_value = "no_tumor")]
    pub multi_negative: String,
    /// Also write the cascade configuration as JSON.
    #[arg(long)]
    pub spec_out: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// JSON report destination; the text table goes to stdout.
    #[arg(long)]
    pub report: PathBuf,
    /// Name of the partition the rows come from.
    #[arg(long, default_value = "test")]
    pub split_name: String,
    /// Fusion configuration to embed in the report.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "lowest")]
    pub tie: TieArg,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Engine(ensemble_fusion::Error),
}

impl From<ensemble_fusion::Error> for CliError {
    fn from(e: ensemble_fusion::Error) -> Self {
        CliError::Engine(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Engine(e) => match e.kind() {
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            },
        }
    }

    fn line(&self) -> String {
        let (code, kind, message) = match self {
            CliError::Usage(m) => ("USAGE", "usage", m.clone()),
            CliError::Engine(e) => (
                e.code(),
                match e.kind() {
                    ErrorKind::Data => "data",
                    ErrorKind::Numeric => "numeric",
                },
                e.to_string(),
            ),
        };
        format!("error code={code} kind={kind} message={}", message.replace('\n', " "))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            let summary = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::Usage(summary).line());
            return ExitCode::from(1);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code())
        }
    }
}
