use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tactslip_core::{FeatureSet, ModelKind};

#[derive(Debug, Parser)]
#[command(name = "tactslip", version, about = "Slip detection from optical-tactile marker fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic feature dataset.
    Gen(GenArgs),
    /// Train one classifier and save it as JSON.
    Train(TrainArgs),
    /// Compare classifiers on velocity-only and full feature sets.
    Eval(EvalArgs),
    /// Run the streaming detector over a marker stream.
    Detect(DetectArgs),
    /// Closed-loop book-slide demo against the grasp simulator.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Scenario config (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "dataset.csv")]
    pub out: PathBuf,
    /// Also write per-episode marker CSVs and labels here.
    #[arg(long)]
    pub markers_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature CSV; the default synthetic dataset when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "rf")]
    pub model: ModelKind,
    #[arg(long, default_value = "all")]
    pub features: FeatureSet,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    /// Grid-search hyperparameters and write the CV table to this path.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Hyperparameter override, `key=value`; repeatable.
    #[arg(long = "param")]
    pub params: Vec<String>,
    /// Hyperparameters as `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// k-fold cross-validation instead of a single split.
    #[arg(long)]
    pub cv: Option<usize>,
    /// Restrict to these classifiers; repeatable.
    #[arg(long)]
    pub model: Vec<ModelKind>,
    /// Restrict to these feature sets; repeatable.
    #[arg(long)]
    pub features: Vec<FeatureSet>,
    /// Score a saved model on every row instead of training.
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    /// Report CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Scenario config for the synthetic dataset when `--data` is omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Trained model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Marker CSV (`t,idx,x,y`), `-` for standard input, or a PGM directory.
    #[arg(long, default_value = "-")]
    pub input: String,
    /// Marker CSV whose first frame is the undeformed gel.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Episode log CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also run the grip controller and log its force command.
    #[arg(long)]
    pub control: bool,
    /// Unused; detection is deterministic.
    #[arg(long, hide = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Trained model JSON; a random forest on the default dataset when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "demo_log.csv")]
    pub out: PathBuf,
    /// Phase report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}
