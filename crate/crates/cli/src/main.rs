use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vbspca::diagnosis::IndexKind;
use vbspca::pipeline::Variant;

mod artifacts;
mod commands;
mod config;
mod failure;
mod output;
mod report;

use config::LambdaSetting;

/// Sparse Bayesian PCA process monitoring.
#[derive(Debug, Parser)]
#[command(name = "vbspca", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate training and faulty test data from a scenario.
    Simulate(SimulateArgs),
    /// Fit the model, VAR dynamics and control limits.
    Train(TrainArgs),
    /// Compute T² and SPE with alarms for a test set.
    Detect(DetectArgs),
    /// Compute reconstruction-based contributions for a test set.
    Diagnose(DiagnoseArgs),
    /// Aggregate detection and diagnosis outputs of a run directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset")]
    pub scenario: Option<PathBuf>,
    /// Built-in scenario: fault2-analogue or fault6-analogue.
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory for normal.csv, faulty.csv and truth.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the scenario's process seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training CSV (header of tags, one row per sample).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output training report; defaults to the model path with a
    /// `.report.json` suffix.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// VAR order.
    #[arg(long)]
    pub tau: Option<usize>,
    /// VAR penalty: a number or "cv".
    #[arg(long)]
    pub lambda: Option<LambdaSetting>,
    /// Maximum rank (gaussian) or fixed rank (laplace).
    #[arg(long)]
    pub rank: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// First faulty sample, 1-based; samples + 1 for fault-free data.
    #[arg(long)]
    pub onset: Option<usize>,
    /// Output directory for detection.csv and detection.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Index to decompose: t2 or spe.
    #[arg(long)]
    pub kind: Option<IndexKind>,
    /// First faulty sample, used for the summary ranking.
    #[arg(long)]
    pub onset: Option<usize>,
    /// Output directory for rbc_<kind>.csv and rbc_<kind>.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding detection and diagnosis outputs.
    pub run: PathBuf,
    /// Ground-truth JSON; defaults to truth.json in the run directory if
    /// present.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VBSPCA_LOG", "warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Train(a) => commands::train(a),
        Command::Detect(a) => commands::detect(a),
        Command::Diagnose(a) => commands::diagnose(a),
        Command::Report(a) => report::run(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
