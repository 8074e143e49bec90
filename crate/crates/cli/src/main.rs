//! `driftcast` command-line entry point.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit status for usage and schema errors.
const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "driftcast", version, about = "Predict protest declarations from social media timelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a corpus directory from posts and interactions files.
    Ingest(IngestArgs),
    /// Train one model per candidate user.
    Train(TrainArgs),
    /// Classify candidate users from trained models and report metrics.
    Evaluate(EvaluateArgs),
    /// Test the support and alternative-tie postulates on a corpus.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic dataset with known ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// posts.jsonl
    #[arg(long)]
    posts: PathBuf,
    /// interactions.jsonl
    #[arg(long)]
    interactions: PathBuf,
    /// Corpus options as JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output corpus directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Corpus directory written by `ingest`.
    #[arg(long)]
    corpus: PathBuf,
    /// Hyperparameters as JSON; missing fields take their defaults.
    #[arg(long)]
    hyper: Option<PathBuf>,
    /// Output directory; models go to `<out>/models`.
    #[arg(long)]
    out: PathBuf,
    /// Pin drift factors to 1 and drop the network regularizer.
    #[arg(long)]
    ablation_int: bool,
    /// Worker threads.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    /// Overrides the seed in the hyperparameter file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Output directory of `train`.
    #[arg(long)]
    models: PathBuf,
    /// Output directory of `train --ablation-int`, evaluated as `-Int`.
    #[arg(long)]
    ablation_models: Option<PathBuf>,
    /// Corpus directory the models were trained on.
    #[arg(long)]
    corpus: PathBuf,
    /// Training share of users, ordered by candidate time; comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    train_fraction: Vec<f64>,
    /// Retrain the full model for each regularizer weight; comma separated.
    #[arg(long, value_delimiter = ',')]
    wreg_grid: Option<Vec<f64>>,
    /// Also report the label-shuffling baseline.
    #[arg(long)]
    random: bool,
    /// Report JSON path.
    #[arg(long)]
    report: PathBuf,
    /// Worker threads for retraining.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    /// Seed for sampled features, retraining and the random baseline;
    /// defaults to the models' seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Corpus directory written by `ingest`.
    #[arg(long)]
    corpus: PathBuf,
    /// paired or welch.
    #[arg(long, default_value = "welch")]
    mode: String,
    /// Seed for matching group sizes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report JSON path.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Generator settings as JSON; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("DRIFTCAST_LOG", "warn");
    env_logger::Builder::from_env(env).format_timestamp(None).init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    init_logging();
    let result = match cli.command {
        Command::Ingest(args) => commands::ingest(args),
        Command::Train(args) => commands::train(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Analyze(args) => commands::analyze(args),
        Command::Synth(args) => commands::synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if commands::is_usage_error(&err) { EXIT_USAGE } else { EXIT_RUNTIME })
        }
    }
}
