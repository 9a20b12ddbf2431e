//! `eprop`: feature extraction, training, evaluation and single-synapse demos.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eprop_core::demo::DemoModel;
use eprop_core::network::BroadcastMode;
use eprop_core::neuron::ModelKind;

/// Exit code for runs that started but failed.
const EXIT_RUN: u8 = 1;
/// Exit code for bad arguments, missing inputs and invalid configuration.
const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "eprop",
    version,
    about = "Train recurrent spiking networks with e-prop"
)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Index a TIMIT corpus and write per-utterance MFCC caches.
    Features(FeaturesArgs),
    /// Train a network on cached features or on the synthetic task.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split.
    Eval(EvalArgs),
    /// Simulate one synapse under a scripted stimulation protocol.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus root with TRAIN and TEST directories.
    #[arg(long)]
    timit: Option<PathBuf>,
    /// Cache directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the validation draw.
    #[arg(long)]
    seed: Option<u64>,
    /// Rebuild even if the cache is up to date.
    #[arg(long)]
    force: bool,
    /// Accept corpus subsets instead of requiring the full split sizes.
    #[arg(long)]
    partial: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Train on the synthetic task instead of cached speech features.
    #[arg(long)]
    synthetic: bool,
    /// Output directory for metrics and checkpoints.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue from `last.ckpt` in the output directory.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
    #[arg(long, value_parser = parse_broadcast)]
    broadcast: Option<BroadcastMode>,
    #[arg(long)]
    layers: Option<usize>,
    /// Total hidden neurons.
    #[arg(long)]
    neurons: Option<usize>,
    /// Disable Izhikevich eligibility clipping.
    #[arg(long)]
    no_clip: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// One of train, val, test.
    #[arg(long, default_value = "test")]
    split: String,
    /// Metrics CSV to append to; defaults to `eval.csv` next to the checkpoint.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DemoArgs {
    /// alif, stdp-alif, izh or izh-unclipped; defaults to the protocol's model.
    #[arg(long, value_parser = parse_demo_model)]
    model: Option<DemoModel>,
    /// Protocol file, or the name of a built-in protocol.
    #[arg(long)]
    protocol: String,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the protocol's constant learning signal.
    #[arg(long)]
    learning_signal: Option<f64>,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: eprop_core::Error| e.to_string())
}

fn parse_broadcast(s: &str) -> Result<BroadcastMode, String> {
    s.parse().map_err(|e: eprop_core::Error| e.to_string())
}

fn parse_demo_model(s: &str) -> Result<DemoModel, String> {
    s.parse().map_err(|e: eprop_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Features(a) => commands::features(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Demo(a) => commands::demo(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(commands::Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUN)
        }
    }
}
