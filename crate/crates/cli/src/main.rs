//! `lolws`: featurize corpora, apply labelers, train, sweep, ablate and report.

mod commands;
mod manifest;
mod task;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "lolws",
    version,
    about = "Weak supervision by turning labelers into losses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Featurize a JSONL corpus into train/validation/test caches.
    Featurize(FeaturizeArgs),
    /// Generate a synthetic keyword-labeler task.
    Synth(SynthArgs),
    /// Apply labelers to a dataset and estimate their accuracies.
    Label(LabelArgs),
    /// Train one model.
    Run(RunArgs),
    /// Grid or budgeted hyperparameter search.
    Sweep(SweepArgs),
    /// Compare methods across seeds.
    Ablate(AblateArgs),
    /// Tabulate stored reports and ablation tables.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct FeaturizeArgs {
    /// JSONL file with one `{"text": ..., "label": ...}` object per line.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 5000)]
    pub vocab_limit: usize,
    /// Record word presence instead of counts.
    #[arg(long)]
    pub binarize: bool,
    #[arg(long)]
    pub num_classes: Option<usize>,
    /// Train,validation,test fractions.
    #[arg(long, default_value = "0.8,0.1,0.1")]
    pub fractions: String,
    /// Take exactly N validation examples per class; 20% goes to test.
    #[arg(long)]
    pub val_per_class: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SynthArgs {
    /// JSON generator parameters; defaults otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct LabelArgs {
    /// Dataset cache directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub labelers: PathBuf,
    #[arg(long, default_value_t = lolws_core::labelmodels::DEFAULT_MIN_OVERLAP)]
    pub min_overlap: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Options shared by the training commands. Flags override the config file.
#[derive(Args, Clone)]
pub struct TaskArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset cache directory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub labelers: Option<PathBuf>,
    /// WRENCH-style dataset directory.
    #[arg(long)]
    pub wrench: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_train: Option<usize>,
    #[arg(long)]
    pub val_per_class: Option<usize>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub task: TaskArgs,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    /// Evaluate a seeded random subset of this many grid points.
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    /// Comma-separated method names.
    #[arg(long)]
    pub methods: Option<String>,
    /// A seed count (starting at --seed or 0) or a comma-separated list.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Sweep hyperparameters once per method before the seeded runs.
    #[arg(long)]
    pub search: bool,
    /// Sweep separately for every seed.
    #[arg(long)]
    pub search_per_seed: bool,
    #[arg(long)]
    pub budget: Option<usize>,
    /// Table printed to standard output.
    #[arg(long, default_value = "text")]
    pub format: String,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Report files or directories searched recursively.
    #[arg(default_value = ".")]
    pub paths: Vec<PathBuf>,
    #[arg(long, default_value = "text")]
    pub format: String,
    /// Write the table here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LOLWS_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Featurize(a) => commands::featurize(a),
        Command::Synth(a) => commands::synth(a),
        Command::Label(a) => commands::label(a),
        Command::Run(a) => commands::run(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
