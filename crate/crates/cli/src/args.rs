use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mqa_core::{Method, TaskKind};

#[derive(Debug, Parser)]
#[command(name = "mqa", version, about = "Multi-choice QA harness for multimodal information extraction")]
pub struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one configuration and write predictions, report and manifest.
    Run(RunArgs),
    /// Score a predictions file against a gold dataset.
    Eval(EvalArgs),
    /// Aggregate F1 over instruction variants and option orders.
    Robustness(RobustnessArgs),
    /// Draw a proportional few-shot sample or a train/val/test split.
    Sample(SampleArgs),
    /// Check a dataset against its label schema.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Fidelity {
    Schema,
    Published,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Policy {
    Exclude,
    Include,
}

impl From<Policy> for mqa_core::NotaPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Exclude => mqa_core::NotaPolicy::Exclude,
            Policy::Include => mqa_core::NotaPolicy::Include,
        }
    }
}

/// Experiment settings. Flags override values read from `--config`.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML experiment file; relative paths in it resolve against its directory.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<TaskKind>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Built-in schema name or schema file path.
    #[arg(long)]
    pub schema: Option<String>,
    /// vanilla, mqa or mqa_gold_span.
    #[arg(long)]
    pub method: Option<Method>,
    /// Instruction variant, 1 to 4.
    #[arg(long)]
    pub variant: Option<u8>,
    /// Answer-option shuffle seed; 0 keeps schema order.
    #[arg(long)]
    pub option_seed: Option<u64>,
    /// oracle, content-oracle, always-nota, transcript:PATH, remote:PATH or text-only:SPEC.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Instances processed in parallel.
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[arg(long, value_enum)]
    pub fidelity: Option<Fidelity>,
    #[arg(long)]
    pub span_case_sensitive: Option<bool>,
    #[arg(long)]
    pub max_new_tokens: Option<u32>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long, value_enum)]
    pub nota_policy: Option<Policy>,
    /// Replay missing transcript entries as empty answers instead of errors.
    #[arg(long)]
    pub lenient_transcript: bool,
    /// Directory of prompt templates replacing the built-in ones.
    #[arg(long)]
    pub templates_dir: Option<PathBuf>,
    /// Append every answered request to this transcript for later replay.
    #[arg(long)]
    pub record_transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Gold dataset (JSONL).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Predictions file written by `mqa run`.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Schema; defaults to the one named in the dataset header.
    #[arg(long)]
    pub schema: Option<String>,
    #[arg(long, value_enum, default_value = "exclude")]
    pub nota_policy: Policy,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    /// Aggregate these already-recorded F1 percentages instead of running.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub scores: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    pub variants: Vec<u8>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Schema; defaults to the one named in the dataset header.
    #[arg(long)]
    pub schema: Option<String>,
    /// Sample size (training set size for a split).
    #[arg(long)]
    pub k: usize,
    /// Validation size; when given, writes a train/val/test split.
    #[arg(long)]
    pub val: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for the id files.
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Schema; defaults to the one named in the dataset header.
    #[arg(long)]
    pub schema: Option<String>,
}
