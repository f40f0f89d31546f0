use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::sequence::StrategyKind;

#[derive(Debug, Parser)]
#[command(name = "clusterprior", version, about = "Prioritize crowdsourced test reports")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Produce one prioritized sequence and write every artifact to --out.
    Prioritize(PrioritizeArgs),
    /// Score a sequence file against ground truth.
    Evaluate(EvaluateArgs),
    /// Run repeated trials for several strategies and compare them.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// Chat-completions endpoint URL.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// TOML file with backend settings (endpoint, model_name, temperature, ...).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scripted mock answers, `PATH` or `STRATEGY=PATH`. Repeatable.
    #[arg(long = "mock-script", value_name = "[STRATEGY=]PATH")]
    pub mock_scripts: Vec<String>,
    /// Replay the mock script from the start when it runs out.
    #[arg(long)]
    pub mock_cycle: bool,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    /// Request timeout in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Prompt template override, `PATH` (cluster variant) or `VARIANT=PATH`. Repeatable.
    #[arg(long = "template", value_name = "[VARIANT=]PATH")]
    pub templates: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PrioritizeArgs {
    #[arg(long)]
    pub reports: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value = "llmprior")]
    pub strategy: StrategyKind,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub sequence: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Corpus to validate the ground truth against (optional).
    #[arg(long)]
    pub reports: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub reports: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Strategies to compare, comma-separated or repeated (at least two).
    #[arg(long = "strategy", value_delimiter = ',', required = true)]
    pub strategies: Vec<StrategyKind>,
    /// First seed (`N`) or an inclusive range (`A..B` / `A-B`).
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
}
