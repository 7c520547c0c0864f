use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Jsonl,
    PortoCsv,
}

#[derive(Debug, Parser)]
#[command(
    name = "dp-stts",
    version,
    about = "Differentially private trajectory synthesis"
)]
pub struct Cli {
    /// TOML file with defaults for any flag (flags win).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a private model to a dataset and write the model file.
    Build(BuildArgs),
    /// Sample a synthetic JSON-lines dataset from a model file.
    Synthesize(SynthesizeArgs),
    /// Score a synthetic dataset (or fresh samples from a model) against the original.
    Evaluate(EvaluateArgs),
    /// build + synthesize + evaluate for one or more budgets.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct InputArgs {
    /// Original dataset.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DomainArgs {
    /// lat_min,lon_min,lat_max,lon_max; defaults to the data's extent.
    #[arg(long, allow_hyphen_values = true)]
    pub bbox: Option<String>,
    /// HH:MM-HH:MM (daily, UTC) or start,end; defaults to the data's time span.
    #[arg(long, allow_hyphen_values = true)]
    pub time_window: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Cube grid, WxHxT.
    #[arg(long)]
    pub grid: Option<String>,
    /// Longest in-place dwell (in time slices) treated as one step.
    #[arg(long)]
    pub v: Option<u32>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Share of epsilon spent on the start distribution.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Build without noise (no privacy; for testing).
    #[arg(long)]
    pub noise_off: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GenArgs {
    /// Number of synthetic trajectories; defaults to the original dataset size.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    /// Evaluation grid, WxH.
    #[arg(long)]
    pub eval_grid: Option<String>,
    /// AvRE sanity bound as a fraction of the original dataset size.
    #[arg(long)]
    pub sanity_fraction: Option<f64>,
    /// Number of frequent patterns compared by FP KT.
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub bin_minutes: Option<f64>,
    /// Repeat synthesis and evaluation with derived seeds and average.
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub domain: DomainArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub gen: GenArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON-lines file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Synthetic JSON-lines dataset. Without it, samples are drawn from `--model`.
    #[arg(long)]
    pub synthetic: Option<PathBuf>,
    /// Model file; also supplies the domain.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub domain: DomainArgs,
    #[command(flatten)]
    pub gen: GenArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for the report and plot data.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub domain: DomainArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated budgets to sweep; defaults to `--epsilon`.
    #[arg(long)]
    pub epsilons: Option<String>,
    #[command(flatten)]
    pub gen: GenArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
