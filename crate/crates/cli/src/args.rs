use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cascade", version, about = "Cost-ordered routing cascades: simulate, replay, sweep, label")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic pool from the config and run the cascade.
    Simulate(SimulateArgs),
    /// Run the cascade over a recorded trace file.
    Replay(ReplayArgs),
    /// One run per preference factor plus a combined CSV.
    Sweep(SweepArgs),
    /// Build answer/reject training labels from a trace file.
    Label(LabelArgs),
}

/// Flag overrides applied on top of the config file; they enter the
/// config hash, so overridden runs are fingerprinted distinctly.
#[derive(Args)]
pub struct RunOverrides {
    /// Override the engine seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the preference factor (picks the matching named scenario
    /// when one exists).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Override the reliability factor.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Overhead mode: none | fractional | fractional:<f>.
    #[arg(long)]
    pub overhead: Option<String>,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: RunOverrides,
    /// Also print and write a method-by-scenario grid over alpha in
    /// {0.2, 0.5, 0.8}.
    #[arg(long)]
    pub table2: bool,
}

#[derive(Args)]
pub struct ReplayArgs {
    /// Capability trace file (JSONL, schema v1).
    #[arg(long)]
    pub trace: PathBuf,
    /// Query dataset (JSONL: id, optional payload and tags). Defaults to
    /// the trace file's queries; payloads are required for live agents.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: RunOverrides,
    /// Comma-separated agent ids dropped from the pool before running;
    /// policies are untouched.
    #[arg(long, value_delimiter = ',')]
    pub pool_remove: Vec<String>,
    #[arg(long)]
    pub table2: bool,
}

#[derive(Args)]
pub struct SweepArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated preference factors, one run each.
    #[arg(long, value_delimiter = ',', required = true)]
    pub alphas: Vec<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Trace file to replay; when absent the config's [synthetic]
    /// section supplies the data.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub overhead: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub pool_remove: Vec<String>,
}

#[derive(Args)]
pub struct LabelArgs {
    /// Capability trace file (JSONL, schema v1).
    #[arg(long)]
    pub trace: PathBuf,
    /// Comma-separated preference factors; one labeling pass each.
    #[arg(long, value_delimiter = ',', required = true)]
    pub alphas: Vec<f64>,
    /// Output label file (JSONL).
    #[arg(long)]
    pub out: PathBuf,
    /// Downsample each (agent, scenario) stratum to equal answer/reject
    /// counts and equal scenario sizes.
    #[arg(long)]
    pub balance: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
}
