use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "sealbid",
    version,
    about = "Sealed-bid auction protocol simulator and incentive checks"
)]
pub struct Cli {
    /// Seed for every random choice; required by randomized experiments.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (trace for `run`, report otherwise).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Small insecure cryptographic parameters.
    #[arg(long, global = true)]
    pub test_profile: bool,
    /// JSON file with default values for any flag; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the protocol once and print a summary.
    Run(RunArgs),
    /// Incentive-compatibility sweep over the standard script suite.
    IcSweep(SweepArgs),
    /// Ascending, second-price and optimal revenue per value profile, as CSV.
    Revenue(RevenueArgs),
    /// Forced-decryption wall time for several difficulties.
    BenchFdec(BenchArgs),
}

#[derive(Args, Debug, Default)]
pub struct DomainArgs {
    /// Equally spaced grid on [0, 1] with this many ticks.
    #[arg(long)]
    pub ticks: Option<usize>,
    /// Explicit comma-separated ticks, e.g. `0,0.5,1`.
    #[arg(long)]
    pub domain: Option<String>,
    /// Probabilities of the ticks, comma-separated; uniform if absent.
    #[arg(long)]
    pub pmf: Option<String>,
    /// Distribution document `{"ticks": [...], "pmf": [...]}`.
    #[arg(long)]
    pub dist: Option<PathBuf>,
    /// Number of items.
    #[arg(long)]
    pub k: Option<usize>,
    /// Reserve price; defaults to the prior's optimal reserve.
    #[arg(long)]
    pub reserve: Option<String>,
    /// `second-price`, `ascending`, or for sweeps `first-price`.
    #[arg(long)]
    pub mechanism: Option<String>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    /// Buyer values, comma-separated; buyers get identities 1, 2, ...
    #[arg(long)]
    pub bids: Option<String>,
    /// Named adversary script, or `none`.
    #[arg(long)]
    pub adversary: Option<String>,
    /// Include raw payloads in the trace.
    #[arg(long)]
    pub full: bool,
    #[arg(long)]
    pub coin_bits: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    /// Number of buyers including coalition members.
    #[arg(long)]
    pub n: Option<usize>,
    /// `all`, `buyer`, `seller`, `platform`, `platform-seller` or `platform-buyer`.
    #[arg(long)]
    pub coalition: Option<String>,
    /// `bayesian` or `ex-post`.
    #[arg(long)]
    pub setting: Option<String>,
    /// Honest bids for the ex-post setting; all profiles if absent.
    #[arg(long)]
    pub others: Option<String>,
    /// `exact` or `monte-carlo`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// `standard` or `none`.
    #[arg(long)]
    pub scripts: Option<String>,
}

#[derive(Args, Debug)]
pub struct RevenueArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Base-2 logarithms of the difficulties, comma-separated.
    #[arg(long)]
    pub t_log2: Option<String>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Modulus size; 512 under the test profile, 2048 otherwise.
    #[arg(long)]
    pub bits: Option<u64>,
}

/// Defaults read from `--config`. Keys mirror the long flag names with
/// underscores.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub test_profile: Option<bool>,
    pub ticks: Option<usize>,
    pub domain: Option<String>,
    pub pmf: Option<String>,
    pub dist: Option<PathBuf>,
    pub k: Option<usize>,
    pub reserve: Option<String>,
    pub mechanism: Option<String>,
    pub bids: Option<String>,
    pub adversary: Option<String>,
    pub full: Option<bool>,
    pub coin_bits: Option<usize>,
    pub n: Option<usize>,
    pub coalition: Option<String>,
    pub setting: Option<String>,
    pub others: Option<String>,
    pub mode: Option<String>,
    pub samples: Option<usize>,
    pub scripts: Option<String>,
    pub t_log2: Option<String>,
    pub repeats: Option<usize>,
    pub bits: Option<u64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

impl DomainArgs {
    /// Fills unset flags from the file.
    pub fn merge(mut self, file: &FileConfig) -> Self {
        self.ticks = self.ticks.or(file.ticks);
        self.domain = self.domain.or_else(|| file.domain.clone());
        self.pmf = self.pmf.or_else(|| file.pmf.clone());
        self.dist = self.dist.or_else(|| file.dist.clone());
        self.k = self.k.or(file.k);
        self.reserve = self.reserve.or_else(|| file.reserve.clone());
        self.mechanism = self.mechanism.or_else(|| file.mechanism.clone());
        self
    }
}
