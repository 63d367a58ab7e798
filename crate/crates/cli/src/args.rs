use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "mrc-dof-lab",
    version,
    about = "DoF bounds and signal-space-alignment simulator for the MIMO multi-way relay channel"
)]
pub struct Cli {
    /// Flat JSON object keyed by flag names; explicit flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cut-set bound, regime and private-only comparison for one configuration.
    Bounds(BoundsArgs),
    /// Noiseless end-to-end check of the alignment scheme.
    Verify(RunArgs),
    /// Noiseless check plus DoF slope estimation over a power grid.
    Simulate(RunArgs),
    /// Cartesian sweep over K, M and N.
    Sweep(SweepArgs),
    /// Private-only versus common-plus-private table for N = 1..nmax.
    Table1(Table1Args),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated transmit powers (linear scale).
    #[arg(long = "p-grid", value_delimiter = ',')]
    pub p_grid: Option<Vec<f64>>,
    /// Scale slope and rate columns by 1/2.
    #[arg(long = "half-duplex")]
    pub half_duplex: bool,
    #[arg(long, conflicts_with = "no_reciprocal")]
    pub reciprocal: bool,
    /// Draw downlink channels independently of the uplink.
    #[arg(long = "no-reciprocal")]
    pub no_reciprocal: bool,
    #[arg(long = "dump-channels", value_name = "PATH")]
    pub dump_channels: Option<PathBuf>,
    #[arg(long = "load-channels", value_name = "PATH")]
    pub load_channels: Option<PathBuf>,
    #[arg(long = "dump-plan", value_name = "PATH")]
    pub dump_plan: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub m: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "p-grid", value_delimiter = ',')]
    pub p_grid: Option<Vec<f64>>,
    #[arg(long = "half-duplex")]
    pub half_duplex: bool,
    #[arg(long, conflicts_with = "no_reciprocal")]
    pub reciprocal: bool,
    #[arg(long = "no-reciprocal")]
    pub no_reciprocal: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Largest relay antenna count; defaults to K·M, past every regime boundary.
    #[arg(long)]
    pub nmax: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}
