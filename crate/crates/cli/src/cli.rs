use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bootperc",
    version,
    about = "Bootstrap percolation on G(n,p): thresholds, runs, sweeps and bounds"
)]
pub struct Cli {
    /// Seed for every stochastic command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Worker threads for multi-trial commands. A hint only.
    #[arg(long, global = true, env = "BOOTPERC_WORKERS")]
    pub workers: Option<usize>,

    /// Flat key=value file; its values fill in flags absent from the command line.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Implicit,
    Explicit,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Critical values δ, t₀, t_c, a_c.
    Thresholds(ParamArgs),
    /// One run of the process.
    Run(RunArgs),
    /// Same as `run --stages`.
    Stages(RunArgs),
    /// Percolation frequency over a list of seed sizes.
    Sweep(SweepArgs),
    /// Largest component of G(m, (1+eps)/m).
    Giant(GiantArgs),
    /// Evaluate one of the tail bounds.
    Bounds(BoundsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub r: u32,
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("size").required(true).args(["a", "alpha_offset"])))]
pub struct RunArgs {
    #[command(flatten)]
    pub params: ParamArgs,

    /// Initially infected vertices.
    #[arg(long)]
    pub a: Option<u64>,

    /// Seed size as a_c + c·⌈√a_c⌉.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_offset: Option<f64>,

    #[arg(long, value_enum, default_value_t = ModeArg::Implicit)]
    pub mode: ModeArg,

    /// Edge list (1-based "u v" lines) to run on; implies explicit mode.
    #[arg(long)]
    pub graph: Option<PathBuf>,

    /// Write the trace (t, |A(t)|, M(t)) as CSV.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,

    /// Add the stage report.
    #[arg(long)]
    pub stages: bool,

    /// Fraction of n that counts as almost percolated.
    #[arg(long, default_value_t = 0.9)]
    pub threshold: f64,

    #[arg(long)]
    pub max_steps: Option<u64>,
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("sizes").required(true).args(["a_list", "alpha_list"])))]
pub struct SweepArgs {
    #[command(flatten)]
    pub params: ParamArgs,

    #[arg(long, default_value_t = 100)]
    pub trials: u64,

    /// Comma-separated seed sizes.
    #[arg(long, value_delimiter = ',')]
    pub a_list: Option<Vec<u64>>,

    /// Comma-separated offsets c, giving a = a_c + c·⌈√a_c⌉.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alpha_list: Option<Vec<f64>>,

    #[arg(long, value_enum, default_value_t = ModeArg::Implicit)]
    pub mode: ModeArg,

    #[arg(long, default_value_t = 0.9)]
    pub threshold: f64,

    #[arg(long)]
    pub max_steps: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct GiantArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub eps: f64,
}

#[derive(Debug, Clone, Args)]
#[command(group(
    ArgGroup::new("kind")
        .required(true)
        .args(["chernoff", "martingale", "theorem1", "theorem2"])
))]
pub struct BoundsArgs {
    /// Binomial tails: needs --mean and --lambda.
    #[arg(long)]
    pub chernoff: bool,
    /// Martingale tail: needs --lambda, --max-step and --var-sum.
    #[arg(long)]
    pub martingale: bool,
    /// Subcritical failure bound: needs --n --p --r --alpha.
    #[arg(long)]
    pub theorem1: bool,
    /// Supercritical failure bound: needs --n --p --r --alpha.
    #[arg(long)]
    pub theorem2: bool,

    #[arg(long)]
    pub mean: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub max_step: Option<f64>,
    #[arg(long)]
    pub var_sum: Option<f64>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub r: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
}
