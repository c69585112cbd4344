//! `frogsim`: run frog model experiments and write CSV tables with manifests.
//!
//! Exit codes: 0 success, 2 invalid flags, 3 domain too small, 4 estimation
//! failure (every trial censored).

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use frogsim_core::{FrogError, SitePoint};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Parser, Serialize)]
#[command(name = "frogsim", version, about = "Frog model simulations on Z^d")]
struct Cli {
    /// Master seed; falls back to FROGSIM_SEED, then 0.
    #[arg(long, env = "FROGSIM_SEED", global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for CSV tables and the manifest; without it tables go to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
enum Command {
    /// First passage time between two sites.
    Passage(PassageArgs),
    /// Time-constant estimates T(0, v_n^x)/n.
    Mu(MuArgs),
    /// Time-constant estimates across densities with a log-log fit against delta_d(r).
    Sweep(SweepArgs),
    /// Visited regions B(t) for a list of times.
    Shape(ShapeArgs),
    /// Durations and ranges of chains of active frogs.
    ChainCheck(ChainArgs),
    /// Probability that the origin block is good.
    Good(GoodArgs),
    /// Directional recursion of active-frog clusters.
    Recursion(RecursionArgs),
    /// Sowing and activating event audits.
    Events(EventArgs),
    /// Random-walk statistics.
    #[command(subcommand)]
    Stats(StatsCommand),
}

#[derive(Debug, Args, Serialize)]
struct PassageArgs {
    #[arg(long, visible_alias = "d")]
    dim: usize,
    #[arg(long)]
    r: f64,
    /// Defaults to the origin.
    #[arg(long)]
    source: Option<SitePoint>,
    #[arg(long)]
    target: SitePoint,
    /// Relay sites are confined to the sup-norm box of this radius around the origin.
    #[arg(long, default_value_t = 20)]
    box_radius: u64,
    /// Time budget (default: 50 · L1² · max(delta, 1)²).
    #[arg(long)]
    horizon: Option<u64>,
    /// Place a frog at the source regardless of the sample.
    #[arg(long)]
    force_source: bool,
}

#[derive(Debug, Args, Serialize)]
struct MuArgs {
    #[arg(long, visible_alias = "d")]
    dim: usize,
    #[arg(long)]
    r: f64,
    /// Direction (default: first unit vector).
    #[arg(long)]
    x: Option<SitePoint>,
    #[arg(long, value_delimiter = ',', default_value = "20,40")]
    n_list: Vec<u64>,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long)]
    horizon: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
struct SweepArgs {
    #[arg(long, visible_alias = "d")]
    dim: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    r_list: Vec<f64>,
    #[arg(long)]
    x: Option<SitePoint>,
    #[arg(long, default_value_t = 40)]
    n: u64,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long)]
    horizon: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
struct ShapeArgs {
    #[arg(long, visible_alias = "d")]
    dim: usize,
    #[arg(long)]
    r: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    t_list: Vec<u64>,
    #[arg(long, default_value_t = 30)]
    box_radius: u64,
}

#[derive(Debug, Args, Serialize)]
struct ChainArgs {
    #[arg(long, visible_alias = "d")]
    dim: usize,
    #[arg(long)]
    r: f64,
    /// Index sequences separated by ';', e.g. "1;1,1;3,2".
    #[arg(long, default_value = "1")]
    specs: String,
    #[arg(long, default_value_t = 200)]
    trials: u64,
    /// Per-leg step budget (default: 50 · max(delta, 1)²).
    #[arg(long)]
    horizon: Option<u64>,
    /// Constant C in the duration event sum(sigma) <= C delta² sum(I).
    #[arg(long, default_value_t = 4.0)]
    duration_constant: f64,
    /// Constant C in the range event max|S|_1 >= C delta t.
    #[arg(long, default_value_t = 0.5)]
    range_constant: f64,
    /// Time t of the range event.
    #[arg(long, default_value_t = 10.0)]
    range_time: f64,
}

#[derive(Debug, Args, Serialize)]
struct RenormArgs {
    #[arg(long, default_value_t = 0.5)]
    c_ckn: f64,
    /// Use small hand-set boxes instead of sizes derived from r.
    #[arg(long)]
    override_exponents: bool,
    /// Inner box radius of the override geometry.
    #[arg(long, default_value_t = 2)]
    desk_radius: u64,
}

#[derive(Debug, Args, Serialize)]
struct GoodArgs {
    #[arg(long, visible_alias = "d")]
    dim: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    r_list: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[command(flatten)]
    renorm: RenormArgs,
}

#[derive(Debug, Args, Serialize)]
struct RecursionArgs {
    #[arg(long, visible_alias = "d")]
    dim: usize,
    #[arg(long)]
    r: f64,
    /// Unit direction (default: first unit vector).
    #[arg(long)]
    xi: Option<SitePoint>,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[command(flatten)]
    renorm: RenormArgs,
}

#[derive(Debug, Args, Serialize)]
struct EventArgs {
    #[arg(long, visible_alias = "d")]
    dim: usize,
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[command(flatten)]
    renorm: RenormArgs,
}

#[derive(Debug, Subcommand, Serialize)]
enum StatsCommand {
    /// Exact Paley-Zygmund audit by path enumeration.
    Pz {
        #[arg(long, visible_alias = "d")]
        dim: usize,
        #[arg(long)]
        n: u32,
        /// Target sets separated by '|', sites by ';' (default: every nonempty subset of the unit box minus the origin).
        #[arg(long)]
        gamma: Option<String>,
    },
    /// Mean range size against phi_d(n).
    Range {
        #[arg(long, visible_alias = "d")]
        dim: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<u64>,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
    },
    /// Probability of hitting z within n steps.
    Hitting {
        #[arg(long, visible_alias = "d")]
        dim: usize,
        /// Targets separated by ';'.
        #[arg(long, value_delimiter = ';', required = true)]
        z: Vec<SitePoint>,
        /// Step budget (default: ceil(|z|_2²) per target).
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
    /// Frequency of a small range inside the ball of radius n^(1/2+beta).
    Deviation {
        #[arg(long, visible_alias = "d")]
        dim: usize,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
    },
    /// Covering shortfall frequencies for walks from A over B.
    Ckn {
        #[arg(long, visible_alias = "d")]
        dim: usize,
        #[arg(long)]
        n: u64,
        /// Starting sites separated by ';'.
        #[arg(long, value_delimiter = ';', required = true)]
        a: Vec<SitePoint>,
        /// Centre of the sup-norm box B.
        #[arg(long)]
        b_center: SitePoint,
        #[arg(long, default_value_t = 1)]
        b_radius: u64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 0.2)]
        c_ckn: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
    /// Upper tail of adapted Bernoulli sums.
    Chernoff {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        c: f64,
        #[arg(long, value_enum, default_value_t = ScheduleKind::Iid)]
        schedule: ScheduleKind,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum ScheduleKind {
    Iid,
    Alternating,
    Adversarial,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] FrogError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(FrogError::OutsideDomain(_) | FrogError::DomainTooSmall(_)) => 3,
            CliError::Core(FrogError::EstimationFailure(_) | FrogError::NotFinite) => 4,
            CliError::Core(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
