//! `legnav` command-line entry point.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use legnav::multirobot::Method;

#[derive(Debug, Parser)]
#[command(name = "legnav", version, about = "Train, adapt and evaluate universal legged-navigation policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a universal policy from a TOML config.
    Train(TrainArgs),
    /// Grid-search the embedding for a robot (or fine-tune with --method no_z).
    Adapt(AdaptArgs),
    /// Evaluate a checkpoint on one robot at a given embedding.
    Eval(EvalArgs),
    /// Mean return for every embedding on the grid.
    Sweep(SweepArgs),
    /// Zero-shot success matrix of single-robot checkpoints.
    Matrix(MatrixArgs),
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    /// Base seed; every command is deterministic given it with --workers 1.
    #[arg(long, env = "LEGNAV_SEED")]
    seed: Option<u64>,
    /// Worker threads (1 forces the serial, bit-reproducible path).
    #[arg(long, env = "LEGNAV_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, env = "LEGNAV_OUT")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, env = "LEGNAV_CONFIG")]
    config: PathBuf,
    /// Total environment steps, overriding the config.
    #[arg(long, env = "LEGNAV_STEPS")]
    steps: Option<u64>,
    #[arg(long, env = "LEGNAV_METHOD", value_parser = parse_method)]
    method: Option<Method>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    #[arg(long, env = "LEGNAV_CHECKPOINT")]
    checkpoint: PathBuf,
    #[arg(long)]
    robot: String,
    /// Grid points over [-1, 1].
    #[arg(long, env = "LEGNAV_GRID")]
    grid: Option<usize>,
    /// Episodes per grid point.
    #[arg(long, env = "LEGNAV_EPISODES")]
    episodes: Option<usize>,
    /// `no_z` fine-tunes with the search's step budget; others search only.
    #[arg(long, env = "LEGNAV_METHOD", value_parser = parse_method)]
    method: Option<Method>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, env = "LEGNAV_CHECKPOINT")]
    checkpoint: PathBuf,
    #[arg(long)]
    robot: String,
    /// Embedding; defaults to the robot's trained value, or 0 for unseen robots.
    #[arg(long, allow_negative_numbers = true)]
    z: Option<f64>,
    #[arg(long, env = "LEGNAV_EPISODES")]
    episodes: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, env = "LEGNAV_CHECKPOINT")]
    checkpoint: PathBuf,
    #[arg(long)]
    robot: String,
    #[arg(long, env = "LEGNAV_GRID")]
    grid: Option<usize>,
    #[arg(long, env = "LEGNAV_EPISODES")]
    episodes: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    /// Single-robot checkpoints, one per policy.
    #[arg(long, num_args = 1.., required = true)]
    checkpoints: Vec<PathBuf>,
    /// Robots to drive; defaults to the checkpoints' training robots.
    #[arg(long, num_args = 1..)]
    robots: Vec<String>,
    #[arg(long, env = "LEGNAV_EPISODES")]
    episodes: Option<usize>,
    #[command(flatten)]
    common: Common,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).map_err(|_| {
        let names: Vec<&str> = Method::ALL.iter().map(Method::as_str).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Adapt(a) => commands::adapt(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Matrix(a) => commands::matrix(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
