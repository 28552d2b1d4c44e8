//! `latentlab` — deterministic experiment runner over synthetic attribute
//! worlds: build a world, edit along semantic directions, measure
//! disentanglement curves, sweep blend factors, run the ablations.
//!
//! Every subcommand reads one JSON config, writes its artifacts into `--out`,
//! and finishes with a `manifest.json` of content hashes. Identical configs
//! and seeds give byte-identical artifacts, whatever `--threads` says.

mod artifacts;
mod config;
mod error;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "latentlab",
    version,
    about = "Deterministic latent-direction editing experiments on synthetic worlds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a synthetic world and report its classifier accuracies.
    World(TaskArgs),
    /// Walk one edit trajectory and record every visited point.
    Edit(TaskArgs),
    /// Trace a transformation/disentanglement curve.
    Dt(TaskArgs),
    /// Sweep blend factors; score each cell by mean curve area over all
    /// ordered attribute pairs.
    Grid(TaskArgs),
    /// Measure the same curve with and without per-step direction updates.
    AblateIncremental(TaskArgs),
    /// Pit the averaging estimator against the boundary-normal estimator.
    CompareAttrLevel(TaskArgs),
}

#[derive(Args)]
pub struct TaskArgs {
    /// Task configuration file (JSON).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Master seed; overrides the `seed` in the config file.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores). Affects wall time only, never results.
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let args = match &cli.command {
        Command::World(a)
        | Command::Edit(a)
        | Command::Dt(a)
        | Command::Grid(a)
        | Command::AblateIncremental(a)
        | Command::CompareAttrLevel(a) => a,
    };
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    }
    match &cli.command {
        Command::World(a) => tasks::world(a),
        Command::Edit(a) => tasks::edit_one(a),
        Command::Dt(a) => tasks::dt(a),
        Command::Grid(a) => tasks::grid(a),
        Command::AblateIncremental(a) => tasks::ablate_incremental(a),
        Command::CompareAttrLevel(a) => tasks::compare_attr_level(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_stderr_line());
            ExitCode::from(err.exit_code())
        }
    }
}
