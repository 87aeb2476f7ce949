//! Command-line toolkit for near-light photometric stereo calibration.
//!
//! Workflows: render synthetic capture sets, solve them for depth and
//! normals, build paired training datasets, train the per-pixel normal
//! network, run single-image inference, evaluate against ground truth, and
//! ablate the number of active LEDs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration/input error.

mod commands;
mod config;
mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "nlps",
    version,
    about = "Near-light photometric stereo calibration toolkit"
)]
struct Cli {
    /// Structured configuration file (JSON); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base directory for relative paths.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,
    /// Cap on worker threads for internally parallel steps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic multi-light capture set with ground truth.
    Render(commands::render::RenderArgs),
    /// Recover depth, normals, and albedo from a capture directory.
    Solve(commands::solve::SolveArgs),
    /// Build a paired (pixel, intensity) → normal training dataset.
    BuildDataset(commands::dataset::BuildDatasetArgs),
    /// Train the per-pixel normal network.
    Train(commands::train::TrainArgs),
    /// Infer normals from a single trichrome capture.
    Infer(commands::infer::InferArgs),
    /// Compare predicted normals against ground truth.
    Eval(commands::eval::EvalArgs),
    /// Solve with LED subsets and tabulate accuracy per count.
    AblateLeds(commands::ablate::AblateArgs),
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot configure {threads} threads: {e}")))?;
    }
    let run_config = RunConfig::load(cli.config.as_deref())?;
    let workdir = &cli.workdir;
    match &cli.command {
        Command::Render(args) => {
            let block = commands::render::resolve(&run_config.render, args)?;
            commands::render::run(&run_config, &block, workdir, args)
        }
        Command::Solve(args) => {
            let block = commands::solve::resolve(&run_config.solve, args)?;
            commands::solve::run(&run_config, &block, workdir, args)
        }
        Command::BuildDataset(args) => {
            let block = commands::dataset::resolve(&run_config.build_dataset, args)?;
            commands::dataset::run(&run_config, &block, workdir, args)
        }
        Command::Train(args) => {
            let block = commands::train::resolve(&run_config.train, args)?;
            commands::train::run(&run_config, &block, workdir, args)
        }
        Command::Infer(args) => {
            let block = commands::infer::resolve(&run_config.infer, args)?;
            commands::infer::run(&run_config, &block, workdir, args)
        }
        Command::Eval(args) => {
            let block = commands::eval::resolve(&run_config.eval, args)?;
            commands::eval::run(&run_config, &block, workdir, args)
        }
        Command::AblateLeds(args) => {
            let block = commands::ablate::resolve(&run_config.ablate_leds, args)?;
            commands::ablate::run(&run_config, &block, workdir, args)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}
