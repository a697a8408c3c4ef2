//! Batch frontend: ingest and validate market data, run rolling-window
//! backtests, compare models, simulate probabilistic paths, generate
//! synthetic datasets and dump feature matrices.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use powercast::error::Error;

#[derive(Debug, Parser)]
#[command(name = "powercast", version, about)]
struct Cli {
    /// JSON run configuration; command-line flags win over file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; defaults to the logical core count.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Random seed override for synth and simulate.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check input files and report panel extent and futures coverage.
    Validate(commands::validate::Args),
    /// Rolling-window out-of-sample study over the configured models.
    Backtest(commands::backtest::Args),
    /// Diebold-Mariano comparison of two backtest error files.
    Dm(commands::dm::Args),
    /// Residual-bootstrap simulation and quantile fan for one origin.
    Simulate(commands::simulate::Args),
    /// Generate a synthetic price panel and futures book.
    Synth(commands::synth::Args),
    /// Emit the regression matrix for one hour as CSV.
    DumpFeatures(commands::dump_features::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: could not configure {jobs} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let run = config::RunContext::load(cli.config.as_deref(), cli.out, cli.seed);
    let result = match run {
        Err(e) => Err(e),
        Ok(ctx) => match cli.command {
            Command::Validate(args) => commands::validate::run(&ctx, args),
            Command::Backtest(args) => commands::backtest::run(&ctx, args),
            Command::Dm(args) => commands::dm::run(&ctx, args),
            Command::Simulate(args) => commands::simulate::run(&ctx, args),
            Command::Synth(args) => commands::synth::run(&ctx, args),
            Command::DumpFeatures(args) => commands::dump_features::run(&ctx, args),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Domain(_) => ExitCode::from(1),
                Error::Schema { .. } | Error::Io { .. } => ExitCode::from(2),
            }
        }
    }
}
