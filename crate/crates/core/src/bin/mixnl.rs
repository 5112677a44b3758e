//! Command-line front end: load a TOML config, run one experiment, write
//! CSV artifacts. Exit codes: 0 success, 2 configuration/usage error,
//! 3 numerical failure.

use clap::{Args, Parser, Subcommand};
use mixnl::config::RunConfig;
use mixnl::runner::{run, Command as RunnerCommand, RunContext};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mixnl",
    about = "Solver and verification harness for a mixed local-nonlocal elliptic problem",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for randomized experiments.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap for parallel assembly.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the mixed problem and write solution.csv, trace.csv, solve_summary.txt.
    Solve(CommonArgs),
    /// Check the bilinear-form identities across refinement levels; write identities.csv, seminorms.csv.
    Verify(CommonArgs),
    /// Measure exterior gradient decay and boundary-factor slopes; write rates.csv.
    Rates(CommonArgs),
    /// Compare production operator and kernel against slow reference quadrature; write oracle.csv.
    Oracle(CommonArgs),
    /// Randomized nonnegativity campaign; write campaign.csv, maxprinciple_summary.txt.
    Maxprinciple(CommonArgs),
}

impl Command {
    fn split(self) -> (RunnerCommand, CommonArgs) {
        match self {
            Command::Solve(a) => (RunnerCommand::Solve, a),
            Command::Verify(a) => (RunnerCommand::Verify, a),
            Command::Rates(a) => (RunnerCommand::Rates, a),
            Command::Oracle(a) => (RunnerCommand::Oracle, a),
            Command::Maxprinciple(a) => (RunnerCommand::MaxPrinciple, a),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = cli.command.split();

    if let Some(threads) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    let (cfg, hash) = match RunConfig::load(&args.config) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let ctx = match RunContext::new(cfg, hash, args.out, args.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    match run(cmd, &ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
