use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use ewlab_cli::{main_with, Overrides};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    KernelChecks,
    Noise,
    Exactness,
    Schemes,
    Stationarity,
    Coupling,
    Ew,
    Probe,
    All,
}

/// Numerical laboratory for the stochastic heat equation and its Edwards-Wilkinson limit.
#[derive(Debug, Parser)]
#[command(name = "ewlab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Largest allowed projected number of cell updates.
    #[arg(long)]
    budget: Option<u64>,
}

fn main() {
    let cli = Cli::parse();
    let name = cli.command.to_possible_value().expect("no skipped variants");
    let overrides = Overrides {
        out: cli.out,
        seed: cli.seed,
        workers: cli.workers,
        budget: cli.budget,
    };
    std::process::exit(main_with(name.get_name(), &cli.config, &overrides));
}
