use clap::{Parser, Subcommand};
use std::path::PathBuf;

use shearmix::cli::{run, Overrides, Task};

/// Mixing and relaxation diagnostics for shear flows on the torus.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Every theoretical constant for the configured profile.
    Bounds,
    /// Resolvent sweep and semigroup norms of one Fourier mode.
    Spectrum,
    /// Relaxation of an initial field against the decay envelope.
    Evolve,
    /// Monte Carlo experiments on the underlying diffusion.
    Simulate,
    /// The acceptance suite.
    Validate,
    /// Summary table and plot data from earlier artifacts.
    Report,
}

fn main() {
    let cli = Cli::parse();
    let task = match cli.command {
        Command::Bounds => Task::Bounds,
        Command::Spectrum => Task::Spectrum,
        Command::Evolve => Task::Evolve,
        Command::Simulate => Task::Simulate,
        Command::Validate => Task::Validate,
        Command::Report => Task::Report,
    };
    let overrides = Overrides {
        out: cli.out,
        seed: cli.seed,
        workers: cli.workers,
    };
    std::process::exit(run(task, cli.config.as_deref(), overrides));
}
