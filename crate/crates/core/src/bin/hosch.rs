use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hosch::cli::{run, CliOptions};
use hosch::config::Command;

#[derive(Parser)]
#[command(name = "hosch", version, about = "Fourth-order nonlinear Schrodinger experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Evolve a state and write the observables table
    Evolve(Common),
    /// Floquet chart and band edges of a Hill equation
    Bands(Common),
    /// Run the invariant suite
    Check(Common),
    /// Modified Ehrenfest relations along a trajectory
    Ehrenfest(Common),
    /// Product state on the 2D grid against its evolved factors
    Separability(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides output.dir)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for seeded states (overrides the config)
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Suppress per-check output
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Sub::Evolve(c) => (Command::Evolve, c),
        Sub::Bands(c) => (Command::Bands, c),
        Sub::Check(c) => (Command::Check, c),
        Sub::Ehrenfest(c) => (Command::Ehrenfest, c),
        Sub::Separability(c) => (Command::Separability, c),
    };
    let opts = CliOptions {
        config: common.config,
        out: common.out,
        seed: common.seed,
        quiet: common.quiet,
    };
    let outcome = run(cmd, &opts);
    if let Some(m) = &outcome.message {
        eprintln!("{m}");
    }
    ExitCode::from(outcome.exit_code as u8)
}
