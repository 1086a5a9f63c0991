//! `singular`: batch front end for the singular elliptic solvers.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::{Parser, Subcommand};
use singular_core::Suite;

use crate::commands::Options;
use crate::config::{RunConfig, KEYS_HELP};

#[derive(Debug, Parser)]
#[command(name = "singular", version, about = "Solve and verify singular elliptic problems", after_long_help = KEYS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Exit with a nonzero code when any report fails.
    #[arg(long, global = true)]
    strict: bool,

    /// Also write SVG plots.
    #[arg(long, global = true)]
    plot: bool,

    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the problem described by a config file.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a verification suite and print a pass/fail table.
    Verify {
        #[arg(value_parser = PossibleValuesParser::new(Suite::ALL.map(|s| s.name())))]
        suite: String,
    },
    /// Solve over the parameter grid in the [sweep] section.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()?;
    }
    let opts = Options {
        out: &cli.out,
        plot: cli.plot,
    };
    match &cli.command {
        Command::Solve { config } => {
            let cfg = RunConfig::load(config)?;
            let ok = commands::solve(&cfg, &opts)?;
            Ok(ok || !cli.strict)
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let ok = commands::verify(suite, Some(&cli.out), cli.plot)?;
            Ok(ok)
        }
        Command::Sweep { config } => {
            commands::sweep(&RunConfig::load(config)?, &opts)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
