//! Batch front end: parses config, dispatches runs and sweeps, persists
//! transcripts and reports.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CliError, Config};

#[derive(Parser)]
#[command(name = "rqpsi", version, about = "Rational quantum private-set-intersection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key/value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config trial count.
    #[arg(long)]
    trials: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker-pool size; 0 or absent uses the default.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the protocol `trials` times and persist transcripts.
    Run(Common),
    /// Estimate the equilibrium and fairness/correctness reports.
    Nash(Common),
    /// Print the closed-form bounds for the configuration.
    Bounds(Common),
    /// Replay the oblivious set-member decision protocol.
    Membership(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Run(c) | Command::Nash(c) | Command::Bounds(c) | Command::Membership(c) => c,
        }
    }
}

fn load(common: &Common) -> Result<(Config, String), CliError> {
    let (mut config, raw) = Config::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(trials) = common.trials {
        config.trials = trials;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    config.validate()?;
    if let Some(workers) = common.workers {
        if workers > 0 {
            // Later invocations in the same process keep the first pool.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
        }
    }
    Ok((config, raw))
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let (config, raw) = load(cli.command.common())?;
    match &cli.command {
        Command::Run(_) => commands::cmd_run(&config, &raw),
        Command::Nash(_) => commands::cmd_nash(&config, &raw),
        Command::Bounds(_) => commands::cmd_bounds(&config),
        Command::Membership(_) => commands::cmd_membership(&config, &raw),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
