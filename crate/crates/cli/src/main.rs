mod commands;
mod config;
mod output;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use commands::Ctx;
use config::RunConfig;

/// Stationary mean-field equilibria of ergodic two-sided singular control
/// with regime switching.
#[derive(Parser, Debug)]
#[command(name = "regime-mfg", version)]
struct Cli {
    /// TOML configuration; defaults describe the benchmark instance.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Replaces `[simulation] seed`.
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the standing assumptions on sampled grids.
    Validate,
    /// Solve the stopping game at one θ.
    Dynkin {
        #[arg(long, value_name = "VALUE")]
        theta: f64,
    },
    /// Solve the stopping game and the stationary law at one θ.
    Stationary {
        #[arg(long, value_name = "VALUE")]
        theta: f64,
    },
    /// Bracket and bisect the fixed point.
    Equilibrium,
    /// Equilibrium, then a sample path, the ergodic payoff and the occupation check.
    Simulate,
    /// Equilibrium, then the ε_N curve of the N-player game.
    Nplayer,
    /// Equilibrium, simulation cross-check and N-player curve.
    Pipeline,
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = cli.out {
        cfg.output.dir = dir;
    }
    if let Some(seed) = cli.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let mut ctx = Ctx::new(cfg)?;
    match cli.command {
        Command::Validate => {
            if !commands::validate(&mut ctx)? {
                eprintln!("some assumptions failed on the sampled grids; see validation.json");
            }
        }
        Command::Dynkin { theta } => commands::dynkin(&mut ctx, theta)?,
        Command::Stationary { theta } => commands::stationary(&mut ctx, theta)?,
        Command::Equilibrium => commands::equilibrium(&mut ctx)?,
        Command::Simulate => commands::simulate(&mut ctx)?,
        Command::Nplayer => commands::nplayer(&mut ctx)?,
        Command::Pipeline => commands::pipeline(&mut ctx)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
