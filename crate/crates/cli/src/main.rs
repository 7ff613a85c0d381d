//! `travwave`: batch driver for periodic traveling-wave computations.
//!
//! Exit status is 0 on success, 1 for configuration, input and I/O errors,
//! and 2 when a numerical event (non-convergence, a singular Jacobian,
//! blow-up, ...) stopped the run. Artifacts produced before the event are
//! still written.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use commands::Outcome;
use travwave::error::Error;

#[derive(Parser)]
#[command(name = "travwave", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Initial guess: `stokes:first` or `stokes:corrected`.
    #[arg(long, global = true)]
    guess: Option<String>,
    /// Override a configuration value, e.g. `--set grid.n=512`. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a bifurcation branch and its report.
    Branch,
    /// Compute a branch, then re-solve every point on doubled grids.
    Refine,
    /// Evolve a computed profile in time.
    Evolve,
    /// Solve one wave on a sequence of grids and compare with the exact solitary wave.
    Converge,
    /// Rebuild the reports of an earlier run from its CSV files.
    Analyze {
        /// Directory of an earlier `branch` or `refine` run.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn load(cli: &Cli) -> Result<Option<config::RunConfig>> {
    let Some(path) = &cli.config else {
        return Ok(None);
    };
    let mut overrides = cli.overrides.clone();
    if let Some(g) = &cli.guess {
        overrides.push(format!("branch.guess={g:?}"));
    }
    config::load(path, &overrides).map(Some)
}

fn out_dir(cli: &Cli, cfg: Option<&config::RunConfig>) -> Result<PathBuf> {
    match (&cli.out, cfg.and_then(|c| c.output.dir.clone())) {
        (Some(o), _) => Ok(o.clone()),
        (None, Some(d)) => Ok(d),
        (None, None) => bail!("no output directory: pass --out or set output.dir"),
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = load(cli)?;
    if let Command::Analyze { input } = &cli.command {
        let input = commands::analyze_input(input.clone(), cfg.as_ref())?;
        let out = out_dir(cli, cfg.as_ref()).unwrap_or_else(|_| input.clone());
        return commands::analyze(&input, cfg.as_ref(), &out);
    }
    let Some(cfg) = cfg else {
        bail!("--config is required for this command");
    };
    let out = out_dir(cli, Some(&cfg))?;
    match cli.command {
        Command::Branch => commands::branch(&cfg, &out),
        Command::Refine => commands::refine(&cfg, &out),
        Command::Evolve => commands::evolve_cmd(&cfg, &out),
        Command::Converge => commands::converge(&cfg, &out),
        Command::Analyze { .. } => unreachable!("handled above"),
    }
}

/// 2 for numerical events, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err.chain().find_map(|e| e.downcast_ref::<Error>()).is_some_and(|e| {
        !matches!(
            e,
            Error::InvalidArgument(_) | Error::LengthMismatch { .. } | Error::NoExactSolution(_)
        )
    });
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Early(reason)) => {
            eprintln!("travwave: stopped early: {reason}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("travwave: error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
