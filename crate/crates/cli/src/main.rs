//! `torharm`: geodesics, harmonic maps with torsion and identity checks from
//! TOML problem files.

mod commands;
mod config;

use std::io::Write;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Failure, Outcome};
use config::ConfigError;

#[derive(Debug, Parser)]
#[command(
    name = "torharm",
    version,
    about = "Harmonic maps into targets with a connection with torsion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Problem description (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory receiving the CSV/JSON outputs; without it the main output goes to stdout.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads. Results do not depend on this value.
    #[arg(long, global = true, default_value = "1", value_name = "N")]
    threads: NonZeroUsize,

    /// Suppress the summary line.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Integrate a geodesic and write its trajectory.
    Geodesic,
    /// Solve the harmonic-map equation from the configured initial map.
    Solve,
    /// Split a torsion tensor into vectorial, antisymmetric and Cartan parts.
    Decompose,
    /// Run the identity suite on its built-in fixtures.
    Verify,
    /// Eigenvalues of smallest modulus of the Jacobi operator.
    Spectrum,
    /// Energy and tension diagnostics of the configured map.
    Energy,
}

fn dispatch(cli: &Cli) -> Result<Outcome, Failure> {
    if let Command::Verify = cli.command {
        if cli.config.is_some() {
            return Err(ConfigError::at("", "verify takes no --config").into());
        }
        return commands::verify();
    }
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| ConfigError::at("", "--config PATH is required"))?;
    let cfg = config::load(path)?;
    match cli.command {
        Command::Geodesic => commands::geodesic(&cfg),
        Command::Solve => commands::solve(&cfg),
        Command::Decompose => commands::decompose(&cfg),
        Command::Spectrum => commands::spectrum_cmd(&cfg),
        Command::Energy => commands::energy(&cfg),
        Command::Verify => unreachable!(),
    }
}

fn emit(outcome: &Outcome, out: Option<&Path>, quiet: bool) -> std::io::Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            for a in &outcome.artifacts {
                std::fs::write(dir.join(a.name), &a.contents)?;
            }
            if !quiet {
                println!("{}", outcome.summary);
            }
        }
        None => {
            std::io::stdout().write_all(outcome.artifacts[outcome.primary].contents.as_bytes())?;
            if !quiet {
                eprintln!("{}", outcome.summary);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(outcome) => {
            if let Err(e) = emit(&outcome, cli.out.as_deref(), cli.quiet) {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(1);
            }
            if outcome.failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
