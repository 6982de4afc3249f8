mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "fmo-heom",
    version,
    about = "HEOM dynamics and pairwise quantum correlations in the FMO complex"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the hierarchy and write populations and pair measures.
    Simulate(Common),
    /// Trace-distance convergence with respect to the truncation depth.
    Converge(Common),
    /// Detect nonlocality sudden death for every selected pair.
    SuddenDeath(Common),
    /// Short-time slopes and dominant pairs for every entry site.
    Oracle(Common),
    /// Exciton decomposition of the FRET initial state.
    FretReport(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set system.truncation=6`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

type Runner = fn(&RunConfig, &std::path::Path) -> Result<(), CliError>;

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (common, f): (&Common, Runner) = match &cli.command {
        Command::Simulate(c) => (c, commands::simulate),
        Command::Converge(c) => (c, commands::converge),
        Command::SuddenDeath(c) => (c, commands::sudden_death),
        Command::Oracle(c) => (c, commands::oracle),
        Command::FretReport(c) => (c, commands::fret_report),
    };
    let cfg = RunConfig::load(common.config.as_deref(), &common.overrides)?;
    f(&cfg, &common.out)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error kind={} msg={msg:?}", e.kind());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
