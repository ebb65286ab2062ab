//! Config-driven frontend for the `cavnet` simulator.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{Overrides, Report};
use crate::config::Format;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "cavnet", version, about = "Dark-state adiabatic passage on fiber-coupled cavity networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optimizer seed (overrides `optimize.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated output formats (overrides `output.formats`).
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,
    /// Exit with status 4 when the final fidelity is below this value.
    #[arg(long)]
    pub assert_fidelity: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the protocol and write trajectory files.
    Evolve(Common),
    /// Report the dark manifold at one instant.
    Dark {
        #[command(flatten)]
        common: Common,
        /// Snapshot time (defaults to the protocol midpoint).
        #[arg(long)]
        at: Option<f64>,
    },
    /// Sweep one parameter, optionally per value of a second.
    Scan(Common),
    /// Tune protocol parameters for terminal fidelity.
    Optimize(Common),
}

pub fn run(cli: &Cli) -> CliResult<Report> {
    let (common, at) = match &cli.command {
        Command::Evolve(c) | Command::Scan(c) | Command::Optimize(c) => (c, None),
        Command::Dark { common, at } => (common, *at),
    };
    let loaded = config::load(&common.config)?;
    let o = Overrides {
        out: common.out.clone(),
        seed: common.seed,
        formats: common.format.clone(),
        assert_fidelity: common.assert_fidelity,
        at,
    };
    match &cli.command {
        Command::Evolve(_) => commands::evolve(&loaded, &o),
        Command::Dark { .. } => commands::dark(&loaded, &o),
        Command::Scan(_) => commands::scan(&loaded, &o),
        Command::Optimize(_) => commands::optimize_cmd(&loaded, &o),
    }
}
