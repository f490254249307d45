mod commands;
mod exit;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Lamb-wave resonator toolkit.
#[derive(Debug, Parser)]
#[command(name = "lambkit", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// JSON config file; omitted fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for stochastic commands (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Only print errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Run the data-parallel loops on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve dispersion curves and write dispersion.csv.
    Disperse(commands::DisperseArgs),
    /// Match finger counts over the pitch sweep and write designs.json.
    Design(commands::DesignArgs),
    /// Generate chip and reticle GDSII, optionally the wafer map.
    Layout(commands::LayoutArgs),
    /// Fit mBVD models to one-port Touchstone files.
    Fit(commands::FitArgs),
    /// Per-mode deviation report from a wafer-site JSON file.
    Stats(commands::StatsArgs),
    /// Monte-Carlo wafer simulation plus deviation report and heatmaps.
    SimulateWafer(commands::SimulateArgs),
    /// Check a process flow against the compatibility rules.
    FlowCheck(commands::FlowCheckArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.global.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code as u8)
        }
    }
}
