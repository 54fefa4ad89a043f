use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "mflq", version, about = "Mean-field LQ game solvers and experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the finite-horizon Riccati system and write the P, K, phi curves.
    Riccati(RunArgs),
    /// Solve the infinite-horizon equations and write the stationary report.
    Stationary(RunArgs),
    /// Simulate the population under the decentralized law.
    Simulate(RunArgs),
    /// Estimate eps(N) over a list of population sizes.
    Sweep(RunArgs),
    /// Run the unilateral deviation suite and the eps(N) fit.
    Nash(RunArgs),
    /// Run the benchmark pipeline on the built-in two-dimensional preset.
    #[command(name = "reproduce-sec4")]
    ReproduceSec4(RunArgs),
    /// Re-run a recorded manifest.
    Rerun {
        /// A `manifest.json` written by an earlier run.
        manifest: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Model file (TOML).
    #[arg(long, conflicts_with = "preset")]
    pub model: Option<PathBuf>,
    /// Built-in model: paper-sec4 or sticky-price.
    #[arg(long)]
    pub preset: Option<String>,
    /// Override a model-file entry, e.g. `--set matrices.R=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub agents: Option<usize>,
    /// Population sizes, e.g. `8,16,32`.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Also write SVG charts next to the CSV files.
    #[arg(long)]
    pub svg: bool,
}
