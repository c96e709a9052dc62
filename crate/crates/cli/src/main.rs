mod commands;
mod config;
mod error;
mod formats;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Underwater relocalization pipeline: render surveys, train the pose
/// regressor, augment viewpoints, fuse with dead-reckoning sensors,
/// and score the result.
#[derive(Parser)]
#[command(name = "aquapose", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (TOML, or JSON by extension).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override every stage seed from one base value.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Render one survey trial per depth band.
    Simulate(CommonArgs),
    /// Fit the pose regressor and write a checkpoint.
    Train(CommonArgs),
    /// Synthesize and render novel-viewpoint training frames.
    Augment(CommonArgs),
    /// Run the sensor-fusion filter over the held-out band.
    Fuse(CommonArgs),
    /// Score trajectories against ground truth.
    Eval(CommonArgs),
    /// Summarize all metric files into markdown.
    Report(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a)
            | Command::Train(a)
            | Command::Augment(a)
            | Command::Fuse(a)
            | Command::Eval(a)
            | Command::Report(a) => a,
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let args = cli.command.common();
    let mut config = ExperimentConfig::load(&args.config)?;
    config.apply_overrides(args.out.clone(), args.seed);
    match &cli.command {
        Command::Simulate(_) => commands::simulate::run(&config),
        Command::Train(_) => commands::train::run(&config),
        Command::Augment(_) => commands::augment::run(&config),
        Command::Fuse(_) => commands::fuse::run(&config),
        Command::Eval(_) => commands::eval::run(&config),
        Command::Report(_) => commands::report::run(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
