use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dfgamp_cli::commands::{self, Context};
use dfgamp_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "dfgamp", version, about = "Multimode DFG amplifier photon statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides simulation.seed and mraf.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shot count (overrides simulation.shots).
    #[arg(long, global = true)]
    shots: Option<usize>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Singular values, mode shapes and the JSA.
    Modes,
    /// Exact photon-number laws and moment sweeps.
    Stats,
    /// Fit the gain to a vacuum histogram.
    FitGain,
    /// Monte Carlo shot stack of the configured scene.
    Simulate,
    /// Mean/variance maps and region statistics of a stack.
    Analyze,
    /// SLM phase mask by mixed-region phase retrieval.
    Mraf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let path = cli.config.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut config = RunConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        config.simulation.seed = seed;
        config.mraf.seed = Some(seed);
    }
    if let Some(shots) = cli.shots {
        config.simulation.shots = shots;
    }
    let ctx = Context::new(config, &path, cli.out)?;
    match cli.command {
        Command::Modes => commands::modes(&ctx),
        Command::Stats => commands::stats(&ctx),
        Command::FitGain => commands::fit(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Analyze => commands::analyze(&ctx),
        Command::Mraf => commands::mraf(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
