use std::path::PathBuf;
use std::process::ExitCode;

use aces_cli::commands::run_preset;
use aces_cli::{CliError, ExperimentConfig, Preset};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aces", version, about = "Pauli noise learning experiments on a simulated two-qubit device")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Repeated-CZ coherent error with and without Pauli twirling.
    TwirlDemo(Common),
    /// Readout confusion matrices with and without measurement twirling.
    ConfusionDemo(Common),
    /// Full ACES estimation over many design sets.
    AcesRun(Common),
    /// Residual-versus-shots study for the four benchmark models.
    AppendixModels(Common),
    /// Single-qubit, simultaneous and interleaved two-qubit RB.
    Rb(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config; preset defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    shots: Option<u64>,
}

fn run(preset: Preset, c: Common) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::for_preset(preset),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(n) = c.shots {
        cfg.shots = n;
    }
    let out = c
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(preset.name()));
    run_preset(preset, &cfg, &out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (preset, common) = match cli.command {
        Command::TwirlDemo(c) => (Preset::TwirlDemo, c),
        Command::ConfusionDemo(c) => (Preset::ConfusionDemo, c),
        Command::AcesRun(c) => (Preset::AcesRun, c),
        Command::AppendixModels(c) => (Preset::AppendixModels, c),
        Command::Rb(c) => (Preset::Rb, c),
    };
    match run(preset, common) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
