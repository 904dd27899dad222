//! `qns` — band-limited quantum noise spectroscopy toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qns::cli::{config::ExperimentConfig, presets, run::run_command, run::Command as RunCmd};

#[derive(Parser)]
#[command(
    name = "qns",
    version,
    about = "Slepian control waveforms, filter functions, stochastic qubit simulation and \
             noise-spectrum reconstruction",
    after_help = "Frequencies in configuration files and outputs are in Hz; durations in \
                  seconds. Exit codes: 0 success, 2 validation error, 3 numerical failure."
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped preset name (see `qns presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Override the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Compute Slepian sequences, eigenvalues and frequency-domain waveforms.
    Dpss(CommonArgs),
    /// Synthesize control waveforms and evaluate their filter functions.
    Filters(CommonArgs),
    /// Run simulated tomography experiments.
    Simulate(CommonArgs),
    /// Reconstruct noise spectra from simulated measurements.
    Reconstruct(CommonArgs),
    /// Compare Slepian, pulse-train and comb reconstructions side by side.
    Compare(CommonArgs),
    /// List the shipped presets.
    Presets,
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, String> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            ExperimentConfig::from_toml(&text)?
        }
        (None, Some(name)) => presets::preset(name).ok_or_else(|| {
            format!("unknown preset {name:?}; available: {}", presets::PRESET_NAMES.join(", "))
        })?,
        (None, None) => return Err("one of --config or --preset is required".to_string()),
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn execute(command: RunCmd, args: &CommonArgs) -> ExitCode {
    let cfg = match load_config(args) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("validation error: {msg}");
            return ExitCode::from(2);
        }
    };
    match run_command(command, &cfg, &args.out) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        CliCommand::Dpss(args) => execute(RunCmd::Dpss, &args),
        CliCommand::Filters(args) => execute(RunCmd::Filters, &args),
        CliCommand::Simulate(args) => execute(RunCmd::Simulate, &args),
        CliCommand::Reconstruct(args) => execute(RunCmd::Reconstruct, &args),
        CliCommand::Compare(args) => execute(RunCmd::Compare, &args),
        CliCommand::Presets => {
            for name in presets::PRESET_NAMES {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
    }
}
