use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use suredrift::Error;
use suredrift_cli::config::ResolvedConfig;
use suredrift_cli::{run_command, CommandName};

/// Drift estimation and de-noising experiments for Gaussian processes.
///
/// Reads a TOML experiment configuration, runs one command and writes its
/// result files into the output directory. Reruns with identical
/// configuration and seed reproduce every output byte for byte.
#[derive(Parser, Debug)]
#[command(name = "suredrift", version, about)]
struct Cli {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,

    /// One of: simulate | sweep | optimize | denoise | validate.
    #[arg(long)]
    command: String,

    /// Seed override (flag beats SURE_SEED, which beats the config file).
    #[arg(long, env = "SURE_SEED")]
    seed: Option<u64>,

    /// Output directory override (flag beats SURE_OUT, which beats the
    /// config file).
    #[arg(long, env = "SURE_OUT")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(command) = CommandName::parse(&cli.command) else {
        eprintln!(
            "error: unknown command {:?}; expected simulate | sweep | optimize | denoise | validate",
            cli.command
        );
        return ExitCode::from(2);
    };
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match ResolvedConfig::from_toml(&text, cli.seed, cli.out) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_command(command, &cfg) {
        Ok(outcome) => {
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            match outcome.validation_passed {
                Some(false) => {
                    eprintln!("validation failed; see report");
                    ExitCode::from(1)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e @ (Error::Domain(_) | Error::Validation(_) | Error::Parse(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
