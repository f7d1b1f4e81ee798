//! Library surface of the command-line tool, exposed so integration tests
//! can drive commands in-process.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use suredrift::Result;

use config::ResolvedConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandName {
    Simulate,
    Sweep,
    Optimize,
    Denoise,
    Validate,
}

impl CommandName {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "simulate" => Some(Self::Simulate),
            "sweep" => Some(Self::Sweep),
            "optimize" => Some(Self::Optimize),
            "denoise" => Some(Self::Denoise),
            "validate" => Some(Self::Validate),
            _ => None,
        }
    }
}

/// Outcome of a command: the files it wrote and, for `validate`, whether
/// every check passed.
#[derive(Debug)]
pub struct CommandOutcome {
    pub files: Vec<PathBuf>,
    pub validation_passed: Option<bool>,
}

/// Runs one command against a resolved configuration.
pub fn run_command(command: CommandName, cfg: &ResolvedConfig) -> Result<CommandOutcome> {
    let outcome = match command {
        CommandName::Simulate => CommandOutcome {
            files: commands::cmd_simulate(cfg)?,
            validation_passed: None,
        },
        CommandName::Sweep => CommandOutcome {
            files: commands::cmd_sweep(cfg)?,
            validation_passed: None,
        },
        CommandName::Optimize => CommandOutcome {
            files: commands::cmd_optimize(cfg)?,
            validation_passed: None,
        },
        CommandName::Denoise => CommandOutcome {
            files: commands::cmd_denoise(cfg)?,
            validation_passed: None,
        },
        CommandName::Validate => {
            let (passed, files) = commands::cmd_validate(cfg)?;
            CommandOutcome {
                files,
                validation_passed: Some(passed),
            }
        }
    };
    Ok(outcome)
}
