//! Command-line toolkit around `ecorl-core`: strict TOML configuration,
//! subcommand implementations, CSV artifact emission, and the stock-series
//! workflow that turns a trained policy into per-year quota recommendations.
//!
//! Exit-code contract: 0 on success, 1 for validation problems (bad flags,
//! malformed config or input files), 2 for runtime failures (training
//! divergence, solver non-convergence, failed rollouts).

use std::fmt;

pub mod commands;
pub mod config;
pub mod output;
pub mod policies;
pub mod stock;

/// Errors surfaced to the user, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Problems with what the user asked for: exit code 1.
    Validation(String),
    /// Problems that arose while doing it: exit code 2.
    Runtime(String),
    /// Early exit with code 0 after output already printed (help, version).
    Exit,
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Exit => 0,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) | CliError::Runtime(msg) => f.write_str(msg),
            CliError::Exit => Ok(()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ecorl_core::Error> for CliError {
    fn from(e: ecorl_core::Error) -> Self {
        use ecorl_core::Error::*;
        match &e {
            InvalidConfig(_) | DimensionMismatch { .. } | SnapshotFormat { .. }
            | NoBistableRegime(_) => CliError::Validation(e.to_string()),
            NonFiniteAction { .. } | NonFiniteLoss(_) | NoConvergence { .. }
            | BufferUnderfilled { .. } | EpisodeOver { .. } | Replicate { .. } => {
                CliError::Runtime(e.to_string())
            }
        }
    }
}
