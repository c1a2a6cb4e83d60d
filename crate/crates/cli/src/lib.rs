//! Command-line plumbing for the `latinv` tool: configuration, output
//! envelopes, the on-disk Green cache and the subcommands.

pub mod cache;
pub mod commands;
pub mod config;
pub mod output;

use latinv_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("gate failure: {}", .0.join(", "))]
    GateFailed(Vec<String>),
}

impl CliError {
    /// 0 ok, 2 validation, 3 numerical gate, 4 exceptional energy.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::GateFailed(_) => 3,
            CliError::Core(e) => match e {
                Error::InvalidInput(_)
                | Error::ThresholdEnergy(_)
                | Error::Unsupported(_)
                | Error::MissingValue(_)
                | Error::SingularPoint(_)
                | Error::IndexMismatch(_) => 2,
                Error::NoConvergence { .. } | Error::RankDeficient { .. } | Error::Sweep { .. } | Error::Gate(_) => 3,
                Error::DirichletEigenvalue { .. } | Error::ExceptionalEnergy { .. } => 4,
            },
        }
    }
}
