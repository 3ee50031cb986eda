//! Command-line harness around the `hfmm` crate: accuracy sweeps against a
//! high-order reference, timing benchmarks, and the validation suite.

pub mod checks;
pub mod commands;
pub mod config;
pub mod report;
pub mod scenario;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] hfmm::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for usage and configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        use hfmm::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(E::Media(_) | E::BelowInterface { .. } | E::Cache(_) | E::CostGuard { .. }) => 2,
            _ => 1,
        }
    }
}
