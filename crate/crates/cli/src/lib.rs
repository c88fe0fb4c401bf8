//! Command-line surface of the sensor orientation toolkit: configuration
//! files, the `design`, `evaluate`, `mse` and `bruteforce` commands, and
//! their output documents.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

/// Version of the result document layout.
pub const FORMAT_VERSION: u32 = 1;

pub mod exit {
    pub const CONVERGED: i32 = 0;
    pub const MAX_ITERATIONS: i32 = 2;
    pub const INVALID_CONFIG: i32 = 3;
    pub const SOLVER_ERROR: i32 = 4;
    pub const ESTIMATION_FAILURE: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => exit::INVALID_CONFIG,
            Self::Solver(_) | Self::Output(_) => exit::SOLVER_ERROR,
            Self::Estimation(_) => exit::ESTIMATION_FAILURE,
        }
    }
}

impl From<osp_core::Error> for CliError {
    fn from(e: osp_core::Error) -> Self {
        use osp_core::Error as E;
        match e {
            E::InvalidInput(_) | E::DegenerateGeometry { .. } | E::Unsupported(_) => Self::Config(e.to_string()),
            E::EstimationFailed(_) => Self::Estimation(e.to_string()),
            _ => Self::Solver(e.to_string()),
        }
    }
}
