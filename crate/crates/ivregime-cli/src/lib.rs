//! File formats and experiment drivers around `ivregime-core`.
//!
//! The core crate is `no_std` and knows nothing about files or threads;
//! everything that touches the filesystem (model JSON, dataset CSV, result
//! emission) or a thread pool (parallel regret experiments and sweeps)
//! lives here. Parallel drivers produce byte-identical results to the
//! serial core paths at any worker count: replications are keyed by index
//! and aggregated in index order.

use std::fmt;

pub mod io;
pub mod runner;

/// Error classified by the exit code it maps to: usage problems exit 1,
/// validation problems (bad models, datasets, files) exit 2, and numerical
/// refusals (weak instruments or infeasible programs in strict mode)
/// exit 3.
#[derive(Debug, Clone, PartialEq)]
pub enum AppError {
    Usage(String),
    Validation(String),
    Numerical(String),
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Validation(_) => 2,
            AppError::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            AppError::Usage(msg) | AppError::Validation(msg) | AppError::Numerical(msg) => msg,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message())
    }
}

impl std::error::Error for AppError {}

impl From<ivregime_core::Error> for AppError {
    fn from(err: ivregime_core::Error) -> Self {
        use ivregime_core::Error::*;
        match err {
            WeakInstrument { .. } | Infeasible { .. } | NumericalFailure { .. } => {
                AppError::Numerical(err.to_string())
            }
            _ => AppError::Validation(err.to_string()),
        }
    }
}
