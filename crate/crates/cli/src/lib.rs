//! Command-line workflows around the `jhbl` library: simulate data from a
//! phantom, recover it in separate or joint mode, and compare against the
//! ground truth.

pub mod commands;
pub mod config;
pub mod io;
pub mod metrics;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(jhbl::Error),
}

impl CliError {
    /// 0 success, 1 usage or input problems, 2 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<jhbl::Error> for CliError {
    fn from(e: jhbl::Error) -> Self {
        use jhbl::Error::*;
        match e {
            NotPositiveDefinite { .. } | NonFinite { .. } | NoConvergence { .. } | TooLarge { .. } => {
                CliError::Numerical(e)
            }
            Domain(_) | Dimension { .. } | InvalidArgument(_) => CliError::Usage(e.to_string()),
        }
    }
}
