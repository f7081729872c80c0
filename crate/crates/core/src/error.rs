use thiserror::Error;

/// Errors raised by the model, operators, solver and diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precision operator is not positive definite (curvature {curvature:e})")]
    NotPositiveDefinite { curvature: f64 },

    #[error("non-finite value in frame {frame} at iteration {iteration}")]
    NonFinite { frame: usize, iteration: usize },

    #[error("iterative solve stopped after {steps} steps with relative residual {residual:e}")]
    NoConvergence { steps: usize, residual: f64 },

    #[error("dense assembly of a {n}x{n} precision exceeds the cap of {cap}; use the stochastic method")]
    TooLarge { n: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            actual,
        })
    }
}
