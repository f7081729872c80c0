//! Joint hierarchical Bayesian learning (JHBL) for temporal image sequences.
//!
//! Each frame `x^(j)` of a sequence is observed through its own noisy linear
//! measurement `y^(j) = F^(j) x^(j) + e^(j)`. The model places conditionally
//! Gaussian priors on a sparsifying transform `R x^(j)` of every frame and on
//! the differences between consecutive frames, with gamma hyper-priors on all
//! precisions. [`solver::solve`] approximates the posterior mode by block
//! coordinate descent; with the coupling switched off it reduces to separate
//! per-frame sparse Bayesian learning.
//!
//! Modules:
//! - [`model`]: domain types, gamma-mode updates, log joint density
//! - [`operators`]: Fourier sampling, Gaussian blur, TV differences, precisions
//! - [`solver`]: the outer loop, gradient-descent image updates, stopping rule
//! - [`uq`]: posterior variances, edge maps, change masks
//! - [`simulate`]: phantoms, band removal, SNR-calibrated noisy data

pub mod error;
pub mod linalg;
pub mod model;
pub mod operators;
pub mod simulate;
pub mod solver;
pub mod uq;

pub use error::{Error, Result};
pub use model::{GaussianPosterior, HyperParams, ImageSequence, MeasurementSet, PrecisionState};
pub use operators::{LinearOperator, OperatorDescriptor, RegularizationOp};
pub use solver::{solve, Mode, SolveResult, SolverConfig};
