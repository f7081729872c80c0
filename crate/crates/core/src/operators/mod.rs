//! Matrix-free linear operators.
//!
//! Images are vectorized column-major over `(row, column) = (s, t)`: pixel
//! `(a, b)` of an `n1 x n1` image lives at index `a + n1 * b`. Every operator
//! in this module follows that convention.

mod blur;
pub(crate) mod fourier;
mod precision;
mod tv;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};

pub use blur::GaussianBlurOp;
pub use fourier::{Frequency, FourierSamplingOp};
pub use precision::{apply_precision, apply_rhs, FrameSystem};
pub use tv::RegularizationOp;

/// A real linear map together with its transpose.
pub trait LinearOperator: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;

    /// `A x`; `x.len()` must equal `in_dim()`.
    fn apply(&self, x: &[f64]) -> Vec<f64>;

    /// `A^T y`; `y.len()` must equal `out_dim()`.
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64>;

    /// `A^T A x`.
    fn apply_gram(&self, x: &[f64]) -> Vec<f64> {
        self.apply_adjoint(&self.apply(x))
    }
}

/// Checked application, for callers that cannot guarantee dimensions.
pub fn apply_checked(op: &dyn LinearOperator, x: &[f64]) -> Result<Vec<f64>> {
    check_len("operator input", op.in_dim(), x.len())?;
    Ok(op.apply(x))
}

pub fn apply_adjoint_checked(op: &dyn LinearOperator, y: &[f64]) -> Result<Vec<f64>> {
    check_len("operator adjoint input", op.out_dim(), y.len())?;
    Ok(op.apply_adjoint(y))
}

/// Dense row-major matrix wrapped as an operator. Mostly useful for small
/// problems and for tests.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixOp {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixOp {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("matrix storage", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }
}

impl LinearOperator for MatrixOp {
    fn in_dim(&self) -> usize {
        self.cols
    }

    fn out_dim(&self) -> usize {
        self.rows
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks_exact(self.cols)
            .map(|row| crate::linalg::dot(row, x))
            .collect()
    }

    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, &yi) in self.data.chunks_exact(self.cols).zip(y) {
            crate::linalg::axpy(yi, row, &mut out);
        }
        out
    }
}

/// The temporal difference operator mapping a stacked sequence
/// `[x1; ...; xJ]` to `[x1 - x2; ...; x(J-1) - xJ]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalDifferenceOp {
    pixels: usize,
    frames: usize,
}

impl TemporalDifferenceOp {
    pub fn new(pixels: usize, frames: usize) -> Self {
        Self { pixels, frames }
    }
}

impl LinearOperator for TemporalDifferenceOp {
    fn in_dim(&self) -> usize {
        self.pixels * self.frames
    }

    fn out_dim(&self) -> usize {
        self.pixels * self.frames.saturating_sub(1)
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.pixels;
        let mut out = Vec::with_capacity(self.out_dim());
        for j in 1..self.frames {
            let prev = &x[(j - 1) * n..j * n];
            let next = &x[j * n..(j + 1) * n];
            out.extend(prev.iter().zip(next).map(|(a, b)| a - b));
        }
        out
    }

    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let n = self.pixels;
        let mut out = vec![0.0; self.in_dim()];
        for j in 1..self.frames {
            let d = &y[(j - 1) * n..j * n];
            for (i, &v) in d.iter().enumerate() {
                out[(j - 1) * n + i] += v;
                out[j * n + i] -= v;
            }
        }
        out
    }
}

/// Serializable description of a per-frame forward operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorDescriptor {
    /// 2-D DFT samples on the centred square, minus `removed` frequencies.
    Fourier {
        n1: usize,
        #[serde(default)]
        removed: Vec<Frequency>,
    },
    /// Midpoint-quadrature Gaussian convolution on `[0,1]^2`.
    Blur { n1: usize, blur_gamma: f64 },
}

impl OperatorDescriptor {
    pub fn n1(&self) -> usize {
        match self {
            Self::Fourier { n1, .. } | Self::Blur { n1, .. } => *n1,
        }
    }

    pub fn build(&self) -> Result<Arc<dyn LinearOperator>> {
        Ok(match self {
            Self::Fourier { n1, removed } => {
                Arc::new(FourierSamplingOp::new(*n1, removed.iter().copied())?)
            }
            Self::Blur { n1, blur_gamma } => Arc::new(GaussianBlurOp::new(*n1, *blur_gamma)?),
        })
    }
}
