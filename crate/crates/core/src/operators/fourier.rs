use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::LinearOperator;
use crate::error::{Error, Result};

/// A 2-D frequency pair `(k, l)`; `k` pairs with the row coordinate `s`,
/// `l` with the column coordinate `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Frequency {
    pub k: i64,
    pub l: i64,
}

impl Frequency {
    pub const fn new(k: i64, l: i64) -> Self {
        Self { k, l }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.k, self.l)
    }
}

/// Half-width of the sampled square: frequencies run over `-c <= k, l < c`.
pub(crate) fn half_width(n1: usize) -> i64 {
    n1.div_ceil(2) as i64
}

/// Separable 2-D FFT on a column-major `n1 x n1` grid.
#[derive(Clone)]
pub(crate) struct Fft2 {
    n1: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n1: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n1,
            forward: planner.plan_fft_forward(n1),
            inverse: planner.plan_fft_inverse(n1),
        }
    }

    /// Unnormalized transform in place; `inverse` flips the exponent sign.
    pub fn process(&self, buf: &mut [Complex64], inverse: bool) {
        let n1 = self.n1;
        let plan = if inverse { &self.inverse } else { &self.forward };
        // columns are contiguous: transform along the row index a
        plan.process(buf);
        transpose(buf, n1);
        plan.process(buf);
        transpose(buf, n1);
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i + n * j, j + n * i);
        }
    }
}

/// Real-stacked samples of the normalized 2-D DFT
/// `y_{k,l} = N1^-2 * sum_{a,b} x(a,b) exp(-i 2 pi (k a + l b) / N1)`
/// over `-ceil(N1/2) <= k, l < ceil(N1/2)`, with a set of frequencies removed.
///
/// The output holds the real parts of all retained samples followed by their
/// imaginary parts. The normalization makes `y_{0,0}` the image average.
#[derive(Clone)]
pub struct FourierSamplingOp {
    n1: usize,
    removed: BTreeSet<Frequency>,
    retained: Vec<Frequency>,
    grid_index: Vec<usize>,
    fft: Fft2,
}

impl fmt::Debug for FourierSamplingOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierSamplingOp")
            .field("n1", &self.n1)
            .field("removed", &self.removed.len())
            .field("retained", &self.retained.len())
            .finish()
    }
}

impl FourierSamplingOp {
    pub fn new(n1: usize, removed: impl IntoIterator<Item = Frequency>) -> Result<Self> {
        if n1 == 0 {
            return Err(Error::InvalidArgument("grid width must be positive".into()));
        }
        let c = half_width(n1);
        let removed: BTreeSet<Frequency> = removed.into_iter().collect();
        if let Some(f) = removed
            .iter()
            .find(|f| f.k < -c || f.k >= c || f.l < -c || f.l >= c)
        {
            return Err(Error::InvalidArgument(format!(
                "removed frequency {f} lies outside the sampled square [-{c}, {c})^2"
            )));
        }
        let n = n1 as i64;
        let mut retained = Vec::new();
        let mut grid_index = Vec::new();
        for l in -c..c {
            for k in -c..c {
                let f = Frequency::new(k, l);
                if removed.contains(&f) {
                    continue;
                }
                retained.push(f);
                grid_index.push((k.rem_euclid(n) + n * l.rem_euclid(n)) as usize);
            }
        }
        if retained.is_empty() {
            return Err(Error::InvalidArgument(
                "removed band covers every frequency; no measurements remain".into(),
            ));
        }
        Ok(Self {
            n1,
            removed,
            retained,
            grid_index,
            fft: Fft2::new(n1),
        })
    }

    /// Full sampling, nothing removed.
    pub fn full(n1: usize) -> Result<Self> {
        Self::new(n1, std::iter::empty())
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn removed(&self) -> &BTreeSet<Frequency> {
        &self.removed
    }

    /// Retained frequencies, in output order.
    pub fn retained(&self) -> &[Frequency] {
        &self.retained
    }

    pub fn retained_count(&self) -> usize {
        self.retained.len()
    }

    /// Complex sample for the `i`-th retained frequency from a stacked vector.
    pub fn sample(&self, stacked: &[f64], i: usize) -> Complex64 {
        let r = self.retained.len();
        Complex64::new(stacked[i], stacked[r + i])
    }

    fn scale(&self) -> f64 {
        1.0 / (self.n1 * self.n1) as f64
    }
}

impl LinearOperator for FourierSamplingOp {
    fn in_dim(&self) -> usize {
        self.n1 * self.n1
    }

    fn out_dim(&self) -> usize {
        2 * self.retained.len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.process(&mut buf, false);
        let s = self.scale();
        let r = self.retained.len();
        let mut out = vec![0.0; 2 * r];
        for (i, &g) in self.grid_index.iter().enumerate() {
            out[i] = buf[g].re * s;
            out[r + i] = buf[g].im * s;
        }
        out
    }

    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let r = self.retained.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); self.in_dim()];
        for (i, &g) in self.grid_index.iter().enumerate() {
            buf[g] += Complex64::new(y[i], y[r + i]);
        }
        self.fft.process(&mut buf, true);
        let s = self.scale();
        buf.iter().map(|z| z.re * s).collect()
    }
}
