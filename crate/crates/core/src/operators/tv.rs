use super::LinearOperator;
use crate::error::{Error, Result};

/// Anisotropic finite-difference operator `R = [I (x) D; D (x) I]`.
///
/// `D` is the `(n1 - order) x n1` difference matrix with rows `(-1, 1)` for
/// order 1 and `(-1, 2, -1)` for order 2. Under column-major vectorization the
/// first block differences along the row index `a` (down each column, the
/// "vertical" direction) and the second block along the column index `b`.
///
/// Output layout: block 1 entry `(r, b)` at `r + (n1 - order) * b`; block 2
/// entry `(a, r)` at `K/2 + a + n1 * r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegularizationOp {
    order: usize,
    n1: usize,
}

impl RegularizationOp {
    pub fn new(order: usize, n1: usize) -> Result<Self> {
        if !(order == 1 || order == 2) {
            return Err(Error::InvalidArgument(format!(
                "regularization order must be 1 or 2, got {order}"
            )));
        }
        if n1 <= order {
            return Err(Error::InvalidArgument(format!(
                "grid width {n1} too small for order-{order} differences"
            )));
        }
        Ok(Self { order, n1 })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    /// Rows per directional block, `n1 * (n1 - order)`.
    pub fn block_len(&self) -> usize {
        self.n1 * (self.n1 - self.order)
    }

    /// Total row count `K`.
    pub fn rows(&self) -> usize {
        2 * self.block_len()
    }

    pub(crate) fn stencil(&self) -> &'static [f64] {
        match self.order {
            1 => &[-1.0, 1.0],
            _ => &[-1.0, 2.0, -1.0],
        }
    }
}

impl LinearOperator for RegularizationOp {
    fn in_dim(&self) -> usize {
        self.n1 * self.n1
    }

    fn out_dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n1;
        let m = n - self.order;
        let st = self.stencil();
        let mut out = vec![0.0; self.rows()];
        let (first, second) = out.split_at_mut(self.block_len());
        for b in 0..n {
            for r in 0..m {
                first[r + m * b] = st
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c * x[(r + i) + n * b])
                    .sum();
            }
        }
        for r in 0..m {
            for a in 0..n {
                second[a + n * r] = st
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c * x[a + n * (r + i)])
                    .sum();
            }
        }
        out
    }

    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n1;
        let m = n - self.order;
        let st = self.stencil();
        let (first, second) = y.split_at(self.block_len());
        let mut out = vec![0.0; n * n];
        for b in 0..n {
            for r in 0..m {
                let v = first[r + m * b];
                for (i, c) in st.iter().enumerate() {
                    out[(r + i) + n * b] += c * v;
                }
            }
        }
        for r in 0..m {
            for a in 0..n {
                let v = second[a + n * r];
                for (i, c) in st.iter().enumerate() {
                    out[a + n * (r + i)] += c * v;
                }
            }
        }
        out
    }
}
