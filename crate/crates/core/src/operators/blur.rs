use std::f64::consts::PI;

use super::LinearOperator;
use crate::error::{Error, Result};

/// Taps below this fraction of the centre tap are dropped.
const TAP_CUTOFF: f64 = 1e-18;

/// Midpoint-quadrature discretization of Gaussian convolution on `[0,1]^2`
/// with zero extension outside the square:
///
/// `out(a,b) = N1^-2 * sum_{a',b'} k(s_a - s_a', t_b - t_b') x(a',b')`,
/// `k(s,t) = exp(-(s^2 + t^2) / (2 g^2)) / (2 pi g^2)`, `s_a = (a + 1/2) / N1`.
///
/// The kernel factors as `k(s,t) = h(s) h(t)`, so the operator is applied as
/// two 1-D convolutions. It is symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBlurOp {
    n1: usize,
    blur_gamma: f64,
    /// `taps[d] = h(d / N1) / N1` for `d = 0..taps.len()`.
    taps: Vec<f64>,
}

impl GaussianBlurOp {
    pub fn new(n1: usize, blur_gamma: f64) -> Result<Self> {
        if n1 == 0 {
            return Err(Error::InvalidArgument("grid width must be positive".into()));
        }
        if !(blur_gamma > 0.0 && blur_gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "blur width must be positive, got {blur_gamma}"
            )));
        }
        let h = n1 as f64;
        let norm = 1.0 / ((2.0 * PI).sqrt() * blur_gamma);
        let mut taps = Vec::new();
        for d in 0..n1 {
            let s = d as f64 / h;
            let v = norm * (-s * s / (2.0 * blur_gamma * blur_gamma)).exp() / h;
            if d > 0 && v < TAP_CUTOFF * taps[0] {
                break;
            }
            taps.push(v);
        }
        Ok(Self {
            n1,
            blur_gamma,
            taps,
        })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn blur_gamma(&self) -> f64 {
        self.blur_gamma
    }

    /// Kernel value `k(s, t)`.
    pub fn kernel(&self, s: f64, t: f64) -> f64 {
        let g2 = self.blur_gamma * self.blur_gamma;
        (-(s * s + t * t) / (2.0 * g2)).exp() / (2.0 * PI * g2)
    }

    fn convolve_lines(&self, src: &[f64], dst: &mut [f64], stride_line: usize, stride_elem: usize) {
        let n = self.n1;
        let reach = self.taps.len() as isize;
        for line in 0..n {
            let base = line * stride_line;
            for i in 0..n {
                let lo = (i as isize - reach + 1).max(0) as usize;
                let hi = ((i as isize + reach) as usize).min(n);
                let mut acc = 0.0;
                for j in lo..hi {
                    acc += self.taps[i.abs_diff(j)] * src[base + j * stride_elem];
                }
                dst[base + i * stride_elem] = acc;
            }
        }
    }
}

impl LinearOperator for GaussianBlurOp {
    fn in_dim(&self) -> usize {
        self.n1 * self.n1
    }

    fn out_dim(&self) -> usize {
        self.n1 * self.n1
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n1;
        let mut tmp = vec![0.0; n * n];
        let mut out = vec![0.0; n * n];
        // along a (contiguous within a column), then along b
        self.convolve_lines(x, &mut tmp, n, 1);
        self.convolve_lines(&tmp, &mut out, 1, n);
        out
    }

    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        self.apply(y)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::operators::testing::{adjoint_defect, random_vec};

    /// Dense quadrature matrix from the 2-D kernel directly.
    fn dense_apply(op: &GaussianBlurOp, x: &[f64]) -> Vec<f64> {
        let n = op.n1();
        let h = n as f64;
        let mid = |i: usize| (i as f64 + 0.5) / h;
        let mut out = vec![0.0; n * n];
        for b in 0..n {
            for a in 0..n {
                let mut acc = 0.0;
                for bb in 0..n {
                    for aa in 0..n {
                        acc += op.kernel(mid(a) - mid(aa), mid(b) - mid(bb)) * x[aa + n * bb];
                    }
                }
                out[a + n * b] = acc / (h * h);
            }
        }
        out
    }

    #[test]
    fn matches_dense_quadrature() {
        for gamma in [5e-3, 0.05, 0.2] {
            let op = GaussianBlurOp::new(16, gamma).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let x = random_vec(&mut rng, 256);
            let fast = op.apply(&x);
            let slow = dense_apply(&op, &x);
            let scale = slow.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-12 * scale, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn delta_recovers_kernel_samples() {
        let n = 12;
        let op = GaussianBlurOp::new(n, 0.1).unwrap();
        let mut x = vec![0.0; n * n];
        let (a0, b0) = (5, 7);
        x[a0 + n * b0] = 1.0;
        let y = op.apply(&x);
        let h = n as f64;
        for b in 0..n {
            for a in 0..n {
                let s = (a as f64 - a0 as f64) / h;
                let t = (b as f64 - b0 as f64) / h;
                let want = op.kernel(s, t) / (h * h);
                assert!((y[a + n * b] - want).abs() < 1e-12 * want.max(1e-3));
            }
        }
    }

    #[test]
    fn symmetric_operator() {
        let op = GaussianBlurOp::new(10, 0.08).unwrap();
        assert!(adjoint_defect(&op, 20, 9) < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_vec(&mut rng, 100);
        assert_eq!(op.apply(&u), op.apply_adjoint(&u));
    }

    #[test]
    fn constant_preserved_in_interior() {
        let n = 40;
        let op = GaussianBlurOp::new(n, 0.02).unwrap();
        let y = op.apply(&vec![2.0; n * n]);
        // interior pixels far (> 6 sigma) from the boundary
        for b in 10..30 {
            for a in 10..30 {
                assert!((y[a + n * b] - 2.0).abs() < 1e-2);
            }
        }
        // the corner keeps the centre tap plus one half-tail per axis
        let h = |d: i64| {
            let s = d as f64 / n as f64 / 0.02;
            (-0.5 * s * s).exp() / ((2.0 * std::f64::consts::PI).sqrt() * 0.02) / n as f64
        };
        let side: f64 = (0..n as i64).map(h).sum();
        assert!((y[0] - 2.0 * side * side).abs() < 1e-12);
        assert!(y[0] < 1.5);
    }

    #[test]
    fn translation_covariant_in_interior() {
        let n = 32;
        let op = GaussianBlurOp::new(n, 0.03).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut x = vec![0.0; n * n];
        for b in 8..24 {
            for a in 8..24 {
                x[a + n * b] = rand::Rng::random_range(&mut rng, 0.0..1.0);
            }
        }
        let mut shifted = vec![0.0; n * n];
        for b in 0..n {
            for a in 1..n {
                shifted[a + n * b] = x[(a - 1) + n * b];
            }
        }
        let y = op.apply(&x);
        let ys = op.apply(&shifted);
        for b in 0..n {
            for a in 1..n {
                assert!((ys[a + n * b] - y[(a - 1) + n * b]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_width() {
        assert!(GaussianBlurOp::new(8, 0.0).is_err());
        assert!(GaussianBlurOp::new(8, f64::NAN).is_err());
    }
}
