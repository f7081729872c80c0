use std::fmt;
use std::sync::Arc;

use super::{LinearOperator, RegularizationOp};
use crate::error::{check_len, Result};

/// `G x = alpha F^T F x + R^T diag(beta) R x + diag(gamma_prev) x + diag(gamma_next) x`.
///
/// Absent coupling vectors are dropped: the first frame has no
/// `gamma_prev`, the last has no `gamma_next`.
pub fn apply_precision(
    x: &[f64],
    alpha: f64,
    beta: &[f64],
    gamma_prev: Option<&[f64]>,
    gamma_next: Option<&[f64]>,
    forward: &dyn LinearOperator,
    reg: &RegularizationOp,
) -> Result<Vec<f64>> {
    let n = forward.in_dim();
    check_len("image", n, x.len())?;
    check_len("regularization input", n, reg.in_dim())?;
    check_len("intra-image precisions", reg.rows(), beta.len())?;
    for g in [gamma_prev, gamma_next].into_iter().flatten() {
        check_len("coupling precisions", n, g.len())?;
    }
    Ok(precision_unchecked(x, alpha, beta, gamma_prev, gamma_next, forward, reg))
}

fn precision_unchecked(
    x: &[f64],
    alpha: f64,
    beta: &[f64],
    gamma_prev: Option<&[f64]>,
    gamma_next: Option<&[f64]>,
    forward: &dyn LinearOperator,
    reg: &RegularizationOp,
) -> Vec<f64> {
    let mut out = forward.apply_gram(x);
    for v in &mut out {
        *v *= alpha;
    }
    let mut rx = reg.apply(x);
    for (v, b) in rx.iter_mut().zip(beta) {
        *v *= b;
    }
    for (o, v) in out.iter_mut().zip(reg.apply_adjoint(&rx)) {
        *o += v;
    }
    for g in [gamma_prev, gamma_next].into_iter().flatten() {
        for ((o, gi), xi) in out.iter_mut().zip(g).zip(x) {
            *o += gi * xi;
        }
    }
    out
}

/// `b = alpha F^T y + diag(gamma_prev) x_prev + diag(gamma_next) x_next`.
///
/// The neighbour images are the previous outer iterate.
pub fn apply_rhs(
    y: &[f64],
    alpha: f64,
    prev: Option<(&[f64], &[f64])>,
    next: Option<(&[f64], &[f64])>,
    forward: &dyn LinearOperator,
) -> Result<Vec<f64>> {
    check_len("measurement", forward.out_dim(), y.len())?;
    let n = forward.in_dim();
    for (img, g) in [prev, next].into_iter().flatten() {
        check_len("neighbour image", n, img.len())?;
        check_len("coupling precisions", n, g.len())?;
    }
    let mut out = forward.apply_adjoint(y);
    for v in &mut out {
        *v *= alpha;
    }
    for (img, g) in [prev, next].into_iter().flatten() {
        for ((o, gi), xi) in out.iter_mut().zip(g).zip(img) {
            *o += gi * xi;
        }
    }
    Ok(out)
}

/// Everything needed to apply one frame's conditional precision `G^(j)`.
#[derive(Clone)]
pub struct FrameSystem {
    pub forward: Arc<dyn LinearOperator>,
    pub reg: Arc<RegularizationOp>,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub gamma_prev: Option<Vec<f64>>,
    pub gamma_next: Option<Vec<f64>>,
}

impl fmt::Debug for FrameSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrameSystem")
            .field("pixels", &self.forward.in_dim())
            .field("alpha", &self.alpha)
            .field("beta_len", &self.beta.len())
            .field("gamma_prev", &self.gamma_prev.is_some())
            .field("gamma_next", &self.gamma_next.is_some())
            .finish()
    }
}

impl FrameSystem {
    pub fn new(
        forward: Arc<dyn LinearOperator>,
        reg: Arc<RegularizationOp>,
        alpha: f64,
        beta: Vec<f64>,
        gamma_prev: Option<Vec<f64>>,
        gamma_next: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = forward.in_dim();
        check_len("regularization input", n, reg.in_dim())?;
        check_len("intra-image precisions", reg.rows(), beta.len())?;
        for g in [&gamma_prev, &gamma_next].into_iter().flatten() {
            check_len("coupling precisions", n, g.len())?;
        }
        Ok(Self {
            forward,
            reg,
            alpha,
            beta,
            gamma_prev,
            gamma_next,
        })
    }

    pub fn dim(&self) -> usize {
        self.forward.in_dim()
    }

    /// `G x`. Panics on a length mismatch; use [`apply_precision`] for a
    /// checked call.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "image length");
        precision_unchecked(
            x,
            self.alpha,
            &self.beta,
            self.gamma_prev.as_deref(),
            self.gamma_next.as_deref(),
            self.forward.as_ref(),
            &self.reg,
        )
    }

    /// Right-hand side for this frame given its data and the neighbour images.
    pub fn rhs(&self, y: &[f64], x_prev: Option<&[f64]>, x_next: Option<&[f64]>) -> Result<Vec<f64>> {
        let prev = match (x_prev, self.gamma_prev.as_deref()) {
            (Some(x), Some(g)) => Some((x, g)),
            _ => None,
        };
        let next = match (x_next, self.gamma_next.as_deref()) {
            (Some(x), Some(g)) => Some((x, g)),
            _ => None,
        };
        apply_rhs(y, self.alpha, prev, next, self.forward.as_ref())
    }

    /// Dense row-major assembly of `G`, one column per unit vector.
    pub fn assemble_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut g = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for c in 0..n {
            e[c] = 1.0;
            let col = self.apply(&e);
            e[c] = 0.0;
            for (r, v) in col.into_iter().enumerate() {
                g[r * n + c] = v;
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::linalg::dot;
    use crate::operators::testing::{dense, random_vec};
    use crate::operators::{FourierSamplingOp, Frequency};

    fn positive(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(0.1..3.0)).collect()
    }

    #[test]
    fn zero_precisions_give_zero() {
        let f = FourierSamplingOp::full(6).unwrap();
        let r = RegularizationOp::new(1, 6).unwrap();
        let z = vec![0.0; 36];
        let x = vec![1.5; 36];
        let out = apply_precision(&x, 0.0, &vec![0.0; r.rows()], Some(&z), Some(&z), &f, &r).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn interior_frame_matches_dense_assembly() {
        let n1 = 6;
        let n = n1 * n1;
        let f = FourierSamplingOp::new(n1, [Frequency::new(1, 1), Frequency::new(-1, -1)]).unwrap();
        let r = RegularizationOp::new(1, n1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let alpha = 2.5;
        let beta = positive(&mut rng, r.rows());
        let gp = positive(&mut rng, n);
        let gn = positive(&mut rng, n);
        let x = random_vec(&mut rng, n);

        let fd = dense(&f);
        let rd = dense(&r);
        let mut want = vec![0.0; n];
        for i in 0..n {
            for c in 0..n {
                let ftf: f64 = fd.iter().map(|row| row[i] * row[c]).sum();
                let rtbr: f64 = rd.iter().zip(&beta).map(|(row, b)| row[i] * b * row[c]).sum();
                let diag = if i == c { gp[i] + gn[i] } else { 0.0 };
                want[i] += (alpha * ftf + rtbr + diag) * x[c];
            }
        }
        let got = apply_precision(&x, alpha, &beta, Some(&gp), Some(&gn), &f, &r).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10 * b.abs().max(1.0));
        }
    }

    #[test]
    fn boundary_frames_use_one_coupling_term() {
        let n1 = 5;
        let n = n1 * n1;
        let f: Arc<dyn LinearOperator> = Arc::new(FourierSamplingOp::full(n1).unwrap());
        let r = Arc::new(RegularizationOp::new(1, n1).unwrap());
        let beta = vec![1.0; r.rows()];
        let g = vec![2.0; n];
        let first = FrameSystem::new(f.clone(), r.clone(), 1.0, beta.clone(), None, Some(g.clone())).unwrap();
        let uncoupled = FrameSystem::new(f.clone(), r.clone(), 1.0, beta.clone(), None, None).unwrap();
        let x = vec![1.0; n];
        let diff = crate::linalg::sub(&first.apply(&x), &uncoupled.apply(&x));
        assert!(diff.iter().all(|d| (d - 2.0).abs() < 1e-12));

        let y = f.apply(&x);
        let neighbour = vec![3.0; n];
        let b = first.rhs(&y, None, Some(&neighbour)).unwrap();
        let b0 = uncoupled.rhs(&y, None, Some(&neighbour)).unwrap();
        assert!(b.iter().zip(&b0).all(|(p, q)| (p - q - 6.0).abs() < 1e-12));
    }

    #[test]
    fn rhs_matches_dense_middle_frame() {
        let n1 = 6;
        let n = n1 * n1;
        let f = FourierSamplingOp::new(n1, [Frequency::new(2, -1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = random_vec(&mut rng, f.out_dim());
        let (xp, xn) = (random_vec(&mut rng, n), random_vec(&mut rng, n));
        let (gp, gn) = (positive(&mut rng, n), positive(&mut rng, n));
        let alpha = 0.7;
        let fd = dense(&f);
        let got = apply_rhs(&y, alpha, Some((&xp, &gp)), Some((&xn, &gn)), &f).unwrap();
        for i in 0..n {
            let fty: f64 = fd.iter().zip(&y).map(|(row, yi)| row[i] * yi).sum();
            let want = alpha * fty + gp[i] * xp[i] + gn[i] * xn[i];
            assert!((got[i] - want).abs() < 1e-12);
        }
        // no coupling reduces to the back-projection
        let plain = apply_rhs(&y, alpha, None, None, &f).unwrap();
        let zero = vec![0.0; n];
        let zeroed = apply_rhs(&y, alpha, Some((&xp, &zero)), Some((&xn, &zero)), &f).unwrap();
        assert_eq!(plain, zeroed);
    }

    #[test]
    fn symmetric_and_positive_definite() {
        let n1 = 8;
        let n = n1 * n1;
        let f: Arc<dyn LinearOperator> =
            Arc::new(FourierSamplingOp::new(n1, [Frequency::new(1, 2), Frequency::new(-1, -2)]).unwrap());
        let r = Arc::new(RegularizationOp::new(1, n1).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let sys = FrameSystem::new(
            f,
            r.clone(),
            0.5,
            positive(&mut rng, r.rows()),
            Some(positive(&mut rng, n)),
            None,
        )
        .unwrap();
        for _ in 0..20 {
            let v = random_vec(&mut rng, n);
            let w = random_vec(&mut rng, n);
            let (gv, gw) = (sys.apply(&v), sys.apply(&w));
            let (a, b) = (dot(&gv, &w), dot(&v, &gw));
            assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()));
            assert!(dot(&gv, &v) > 0.0);
        }
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let f = FourierSamplingOp::full(4).unwrap();
        let r = RegularizationOp::new(1, 4).unwrap();
        let beta = vec![1.0; r.rows()];
        assert!(apply_precision(&[0.0; 15], 1.0, &beta, None, None, &f, &r).is_err());
        assert!(apply_precision(&[0.0; 16], 1.0, &beta[1..], None, None, &f, &r).is_err());
        assert!(apply_precision(&[0.0; 16], 1.0, &beta, Some(&[1.0; 3]), None, &f, &r).is_err());
        assert!(apply_rhs(&[0.0; 3], 1.0, None, None, &f).is_err());
        let r5 = RegularizationOp::new(1, 5).unwrap();
        assert!(apply_precision(&[0.0; 16], 1.0, &vec![1.0; r5.rows()], None, None, &f, &r5).is_err());
    }
}
