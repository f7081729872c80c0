//! Domain types of the joint hierarchical model and the closed-form
//! conditional updates for its precision hyper-parameters.
//!
//! Every hyper-parameter carries a gamma hyper-prior `Gamma(eta, theta)` with
//! density proportional to `v^(eta - 1) exp(-theta v)`. Conditioned on the
//! images, each one is again gamma distributed, and the block coordinate
//! updates set it to that conditional's mode `max(0, (eta' - 1) / theta')`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{all_finite, dist2};
use crate::operators::{FrameSystem, LinearOperator, OperatorDescriptor, RegularizationOp};

/// A temporal sequence of `J` vectorized `n1 x n1` images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSequence {
    n1: usize,
    frames: Vec<Vec<f64>>,
}

impl ImageSequence {
    pub fn new(n1: usize, frames: Vec<Vec<f64>>) -> Result<Self> {
        if n1 == 0 {
            return Err(Error::InvalidArgument("image width must be positive".into()));
        }
        if frames.is_empty() {
            return Err(Error::InvalidArgument("a sequence needs at least one frame".into()));
        }
        for (j, f) in frames.iter().enumerate() {
            check_len("frame length", n1 * n1, f.len())?;
            if !all_finite(f) {
                return Err(Error::Domain(format!("frame {j} has non-finite pixels")));
            }
        }
        Ok(Self { n1, frames })
    }

    /// `count` copies of the same image.
    pub fn repeated(n1: usize, frame: Vec<f64>, count: usize) -> Result<Self> {
        Self::new(n1, vec![frame; count])
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn pixels(&self) -> usize {
        self.n1 * self.n1
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, j: usize) -> &[f64] {
        &self.frames[j]
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Vec<f64>> {
        self.frames
    }

    /// Pixel `(a, b)` of frame `j` (row `a`, column `b`).
    pub fn pixel(&self, j: usize, a: usize, b: usize) -> f64 {
        self.frames[j][a + self.n1 * b]
    }

    /// `||x^(j) - x^(j+1)||_2` for every consecutive pair.
    pub fn consecutive_differences(&self) -> Vec<f64> {
        self.frames.windows(2).map(|w| dist2(&w[0], &w[1])).collect()
    }
}

/// Per-frame measurement vectors, optionally with the descriptors of the
/// forward operators that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    data: Vec<Vec<f64>>,
    #[serde(default)]
    descriptors: Vec<OperatorDescriptor>,
}

impl MeasurementSet {
    pub fn new(data: Vec<Vec<f64>>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("no measurement vectors".into()));
        }
        for (j, y) in data.iter().enumerate() {
            if !all_finite(y) {
                return Err(Error::Domain(format!("measurement {j} has non-finite entries")));
            }
        }
        Ok(Self {
            data,
            descriptors: Vec::new(),
        })
    }

    pub fn with_descriptors(data: Vec<Vec<f64>>, descriptors: Vec<OperatorDescriptor>) -> Result<Self> {
        check_len("operator descriptors", data.len(), descriptors.len())?;
        let mut set = Self::new(data)?;
        set.descriptors = descriptors;
        set.operators()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self, j: usize) -> &[f64] {
        &self.data[j]
    }

    pub fn all_data(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn descriptors(&self) -> &[OperatorDescriptor] {
        &self.descriptors
    }

    /// Builds the forward operators from the descriptors and checks each
    /// output dimension against its data vector.
    pub fn operators(&self) -> Result<Vec<Arc<dyn LinearOperator>>> {
        if self.descriptors.is_empty() {
            return Err(Error::InvalidArgument(
                "measurement set carries no operator descriptors".into(),
            ));
        }
        self.descriptors
            .iter()
            .zip(&self.data)
            .map(|(d, y)| {
                let op = d.build()?;
                check_len("measurement length", op.out_dim(), y.len())?;
                Ok(op)
            })
            .collect()
    }

    /// Checks the data lengths against caller-supplied operators.
    pub fn check_operators(&self, ops: &[Arc<dyn LinearOperator>]) -> Result<()> {
        check_len("forward operators", self.data.len(), ops.len())?;
        for (op, y) in ops.iter().zip(&self.data) {
            check_len("measurement length", op.out_dim(), y.len())?;
        }
        Ok(())
    }
}

/// Shape/rate pairs of the three gamma hyper-priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub eta_alpha: f64,
    pub theta_alpha: f64,
    pub eta_beta: f64,
    pub theta_beta: f64,
    pub eta_gamma: f64,
    pub theta_gamma: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self::fourier_default()
    }
}

impl HyperParams {
    /// `eta_alpha = eta_beta = 1`, `eta_gamma = 2`, all rates `1e-3`.
    pub const fn fourier_default() -> Self {
        Self {
            eta_alpha: 1.0,
            theta_alpha: 1e-3,
            eta_beta: 1.0,
            theta_beta: 1e-3,
            eta_gamma: 2.0,
            theta_gamma: 1e-3,
        }
    }

    /// `eta_gamma = 1`, `theta_gamma = 0.1`, otherwise as the Fourier default.
    pub const fn blur_default() -> Self {
        Self {
            eta_gamma: 1.0,
            theta_gamma: 0.1,
            ..Self::fourier_default()
        }
    }

    pub fn with_coupling(self, eta_gamma: f64, theta_gamma: f64) -> Self {
        Self {
            eta_gamma,
            theta_gamma,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("eta_alpha", self.eta_alpha),
            ("theta_alpha", self.theta_alpha),
            ("eta_beta", self.eta_beta),
            ("theta_beta", self.theta_beta),
            ("eta_gamma", self.eta_gamma),
            ("theta_gamma", self.theta_gamma),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Current estimates of all precision hyper-parameters.
///
/// `gamma` is empty for an uncoupled (separate) model; otherwise it holds
/// `J - 1` vectors, entry `j` coupling frames `j` and `j + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionState {
    pub alpha: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
}

impl PrecisionState {
    pub fn is_coupled(&self) -> bool {
        !self.gamma.is_empty()
    }

    /// Dimension checks against `frames` frames of `pixels` pixels and `k`
    /// regularization rows, plus the sign constraint.
    pub fn validate(&self, frames: usize, pixels: usize, k: usize) -> Result<()> {
        check_len("noise precisions", frames, self.alpha.len())?;
        check_len("intra-image precision vectors", frames, self.beta.len())?;
        for b in &self.beta {
            check_len("intra-image precisions", k, b.len())?;
        }
        if self.is_coupled() {
            check_len("coupling precision vectors", frames - 1, self.gamma.len())?;
            for g in &self.gamma {
                check_len("coupling precisions", pixels, g.len())?;
            }
        }
        let negative = self
            .alpha
            .iter()
            .chain(self.beta.iter().flatten())
            .chain(self.gamma.iter().flatten())
            .any(|v| !(*v >= 0.0));
        if negative {
            return Err(Error::Domain("precisions must be nonnegative".into()));
        }
        Ok(())
    }

    /// Mean over all coupling precisions, `None` when uncoupled.
    pub fn mean_gamma(&self) -> Option<f64> {
        let count: usize = self.gamma.iter().map(Vec::len).sum();
        (count > 0).then(|| self.gamma.iter().flatten().sum::<f64>() / count as f64)
    }
}

/// Conditional Gaussian of one frame: its mean and a matrix-free precision.
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    pub mean: Vec<f64>,
    pub precision: FrameSystem,
}

impl GaussianPosterior {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `G v` with `G` the inverse covariance.
    pub fn precision_apply(&self, v: &[f64]) -> Vec<f64> {
        self.precision.apply(v)
    }
}

/// Mode of `Gamma(eta, theta)`: `max(0, (eta - 1) / theta)`.
pub fn gamma_mode(eta: f64, theta: f64) -> Result<f64> {
    if !(eta > 0.0 && theta > 0.0) || !eta.is_finite() || theta.is_nan() {
        return Err(Error::Domain(format!(
            "gamma mode needs positive shape and rate, got ({eta}, {theta})"
        )));
    }
    Ok(mode_unchecked(eta, theta))
}

#[inline]
fn mode_unchecked(eta: f64, theta: f64) -> f64 {
    ((eta - 1.0) / theta).max(0.0)
}

/// Noise precision update: `(eta_a + m/2 - 1) / (theta_a + r/2)`, clamped at 0.
#[inline]
pub fn update_alpha(residual_sq: f64, m: usize, hp: &HyperParams) -> f64 {
    mode_unchecked(hp.eta_alpha + m as f64 / 2.0, hp.theta_alpha + residual_sq / 2.0)
}

/// Intra-image precision update: `(eta_b - 1/2) / (theta_b + rx^2/2)`, clamped at 0.
#[inline]
pub fn update_beta(rx_k: f64, hp: &HyperParams) -> f64 {
    mode_unchecked(hp.eta_beta + 0.5, hp.theta_beta + rx_k * rx_k / 2.0)
}

/// Coupling precision update: `(eta_g - 1/2) / (theta_g + d^2/2)`, clamped at 0.
#[inline]
pub fn update_gamma(diff_n: f64, hp: &HyperParams) -> f64 {
    mode_unchecked(hp.eta_gamma + 0.5, hp.theta_gamma + diff_n * diff_n / 2.0)
}

/// `c * ln(v)` with the convention `0 * ln(0) = 0`.
fn xlogy(c: f64, v: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * v.ln()
    }
}

/// Log of the unnormalized joint posterior, additive constants dropped.
///
/// Collects, per hyper-parameter `v` with conditional shape `eta'` and rate
/// `theta'`, the terms `(eta' - 1) ln v - theta' v`, which makes each
/// closed-form update an exact coordinate-wise maximizer. Coupling terms are
/// skipped when `p` is uncoupled.
pub fn log_joint_density(
    x: &ImageSequence,
    p: &PrecisionState,
    y: &MeasurementSet,
    ops: &[Arc<dyn LinearOperator>],
    reg: &RegularizationOp,
    hp: &HyperParams,
) -> Result<f64> {
    let frames = x.len();
    check_len("measurement sets", frames, y.len())?;
    y.check_operators(ops)?;
    check_len("regularization input", x.pixels(), reg.in_dim())?;
    p.validate(frames, x.pixels(), reg.rows())?;

    let mut total = 0.0;
    for j in 0..frames {
        let xj = x.frame(j);
        check_len("image", ops[j].in_dim(), xj.len())?;
        let residual_sq = dist2(&ops[j].apply(xj), y.data(j)).powi(2);
        let m = y.data(j).len() as f64;
        let a = p.alpha[j];
        total += xlogy(hp.eta_alpha + m / 2.0 - 1.0, a) - a * (hp.theta_alpha + residual_sq / 2.0);

        let rx = reg.apply(xj);
        for (b, r) in p.beta[j].iter().zip(&rx) {
            total += xlogy(hp.eta_beta - 0.5, *b) - b * (hp.theta_beta + r * r / 2.0);
        }
    }
    for (j, g) in p.gamma.iter().enumerate() {
        for ((gn, u), v) in g.iter().zip(x.frame(j)).zip(x.frame(j + 1)) {
            let d = u - v;
            total += xlogy(hp.eta_gamma - 0.5, *gn) - gn * (hp.theta_gamma + d * d / 2.0);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::operators::FourierSamplingOp;

    fn hp(eta_a: f64, th_a: f64, eta_b: f64, th_b: f64, eta_g: f64, th_g: f64) -> HyperParams {
        HyperParams {
            eta_alpha: eta_a,
            theta_alpha: th_a,
            eta_beta: eta_b,
            theta_beta: th_b,
            eta_gamma: eta_g,
            theta_gamma: th_g,
        }
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    #[test]
    fn gamma_mode_examples() {
        assert_eq!(gamma_mode(2.0, 1e-3).unwrap(), 1000.0);
        assert_eq!(gamma_mode(1.0, 5.0).unwrap(), 0.0);
        assert_eq!(gamma_mode(0.5, 2.0).unwrap(), 0.0);
        assert!(gamma_mode(0.0, 1.0).is_err());
        assert!(gamma_mode(1.0, -1.0).is_err());
        assert!(gamma_mode(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn update_examples() {
        let h = hp(1.0, 1e-3, 1.0, 1e-3, 2.0, 1e-3);
        assert!(close(update_alpha(2.0, 4, &h), 2.0 / 1.001, 1e-15));
        assert_eq!(update_alpha(0.0, 2, &hp(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)), 1.0);
        assert!(close(update_alpha(10.0, 100, &h), 50.0 / 5.001, 1e-15));
        assert!(close(update_beta(0.0, &h), 500.0, 1e-15));
        assert!(close(update_beta(1.0, &h), 0.5 / 0.501, 1e-15));
        assert!(close(update_gamma(0.0, &h), 1500.0, 1e-12));
        assert!(close(update_gamma(2.0, &h), 1.5 / 2.001, 1e-15));
        let flat = hp(1.0, 1e-3, 0.5, 1e-3, 0.5, 1e-3);
        for v in [-3.0, 0.0, 1e-8, 7.0] {
            assert_eq!(update_beta(v, &flat), 0.0);
            assert_eq!(update_gamma(v, &flat), 0.0);
        }
        // negative numerators clamp
        assert_eq!(update_beta(0.0, &hp(1.0, 1.0, 0.2, 1.0, 1.0, 1.0)), 0.0);
        assert_eq!(update_alpha(1.0, 0, &hp(0.5, 1.0, 1.0, 1.0, 1.0, 1.0)), 0.0);
    }

    #[test]
    fn updates_are_modes_of_the_conditionals() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let h = hp(
                rng.random_range(0.3..5.0),
                rng.random_range(1e-4..2.0),
                rng.random_range(0.3..5.0),
                rng.random_range(1e-4..2.0),
                rng.random_range(0.3..5.0),
                rng.random_range(1e-4..2.0),
            );
            let r: f64 = rng.random_range(0.0..50.0);
            let m: usize = rng.random_range(1..200);
            let v: f64 = rng.random_range(-5.0..5.0);
            let want_a = gamma_mode(h.eta_alpha + m as f64 / 2.0, h.theta_alpha + r / 2.0).unwrap();
            let want_b = gamma_mode(h.eta_beta + 0.5, h.theta_beta + v * v / 2.0).unwrap();
            let want_g = gamma_mode(h.eta_gamma + 0.5, h.theta_gamma + v * v / 2.0).unwrap();
            assert!(close(update_alpha(r, m, &h), want_a, 1e-12) || want_a == 0.0);
            assert!(close(update_beta(v, &h), want_b, 1e-12) || want_b == 0.0);
            assert!(close(update_gamma(v, &h), want_g, 1e-12) || want_g == 0.0);
            assert_eq!(update_beta(v, &h), update_beta(-v, &h));
        }
    }

    #[test]
    fn update_gamma_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let eta = rng.random_range(0.6..5.0);
            let theta = rng.random_range(1e-4..1.0);
            let d: f64 = rng.random_range(-3.0..3.0);
            let base = update_gamma(d, &hp(1.0, 1.0, 1.0, 1.0, eta, theta));
            assert!(update_gamma(d, &hp(1.0, 1.0, 1.0, 1.0, eta + 0.3, theta)) > base);
            assert!(update_gamma(d, &hp(1.0, 1.0, 1.0, 1.0, eta, theta * 1.5)) < base);
            assert!(update_gamma(d.abs() + 0.1, &hp(1.0, 1.0, 1.0, 1.0, eta, theta)) < base);
        }
    }

    #[test]
    fn hyper_param_validation_and_defaults() {
        assert!(HyperParams::default().validate().is_ok());
        let d = HyperParams::fourier_default();
        assert_eq!((d.eta_alpha, d.eta_beta, d.eta_gamma), (1.0, 1.0, 2.0));
        assert_eq!((d.theta_alpha, d.theta_beta, d.theta_gamma), (1e-3, 1e-3, 1e-3));
        let b = HyperParams::blur_default();
        assert_eq!((b.eta_gamma, b.theta_gamma), (1.0, 0.1));
        assert!(d.with_coupling(0.0, 1.0).validate().is_err());
        assert!(d.with_coupling(1.0, f64::INFINITY).validate().is_err());
    }

    #[test]
    fn sequence_validation() {
        assert!(ImageSequence::new(2, vec![vec![0.0; 4], vec![0.0; 3]]).is_err());
        assert!(ImageSequence::new(2, vec![vec![0.0, f64::NAN, 0.0, 0.0]]).is_err());
        assert!(ImageSequence::new(2, vec![]).is_err());
        let s = ImageSequence::new(2, vec![vec![0.0, 1.0, 2.0, 3.0], vec![0.0; 4]]).unwrap();
        assert_eq!(s.pixel(0, 1, 1), 3.0);
        assert!(close(s.consecutive_differences()[0], 14f64.sqrt(), 1e-15));
    }

    #[test]
    fn measurement_set_checks_operator_dimensions() {
        let d = OperatorDescriptor::Fourier { n1: 4, removed: vec![] };
        assert!(MeasurementSet::with_descriptors(vec![vec![0.0; 32]], vec![d.clone()]).is_ok());
        assert!(MeasurementSet::with_descriptors(vec![vec![0.0; 31]], vec![d.clone()]).is_err());
        assert!(MeasurementSet::with_descriptors(vec![vec![0.0; 32]], vec![d.clone(), d]).is_err());
        assert!(MeasurementSet::new(vec![vec![f64::INFINITY]]).is_err());
    }

    struct Instance {
        x: ImageSequence,
        p: PrecisionState,
        y: MeasurementSet,
        ops: Vec<Arc<dyn LinearOperator>>,
        reg: RegularizationOp,
    }

    fn instance(seed: u64, frames: usize, coupled: bool) -> Instance {
        let n1 = 2;
        let n = n1 * n1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vec = |len: usize, lo: f64, hi: f64| -> Vec<f64> {
            (0..len).map(|_| rng.random_range(lo..hi)).collect()
        };
        let reg = RegularizationOp::new(1, n1).unwrap();
        let ops: Vec<Arc<dyn LinearOperator>> = (0..frames)
            .map(|_| Arc::new(FourierSamplingOp::full(n1).unwrap()) as Arc<dyn LinearOperator>)
            .collect();
        let x = ImageSequence::new(n1, (0..frames).map(|_| vec(n, -1.0, 1.0)).collect()).unwrap();
        let y = MeasurementSet::new((0..frames).map(|_| vec(2 * n, -1.0, 1.0)).collect()).unwrap();
        let p = PrecisionState {
            alpha: vec(frames, 0.1, 3.0),
            beta: (0..frames).map(|_| vec(reg.rows(), 0.1, 3.0)).collect(),
            gamma: if coupled {
                (1..frames).map(|_| vec(n, 0.1, 3.0)).collect()
            } else {
                Vec::new()
            },
        };
        Instance { x, p, y, ops, reg }
    }

    /// Independent evaluation: sum of the logs of every factor of the joint
    /// density written out separately (likelihood, intra prior, inter prior,
    /// three hyper-priors).
    fn term_by_term(inst: &Instance, h: &HyperParams) -> f64 {
        let mut likelihood = 0.0;
        let mut intra = 0.0;
        let mut inter = 0.0;
        let mut hyper = 0.0;
        for j in 0..inst.x.len() {
            let xj = inst.x.frame(j);
            let fx = inst.ops[j].apply(xj);
            let r2: f64 = fx.iter().zip(inst.y.data(j)).map(|(a, b)| (a - b).powi(2)).sum();
            let m = inst.y.data(j).len() as f64;
            let a = inst.p.alpha[j];
            likelihood += m / 2.0 * a.ln() - a / 2.0 * r2;
            let rx = inst.reg.apply(xj);
            let det: f64 = inst.p.beta[j].iter().map(|b| b.ln()).sum();
            let quad: f64 = inst.p.beta[j].iter().zip(&rx).map(|(b, r)| b * r * r).sum();
            intra += 0.5 * det - 0.5 * quad;
            hyper += (h.eta_alpha - 1.0) * a.ln() - h.theta_alpha * a;
            for b in &inst.p.beta[j] {
                hyper += (h.eta_beta - 1.0) * b.ln() - h.theta_beta * b;
            }
        }
        for (j, g) in inst.p.gamma.iter().enumerate() {
            let d: Vec<f64> = inst.x.frame(j).iter().zip(inst.x.frame(j + 1)).map(|(u, v)| u - v).collect();
            let det: f64 = g.iter().map(|v| v.ln()).sum();
            let quad: f64 = g.iter().zip(&d).map(|(v, di)| v * di * di).sum();
            inter += 0.5 * det - 0.5 * quad;
            for v in g {
                hyper += (h.eta_gamma - 1.0) * v.ln() - h.theta_gamma * v;
            }
        }
        likelihood + intra + inter + hyper
    }

    #[test]
    fn log_joint_matches_factor_sum() {
        let h = hp(1.3, 0.2, 0.9, 0.05, 2.0, 1e-2);
        for seed in 0..5 {
            let inst = instance(seed, 2, true);
            let got = log_joint_density(&inst.x, &inst.p, &inst.y, &inst.ops, &inst.reg, &h).unwrap();
            let want = term_by_term(&inst, &h);
            assert!(close(got, want, 1e-12), "{got} vs {want}");
        }
    }

    #[test]
    fn single_frame_has_no_coupling_terms() {
        let h = HyperParams::default();
        let inst = instance(3, 1, false);
        assert!(!inst.p.is_coupled());
        let a =log_joint_density(&inst.x, &inst.p, &inst.y, &inst.ops, &inst.reg, &h).unwrap();
        assert!(close(a, term_by_term(&inst, &h), 1e-12));
    }

    #[test]
    fn larger_residual_lowers_the_density() {
        let h = HyperParams::default();
        let inst = instance(4, 2, true);
        let base = log_joint_density(&inst.x, &inst.p, &inst.y, &inst.ops, &inst.reg, &h).unwrap();
        let mut shifted = inst.y.all_data().to_vec();
        let fx = inst.ops[0].apply(inst.x.frame(0));
        // push y(0) further from F x(0)
        for (yi, f) in shifted[0].iter_mut().zip(&fx) {
            *yi += 0.5 * (*yi - f);
        }
        let y2 = MeasurementSet::new(shifted).unwrap();
        let moved = log_joint_density(&inst.x, &inst.p, &y2, &inst.ops, &inst.reg, &h).unwrap();
        assert!(moved < base);
    }

    #[test]
    fn rejects_negative_precisions() {
        let h = HyperParams::default();
        let mut inst = instance(5, 2, true);
        inst.p.gamma[0][1] = -1e-9;
        let err = log_joint_density(&inst.x, &inst.p, &inst.y, &inst.ops, &inst.reg, &h);
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn coordinate_updates_never_decrease_the_density() {
        let h = hp(1.0, 1e-3, 1.0, 1e-3, 2.0, 1e-3);
        for seed in 0..50 {
            let mut inst = instance(100 + seed, 3, true);
            let f = |i: &Instance| log_joint_density(&i.x, &i.p, &i.y, &i.ops, &i.reg, &h).unwrap();
            let mut before = f(&inst);
            for j in 0..3 {
                let r2 = dist2(&inst.ops[j].apply(inst.x.frame(j)), inst.y.data(j)).powi(2);
                inst.p.alpha[j] = update_alpha(r2, inst.y.data(j).len(), &h);
                let after = f(&inst);
                assert!(after >= before - 1e-12 * before.abs());
                before = after;
                let rx = inst.reg.apply(inst.x.frame(j));
                inst.p.beta[j] = rx.iter().map(|r| update_beta(*r, &h)).collect();
                let after = f(&inst);
                assert!(after >= before - 1e-12 * before.abs());
                before = after;
            }
            for j in 0..2 {
                let d = crate::linalg::sub(inst.x.frame(j), inst.x.frame(j + 1));
                inst.p.gamma[j] = d.iter().map(|v| update_gamma(*v, &h)).collect();
                let after = f(&inst);
                assert!(after >= before - 1e-12 * before.abs());
                before = after;
            }
        }
    }
}
