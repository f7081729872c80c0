//! Block coordinate descent for the joint model.
//!
//! One outer iteration updates, in order, the noise precisions `alpha`, the
//! intra-image precisions `beta`, the coupling precisions `gamma` (joint mode
//! only) and finally every image. All parameter updates read the same
//! previous image iterate, and each image update reads its neighbours from
//! that iterate too, so the per-frame work is independent and runs in
//! parallel with results identical to a sequential sweep.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{all_finite, axpy, dist2, dot, norm2, sub};
use crate::model::{
    log_joint_density, update_alpha, update_beta, update_gamma, GaussianPosterior, HyperParams,
    ImageSequence, MeasurementSet, PrecisionState,
};
use crate::operators::{FrameSystem, LinearOperator, RegularizationOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Frames coupled through learned pixelwise precisions.
    #[default]
    Joint,
    /// Independent per-frame recovery; coupling precisions are never formed.
    Separate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub hyper: HyperParams,
    pub max_outer_iters: usize,
    pub tol: f64,
    pub inner_gd_steps: usize,
    pub mode: Mode,
    /// Record the log joint density in the history (one extra forward and
    /// regularization application per frame and iteration).
    pub track_objective: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            hyper: HyperParams::default(),
            max_outer_iters: 1000,
            tol: 1e-3,
            inner_gd_steps: 5,
            mode: Mode::Joint,
            track_objective: true,
        }
    }
}

impl SolverConfig {
    pub fn separate(hyper: HyperParams) -> Self {
        Self {
            hyper,
            mode: Mode::Separate,
            ..Self::default()
        }
    }

    pub fn joint(hyper: HyperParams) -> Self {
        Self {
            hyper,
            mode: Mode::Joint,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidArgument("max_outer_iters must be positive".into()));
        }
        if self.inner_gd_steps == 0 {
            return Err(Error::InvalidArgument("inner_gd_steps must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `(1/J) sum_j ||x_new^(j) - x_old^(j)||`
    pub abs_change: f64,
    /// `(1/J) sum_j ||x_new^(j) - x_old^(j)|| / ||x_old^(j)||`
    pub rel_change: f64,
    /// NaN when objective tracking is off.
    pub log_joint: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub images: ImageSequence,
    pub precisions: PrecisionState,
    /// Conditional Gaussian of each frame at the final parameters; the mean is
    /// the final image iterate.
    pub posteriors: Vec<GaussianPosterior>,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
    /// Iterations spent in the separate warm start (joint mode without `x0`).
    pub warm_start_iterations: usize,
}

/// Runs the coordinate descent loop.
///
/// Without `x0`, separate mode starts from the scaled [`backprojection`] and
/// joint mode starts from a separate solve with the same configuration.
pub fn solve(
    y: &MeasurementSet,
    ops: &[Arc<dyn LinearOperator>],
    reg: &RegularizationOp,
    cfg: &SolverConfig,
    x0: Option<ImageSequence>,
) -> Result<SolveResult> {
    cfg.validate()?;
    y.check_operators(ops)?;
    let n1 = reg.n1();
    for op in ops {
        check_len("forward operator input", n1 * n1, op.in_dim())?;
    }

    let (x0, warm_start_iterations) = match x0 {
        Some(x) => {
            check_len("initial frames", y.len(), x.len())?;
            check_len("initial image width", n1, x.n1())?;
            (x, 0)
        }
        None => match cfg.mode {
            Mode::Separate => (backprojection(y, ops, n1)?, 0),
            Mode::Joint => {
                let sep = SolverConfig {
                    mode: Mode::Separate,
                    ..cfg.clone()
                };
                let warm = solve(y, ops, reg, &sep, None)?;
                (warm.images, warm.iterations)
            }
        },
    };

    let reg = Arc::new(reg.clone());
    let frames = y.len();
    let coupled = cfg.mode == Mode::Joint && frames > 1;
    let hp = cfg.hyper;

    let mut x = x0.into_frames();
    let mut history = Vec::new();
    let mut converged = false;
    let mut last = None;

    for iteration in 1..=cfg.max_outer_iters {
        let precisions = update_precisions(&x, y, ops, &reg, &hp, coupled);
        let systems = frame_systems(&precisions, ops, &reg)?;

        let x_new: Vec<Vec<f64>> = (0..frames)
            .into_par_iter()
            .map(|j| {
                let prev = (j > 0).then(|| x[j - 1].as_slice());
                let next = (j + 1 < frames).then(|| x[j + 1].as_slice());
                let b = systems[j].rhs(y.data(j), prev, next)?;
                let xj = x_update(&systems[j], &b, &x[j], cfg.inner_gd_steps)?;
                if !all_finite(&xj) {
                    return Err(Error::NonFinite { frame: j, iteration });
                }
                Ok(xj)
            })
            .collect::<Result<_>>()?;

        let (abs_change, rel_change) = change_averages(&x, &x_new);
        let stop = abs_change < cfg.tol && rel_change < cfg.tol;
        let x_seq = ImageSequence::new(n1, x_new)?;
        let log_joint = if cfg.track_objective {
            log_joint_density(&x_seq, &precisions, y, ops, &reg, &hp)?
        } else {
            f64::NAN
        };
        history.push(IterationRecord {
            iteration,
            abs_change,
            rel_change,
            log_joint,
        });
        x = x_seq.into_frames();
        last = Some((precisions, systems));
        if stop {
            converged = true;
            break;
        }
    }

    let (precisions, systems) = last.expect("at least one iteration runs");
    let posteriors = systems
        .into_iter()
        .zip(&x)
        .map(|(precision, mean)| GaussianPosterior {
            mean: mean.clone(),
            precision,
        })
        .collect();
    Ok(SolveResult {
        images: ImageSequence::new(n1, x)?,
        precisions,
        posteriors,
        iterations: history.len(),
        converged,
        history,
        warm_start_iterations,
    })
}

/// Closed-form parameter updates, all conditioned on the same images `x`.
pub fn update_precisions(
    x: &[Vec<f64>],
    y: &MeasurementSet,
    ops: &[Arc<dyn LinearOperator>],
    reg: &RegularizationOp,
    hp: &HyperParams,
    coupled: bool,
) -> PrecisionState {
    let frames = x.len();
    let alpha = (0..frames)
        .into_par_iter()
        .map(|j| {
            let r2 = dist2(&ops[j].apply(&x[j]), y.data(j)).powi(2);
            update_alpha(r2, y.data(j).len(), hp)
        })
        .collect();
    let beta = (0..frames)
        .into_par_iter()
        .map(|j| reg.apply(&x[j]).iter().map(|r| update_beta(*r, hp)).collect())
        .collect();
    let gamma = if coupled {
        (1..frames)
            .into_par_iter()
            .map(|j| {
                x[j - 1]
                    .iter()
                    .zip(&x[j])
                    .map(|(u, v)| update_gamma(u - v, hp))
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };
    PrecisionState { alpha, beta, gamma }
}

/// Precision operators of every frame for the given parameters.
pub fn frame_systems(
    p: &PrecisionState,
    ops: &[Arc<dyn LinearOperator>],
    reg: &Arc<RegularizationOp>,
) -> Result<Vec<FrameSystem>> {
    let frames = ops.len();
    (0..frames)
        .map(|j| {
            let (gamma_prev, gamma_next) = if p.is_coupled() {
                (
                    (j > 0).then(|| p.gamma[j - 1].clone()),
                    (j + 1 < frames).then(|| p.gamma[j].clone()),
                )
            } else {
                (None, None)
            };
            FrameSystem::new(
                ops[j].clone(),
                reg.clone(),
                p.alpha[j],
                p.beta[j].clone(),
                gamma_prev,
                gamma_next,
            )
        })
        .collect()
}

/// Back-projection `c F^T y` per frame, with `c` the least-squares fit of
/// `c F F^T y` to `y`. The factor undoes the scale of `F^T F` (for the
/// normalized DFT, `F^T y` alone is the image shrunk by `n1^2`); frames with
/// zero data start at zero.
pub fn backprojection(
    y: &MeasurementSet,
    ops: &[Arc<dyn LinearOperator>],
    n1: usize,
) -> Result<ImageSequence> {
    let frames = (0..y.len())
        .into_par_iter()
        .map(|j| {
            let mut bp = ops[j].apply_adjoint(y.data(j));
            let fb = ops[j].apply(&bp);
            let denom = dot(&fb, &fb);
            let c = if denom > 0.0 { dot(&fb, y.data(j)) / denom } else { 0.0 };
            bp.iter_mut().for_each(|v| *v *= c);
            bp
        })
        .collect();
    ImageSequence::new(n1, frames)
}

/// `L(x) = x^T G x - 2 x^T b`.
pub fn quadratic_objective(sys: &FrameSystem, b: &[f64], x: &[f64]) -> f64 {
    dot(x, &sys.apply(x)) - 2.0 * dot(x, b)
}

/// `steps` steepest-descent iterations with exact line search on `L`.
///
/// The gradient is `2 (G x - b)`; along the residual `r = b - G x` the exact
/// minimizing step is `<r, r> / <r, G r>`.
pub fn x_update(sys: &FrameSystem, b: &[f64], x_init: &[f64], steps: usize) -> Result<Vec<f64>> {
    check_len("right-hand side", sys.dim(), b.len())?;
    check_len("initial image", sys.dim(), x_init.len())?;
    let mut x = x_init.to_vec();
    let mut r = sub(b, &sys.apply(&x));
    for _ in 0..steps {
        if !descent_step(sys, &mut x, &mut r)? {
            break;
        }
    }
    Ok(x)
}

/// One exact-line-search step; returns false at a stationary point.
fn descent_step(sys: &FrameSystem, x: &mut [f64], r: &mut [f64]) -> Result<bool> {
    let rr = dot(r, r);
    if rr == 0.0 {
        return Ok(false);
    }
    let gr = sys.apply(r);
    let curvature = dot(r, &gr);
    if !(curvature > 0.0) {
        return Err(Error::NotPositiveDefinite { curvature });
    }
    let step = rr / curvature;
    axpy(step, r, x);
    axpy(-step, &gr, r);
    Ok(true)
}

/// Steepest descent run until `||b - G x|| <= rel_tol * ||b||`.
pub fn solve_to_tolerance(
    sys: &FrameSystem,
    b: &[f64],
    x_init: &[f64],
    rel_tol: f64,
    max_steps: usize,
) -> Result<Vec<f64>> {
    const REFRESH: usize = 50;
    check_len("right-hand side", sys.dim(), b.len())?;
    check_len("initial image", sys.dim(), x_init.len())?;
    let target = rel_tol * norm2(b);
    let mut x = x_init.to_vec();
    let mut r = sub(b, &sys.apply(&x));
    for step in 0..max_steps {
        if step % REFRESH == 0 {
            r = sub(b, &sys.apply(&x));
        }
        if norm2(&r) <= target || !descent_step(sys, &mut x, &mut r)? {
            return Ok(x);
        }
    }
    let r = sub(b, &sys.apply(&x));
    let residual = norm2(&r) / norm2(b).max(f64::MIN_POSITIVE);
    if norm2(&r) <= target {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            steps: max_steps,
            residual,
        })
    }
}

/// Average absolute and relative frame change. A frame whose previous
/// iterate is zero contributes its absolute change to the relative average.
pub fn change_averages(prev: &[Vec<f64>], curr: &[Vec<f64>]) -> (f64, f64) {
    let frames = prev.len() as f64;
    let (mut abs, mut rel) = (0.0, 0.0);
    for (p, c) in prev.iter().zip(curr) {
        let d = dist2(p, c);
        let np = norm2(p);
        abs += d;
        rel += if np > 0.0 { d / np } else { d };
    }
    (abs / frames, rel / frames)
}

/// True when both the average absolute and the average relative change
/// between the two sequences are below `tol`.
pub fn stopping_check(prev: &ImageSequence, curr: &ImageSequence, tol: f64) -> Result<bool> {
    check_len("frame count", prev.len(), curr.len())?;
    check_len("image width", prev.n1(), curr.n1())?;
    let (abs, rel) = change_averages(prev.frames(), curr.frames());
    Ok(abs < tol && rel < tol)
}
