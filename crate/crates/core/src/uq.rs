//! Pixelwise posterior variances and display maps derived from the learned
//! precisions.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::GaussianPosterior;
use crate::operators::RegularizationOp;
use crate::solver::solve_to_tolerance;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMethod {
    #[default]
    Exact,
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VarianceOptions {
    pub method: VarianceMethod,
    pub probes: usize,
    pub seed: u64,
    /// Largest `N` for which the dense inverse is formed.
    pub exact_cap: usize,
    /// Relative residual target of each probe solve.
    pub solve_tol: f64,
    pub max_solve_steps: usize,
}

impl Default for VarianceOptions {
    fn default() -> Self {
        Self {
            method: VarianceMethod::Exact,
            probes: 500,
            seed: 0,
            exact_cap: 4096,
            solve_tol: 1e-8,
            max_solve_steps: 500_000,
        }
    }
}

impl VarianceOptions {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn stochastic(probes: usize, seed: u64) -> Self {
        Self {
            method: VarianceMethod::Stochastic,
            probes,
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceMap {
    pub values: Vec<f64>,
}

impl VarianceMap {
    pub fn mean_over(&self, mask: &[bool]) -> Option<f64> {
        let (sum, count) = self
            .values
            .iter()
            .zip(mask)
            .filter(|(_, m)| **m)
            .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
        (count > 0).then(|| sum / count as f64)
    }
}

/// Diagonal of `G^{-1}` for one frame.
pub fn posterior_variance(post: &GaussianPosterior, opts: &VarianceOptions) -> Result<VarianceMap> {
    frame_variance(post, opts, 0)
}

/// Variances of every frame. Frame `j` draws its probes from its own
/// streams, so the result does not depend on scheduling.
pub fn posterior_variances(posts: &[GaussianPosterior], opts: &VarianceOptions) -> Result<Vec<VarianceMap>> {
    posts
        .par_iter()
        .enumerate()
        .map(|(j, p)| frame_variance(p, opts, j))
        .collect()
}

fn frame_variance(post: &GaussianPosterior, opts: &VarianceOptions, frame: usize) -> Result<VarianceMap> {
    let values = match opts.method {
        VarianceMethod::Exact => exact_diagonal(post, opts.exact_cap)?,
        VarianceMethod::Stochastic => stochastic_diagonal(post, opts, frame)?,
    };
    Ok(VarianceMap { values })
}

fn exact_diagonal(post: &GaussianPosterior, cap: usize) -> Result<Vec<f64>> {
    let n = post.dim();
    if n > cap {
        return Err(Error::TooLarge { n, cap });
    }
    let g = DMatrix::from_row_slice(n, n, &post.precision.assemble_dense());
    let min_diag = g.diagonal().min();
    let chol = g.cholesky().ok_or(Error::NotPositiveDefinite { curvature: min_diag })?;
    Ok(chol.inverse().diagonal().iter().copied().collect())
}

/// Probe `p` of frame `frame`: its own ChaCha stream.
fn probe(seed: u64, frame: usize, p: usize, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((frame as u64) << 32) | p as u64);
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// `diag(G^{-1}) ~ (1/P) sum_p z_p * G^{-1} z_p` with Rademacher `z_p`.
/// Estimates are clipped at zero.
fn stochastic_diagonal(post: &GaussianPosterior, opts: &VarianceOptions, frame: usize) -> Result<Vec<f64>> {
    if opts.probes == 0 {
        return Err(Error::InvalidArgument("stochastic variance needs at least one probe".into()));
    }
    let n = post.dim();
    let sys = &post.precision;
    let zero = vec![0.0; n];
    let terms: Vec<Vec<f64>> = (0..opts.probes)
        .into_par_iter()
        .map(|p| {
            let z = probe(opts.seed, frame, p, n);
            let u = solve_to_tolerance(sys, &z, &zero, opts.solve_tol, opts.max_solve_steps)?;
            Ok(z.iter().zip(&u).map(|(a, b)| a * b).collect())
        })
        .collect::<Result<_>>()?;
    let mut acc = vec![0.0; n];
    for t in &terms {
        for (a, v) in acc.iter_mut().zip(t) {
            *a += v;
        }
    }
    let scale = 1.0 / opts.probes as f64;
    Ok(acc.into_iter().map(|v| (v * scale).max(0.0)).collect())
}

/// Directional edge indicators on the pixel grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMap {
    /// From the first block (differences down the columns).
    pub vertical: Vec<f64>,
    /// From the second block (differences across the rows).
    pub horizontal: Vec<f64>,
    pub combined: Vec<f64>,
}

/// Maps `1 / (1 + beta_k)` onto pixels. A stencil starting at index `r`
/// along its direction covers pixels `r .. r + order - 1`; pixels covered
/// more than once take the average and uncovered pixels are zero.
pub fn edge_map(beta: &[f64], reg: &RegularizationOp) -> Result<EdgeMap> {
    check_len("intra-image precisions", reg.rows(), beta.len())?;
    if let Some(b) = beta.iter().find(|b| !(**b >= 0.0)) {
        return Err(Error::Domain(format!("precisions must be nonnegative, got {b}")));
    }
    let n = reg.n1();
    let o = reg.order();
    let m = n - o;
    let (first, second) = beta.split_at(reg.block_len());

    let mut vertical = vec![0.0; n * n];
    let mut count = vec![0usize; n * n];
    for b in 0..n {
        for r in 0..m {
            let v = 1.0 / (1.0 + first[r + m * b]);
            for a in r..r + o {
                vertical[a + n * b] += v;
                count[a + n * b] += 1;
            }
        }
    }
    average(&mut vertical, &count);

    let mut horizontal = vec![0.0; n * n];
    let mut count = vec![0usize; n * n];
    for r in 0..m {
        for a in 0..n {
            let v = 1.0 / (1.0 + second[a + n * r]);
            for b in r..r + o {
                horizontal[a + n * b] += v;
                count[a + n * b] += 1;
            }
        }
    }
    average(&mut horizontal, &count);

    let combined = vertical.iter().zip(&horizontal).map(|(v, h)| 0.5 * (v + h)).collect();
    Ok(EdgeMap {
        vertical,
        horizontal,
        combined,
    })
}

fn average(v: &mut [f64], count: &[usize]) {
    for (x, c) in v.iter_mut().zip(count) {
        if *c > 1 {
            *x /= *c as f64;
        }
    }
}

/// `1 / (1 + gamma_n)`: near 1 where consecutive frames differ.
pub fn change_mask(gamma: &[f64]) -> Result<Vec<f64>> {
    gamma
        .iter()
        .map(|g| {
            if *g >= 0.0 {
                Ok(1.0 / (1.0 + g))
            } else {
                Err(Error::Domain(format!("coupling precisions must be nonnegative, got {g}")))
            }
        })
        .collect()
}
