//! Synthetic ground truth and measurement synthesis.
//!
//! Phantoms are unions of ellipses (and static rectangles) on `[0,1]^2`,
//! rasterized by testing pixel midpoints. Coordinates are `(s, t)` with `s`
//! running down the rows and `t` across the columns. Moving ellipses rotate
//! by a fixed angle per frame and translate by a fixed number of
//! coarse-grid pixels per frame.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{ImageSequence, MeasurementSet};
use crate::operators::fourier::half_width;
use crate::operators::{
    FourierSamplingOp, Frequency, GaussianBlurOp, LinearOperator, OperatorDescriptor,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    /// `(s, t)` centre in the unit square.
    pub center: [f64; 2],
    /// Semi-axes along the rotated `s` and `t` directions.
    pub semi_axes: [f64; 2],
    /// Initial rotation in radians.
    #[serde(default)]
    pub angle: f64,
    pub intensity: f64,
    /// Radians per frame.
    #[serde(default)]
    pub rotation_rate: f64,
    /// Coarse-grid pixels per frame along `(s, t)`.
    #[serde(default)]
    pub translation: [f64; 2],
}

impl Ellipse {
    pub fn fixed(center: [f64; 2], semi_axes: [f64; 2], angle: f64, intensity: f64) -> Self {
        Self {
            center,
            semi_axes,
            angle,
            intensity,
            rotation_rate: 0.0,
            translation: [0.0, 0.0],
        }
    }

    pub fn is_static(&self) -> bool {
        self.rotation_rate == 0.0 && self.translation == [0.0, 0.0]
    }

    /// Centre and angle at frame `j` (0-based) on a grid of width `n1`.
    fn pose(&self, j: usize, n1: usize) -> ([f64; 2], f64) {
        let step = j as f64 / n1 as f64;
        (
            [
                self.center[0] + step * self.translation[0],
                self.center[1] + step * self.translation[1],
            ],
            self.angle + j as f64 * self.rotation_rate,
        )
    }

    fn contains_at(&self, center: [f64; 2], angle: f64, s: f64, t: f64) -> bool {
        let (ds, dt) = (s - center[0], t - center[1]);
        let (sin, cos) = angle.sin_cos();
        let u = ds * cos + dt * sin;
        let v = -ds * sin + dt * cos;
        (u / self.semi_axes[0]).powi(2) + (v / self.semi_axes[1]).powi(2) <= 1.0
    }

    fn half_extent(&self, angle: f64) -> [f64; 2] {
        let (sin, cos) = angle.sin_cos();
        let [a, b] = self.semi_axes;
        [
            ((a * cos).powi(2) + (b * sin).powi(2)).sqrt(),
            ((a * sin).powi(2) + (b * cos).powi(2)).sqrt(),
        ]
    }
}

/// Static axis-aligned rectangle `[min, max]` in `(s, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum StaticShape {
    Ellipse(Ellipse),
    Rectangle(Rectangle),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub n1: usize,
    pub frames: usize,
    #[serde(default)]
    pub ellipses: Vec<Ellipse>,
    #[serde(default)]
    pub background: Vec<StaticShape>,
}

impl PhantomSpec {
    /// Head-like phantom: a static outer ellipse with a static inner feature,
    /// one ellipse rotating on the left and one moving down on the right.
    /// Intensities are multiplied by `scale`.
    pub fn moving_ellipses(n1: usize, frames: usize, scale: f64) -> Self {
        Self {
            n1,
            frames,
            ellipses: vec![
                Ellipse {
                    rotation_rate: 0.25,
                    ..Ellipse::fixed([0.56, 0.32], [0.15, 0.06], 0.0, 1.5 * scale)
                },
                Ellipse {
                    translation: [1.0, 0.0],
                    ..Ellipse::fixed([0.42, 0.68], [0.085, 0.085], 0.0, 2.0 * scale)
                },
            ],
            background: vec![
                StaticShape::Ellipse(Ellipse::fixed([0.5, 0.5], [0.43, 0.37], 0.0, scale)),
                StaticShape::Ellipse(Ellipse::fixed([0.24, 0.5], [0.07, 0.16], 0.0, 0.5 * scale)),
                StaticShape::Rectangle(Rectangle {
                    min: [0.7, 0.42],
                    max: [0.82, 0.58],
                    intensity: 0.75 * scale,
                }),
            ],
        }
    }

    /// Pixel-quantized variant: only axis-aligned ellipses translating by
    /// whole pixels, so consecutive frames differ by exact pixel shifts.
    pub fn translating_ellipses(n1: usize, frames: usize, scale: f64) -> Self {
        Self {
            n1,
            frames,
            ellipses: vec![
                Ellipse {
                    translation: [0.0, 1.0],
                    ..Ellipse::fixed([0.6, 0.3], [0.12, 0.07], 0.0, 1.5 * scale)
                },
                Ellipse {
                    translation: [1.0, 0.0],
                    ..Ellipse::fixed([0.4, 0.68], [0.085, 0.085], 0.0, 2.0 * scale)
                },
            ],
            background: vec![
                StaticShape::Ellipse(Ellipse::fixed([0.5, 0.5], [0.43, 0.37], 0.0, scale)),
                StaticShape::Rectangle(Rectangle {
                    min: [0.72, 0.42],
                    max: [0.82, 0.58],
                    intensity: 0.75 * scale,
                }),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.frames == 0 {
            return Err(Error::InvalidArgument("phantom needs a positive width and frame count".into()));
        }
        let inside = |c: [f64; 2], ext: [f64; 2]| {
            (0..2).all(|i| c[i] - ext[i] >= 0.0 && c[i] + ext[i] <= 1.0)
        };
        for (i, e) in self.ellipses.iter().enumerate() {
            if e.semi_axes.iter().any(|a| !(*a > 0.0)) {
                return Err(Error::InvalidArgument(format!("ellipse {i} needs positive semi-axes")));
            }
            for j in 0..self.frames {
                let (c, angle) = e.pose(j, self.n1);
                if !inside(c, e.half_extent(angle)) {
                    return Err(Error::InvalidArgument(format!(
                        "ellipse {i} leaves the unit square at frame {j}"
                    )));
                }
            }
        }
        for (i, shape) in self.background.iter().enumerate() {
            let ok = match shape {
                StaticShape::Ellipse(e) => {
                    e.semi_axes.iter().all(|a| *a > 0.0) && inside(e.center, e.half_extent(e.angle))
                }
                StaticShape::Rectangle(r) => {
                    (0..2).all(|k| 0.0 <= r.min[k] && r.min[k] <= r.max[k] && r.max[k] <= 1.0)
                }
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "background shape {i} is degenerate or leaves the unit square"
                )));
            }
        }
        Ok(())
    }

    /// Per-frame pixels where the moving shapes cover the midpoint in frame
    /// `j` or `j + 1`: the only pixels allowed to change between them.
    pub fn motion_support(&self, j: usize) -> Vec<bool> {
        let n = self.n1;
        let mut mask = vec![false; n * n];
        for e in self.ellipses.iter().filter(|e| !e.is_static()) {
            for frame in [j, j + 1] {
                let (c, angle) = e.pose(frame, n);
                for b in 0..n {
                    for a in 0..n {
                        let (s, t) = midpoint(a, b, n);
                        if e.contains_at(c, angle, s, t) {
                            mask[a + n * b] = true;
                        }
                    }
                }
            }
        }
        mask
    }
}

fn midpoint(a: usize, b: usize, n: usize) -> (f64, f64) {
    ((a as f64 + 0.5) / n as f64, (b as f64 + 0.5) / n as f64)
}

/// Rasterizes the phantom on its own grid.
pub fn render_phantom(spec: &PhantomSpec) -> Result<ImageSequence> {
    render_phantom_at(spec, spec.n1)
}

/// Rasterizes on an `n x n` grid; motion stays in units of the phantom's own grid.
pub fn render_phantom_at(spec: &PhantomSpec, n: usize) -> Result<ImageSequence> {
    spec.validate()?;
    let frames = (0..spec.frames)
        .into_par_iter()
        .map(|j| {
            let mut img = vec![0.0; n * n];
            for b in 0..n {
                for a in 0..n {
                    let (s, t) = midpoint(a, b, n);
                    let mut v = 0.0;
                    for shape in &spec.background {
                        v += match shape {
                            StaticShape::Ellipse(e) if e.contains_at(e.center, e.angle, s, t) => {
                                e.intensity
                            }
                            StaticShape::Rectangle(r)
                                if (r.min[0]..=r.max[0]).contains(&s)
                                    && (r.min[1]..=r.max[1]).contains(&t) =>
                            {
                                r.intensity
                            }
                            _ => 0.0,
                        };
                    }
                    for e in &spec.ellipses {
                        let (c, angle) = e.pose(j, spec.n1);
                        if e.contains_at(c, angle, s, t) {
                            v += e.intensity;
                        }
                    }
                    img[a + n * b] = v;
                }
            }
            img
        })
        .collect();
    ImageSequence::new(n, frames)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Target SNR per frame; a single value applies to every frame.
    pub snr: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub dc_reference: DcReference,
}

/// Which DC value calibrates Fourier noise. Blurred data always use the
/// image mean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcReference {
    /// The zero-frequency sample of the unnormalized DFT, `N * mean`, with
    /// the noise scaled back to the averaged samples. Fourier and blurred
    /// data at the same SNR then carry the same per-pixel noise level.
    #[default]
    Unnormalized,
    /// The averaged zero-frequency sample, i.e. the image mean.
    Mean,
}

impl NoiseSpec {
    pub fn constant(snr: f64, seed: u64) -> Self {
        Self {
            snr: vec![snr],
            seed,
            dc_reference: DcReference::default(),
        }
    }

    /// `SNR = 2 + j` for `j = 1..=frames`.
    pub fn increasing(frames: usize, seed: u64) -> Self {
        Self {
            snr: (1..=frames).map(|j| 2.0 + j as f64).collect(),
            seed,
            dc_reference: DcReference::default(),
        }
    }

    pub fn snr_for(&self, frame: usize, frames: usize) -> Result<f64> {
        match self.snr.len() {
            1 => Ok(self.snr[0]),
            n if n == frames => Ok(self.snr[frame]),
            n => Err(Error::Dimension {
                context: "SNR list",
                expected: frames,
                actual: n,
            }),
        }
    }
}

/// Noise precision for a target `SNR = 10 log10(alpha * dc)`.
pub fn alpha_from_snr(snr: f64, dc_value: f64) -> Result<f64> {
    if !(dc_value > 0.0) {
        return Err(Error::Domain(format!("DC value must be positive, got {dc_value}")));
    }
    Ok(10f64.powf(snr / 10.0) / dc_value)
}

/// Precision of the noise added to each stacked data component of a frame
/// with the given mean intensity.
pub fn noise_precision(snr: f64, mean: f64, descriptor: &OperatorDescriptor, reference: DcReference) -> Result<f64> {
    let alpha = alpha_from_snr(snr, mean)?;
    Ok(match (descriptor, reference) {
        (OperatorDescriptor::Fourier { n1, .. }, DcReference::Unnormalized) => (n1 * n1) as f64 * alpha,
        _ => alpha,
    })
}

/// Noisy data plus the noise precisions used to generate it.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub measurements: MeasurementSet,
    pub alpha: Vec<f64>,
    pub dc: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Independent per-frame noise stream.
fn frame_rng(seed: u64, frame: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame as u64);
    rng
}

fn add_noise(clean: &mut [f64], alpha: f64, rng: &mut ChaCha8Rng) {
    let sigma = alpha.recip().sqrt();
    for v in clean {
        let z: f64 = StandardNormal.sample(rng);
        *v += sigma * z;
    }
}

/// `y = F x + e` on the reconstruction grid (the inverse-crime setting).
pub fn synthesize_measurements(
    x: &ImageSequence,
    descriptors: &[OperatorDescriptor],
    noise: &NoiseSpec,
) -> Result<SyntheticData> {
    check_len("operator descriptors", x.len(), descriptors.len())?;
    let ops: Vec<_> = descriptors.iter().map(|d| d.build()).collect::<Result<_>>()?;
    let per_frame: Vec<(Vec<f64>, f64, f64)> = (0..x.len())
        .into_par_iter()
        .map(|j| {
            check_len("forward operator input", ops[j].in_dim(), x.frame(j).len())?;
            let dc = mean(x.frame(j));
            let alpha = noise_precision(noise.snr_for(j, x.len())?, dc, &descriptors[j], noise.dc_reference)?;
            let mut y = ops[j].apply(x.frame(j));
            add_noise(&mut y, alpha, &mut frame_rng(noise.seed, j));
            Ok((y, alpha, dc))
        })
        .collect::<Result<_>>()?;
    collect(per_frame, descriptors)
}

fn collect(per_frame: Vec<(Vec<f64>, f64, f64)>, descriptors: &[OperatorDescriptor]) -> Result<SyntheticData> {
    let mut data = Vec::with_capacity(per_frame.len());
    let mut alpha = Vec::with_capacity(per_frame.len());
    let mut dc = Vec::with_capacity(per_frame.len());
    for (y, a, d) in per_frame {
        data.push(y);
        alpha.push(a);
        dc.push(d);
    }
    Ok(SyntheticData {
        measurements: MeasurementSet::with_descriptors(data, descriptors.to_vec())?,
        alpha,
        dc,
    })
}

/// Renders the phantom and synthesizes noisy data.
///
/// With `anti_inverse_crime`, frames are rendered on a grid twice as fine,
/// transformed with the correspondingly finer operator, and restricted to the
/// coarse measurement set: for Fourier data the fine DFT is sampled at the
/// coarse frequencies; for blurred data the fine output is averaged over
/// 2x2 blocks. The SNR calibration uses the mean of the image that produced
/// the data.
pub fn synthesize_from_phantom(
    spec: &PhantomSpec,
    descriptors: &[OperatorDescriptor],
    noise: &NoiseSpec,
    anti_inverse_crime: bool,
) -> Result<SyntheticData> {
    if !anti_inverse_crime {
        return synthesize_measurements(&render_phantom(spec)?, descriptors, noise);
    }
    check_len("operator descriptors", spec.frames, descriptors.len())?;
    let fine_n = 2 * spec.n1;
    let fine = render_phantom_at(spec, fine_n)?;
    let per_frame: Vec<(Vec<f64>, f64, f64)> = (0..spec.frames)
        .into_par_iter()
        .map(|j| {
            let d = &descriptors[j];
            check_len("descriptor grid width", spec.n1, d.n1())?;
            let dc = mean(fine.frame(j));
            let alpha = noise_precision(noise.snr_for(j, spec.frames)?, dc, d, noise.dc_reference)?;
            let mut y = fine_measurement(d, fine.frame(j), fine_n)?;
            add_noise(&mut y, alpha, &mut frame_rng(noise.seed, j));
            Ok((y, alpha, dc))
        })
        .collect::<Result<_>>()?;
    collect(per_frame, descriptors)
}

fn fine_measurement(d: &OperatorDescriptor, fine: &[f64], fine_n: usize) -> Result<Vec<f64>> {
    match d {
        OperatorDescriptor::Fourier { n1, removed } => {
            let coarse = FourierSamplingOp::new(*n1, removed.iter().copied())?;
            let fine_op = FourierSamplingOp::full(fine_n)?;
            let fy = fine_op.apply(fine);
            let index: HashMap<Frequency, usize> = fine_op
                .retained()
                .iter()
                .enumerate()
                .map(|(i, f)| (*f, i))
                .collect();
            let fr = fine_op.retained_count();
            let r = coarse.retained_count();
            let mut out = vec![0.0; 2 * r];
            // The coarse transform places pixel `a` at `a / n1`; the fine pixels
            // it spans sit a quarter coarse pixel later on average.
            let shift = std::f64::consts::PI / (2.0 * *n1 as f64);
            for (i, f) in coarse.retained().iter().enumerate() {
                let src = index[f];
                let (sin, cos) = (shift * (f.k + f.l) as f64).sin_cos();
                let (re, im) = (fy[src], fy[fr + src]);
                out[i] = re * cos - im * sin;
                out[r + i] = re * sin + im * cos;
            }
            Ok(out)
        }
        OperatorDescriptor::Blur { n1, blur_gamma } => {
            let fy = GaussianBlurOp::new(fine_n, *blur_gamma)?.apply(fine);
            let mut out = vec![0.0; n1 * n1];
            for b in 0..*n1 {
                for a in 0..*n1 {
                    let mut acc = 0.0;
                    for (da, db) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                        acc += fy[(2 * a + da) + fine_n * (2 * b + db)];
                    }
                    out[a + n1 * b] = acc / 4.0;
                }
            }
            Ok(out)
        }
    }
}

/// `log10(||x - truth|| / ||truth||)`, floored at -16.
pub fn relative_log_error(truth: &[f64], recovered: &[f64]) -> Result<f64> {
    check_len("recovered image", truth.len(), recovered.len())?;
    let denom = crate::linalg::norm2(truth);
    if !(denom > 0.0) {
        return Err(Error::Domain("relative error of a zero image".into()));
    }
    Ok((crate::linalg::dist2(truth, recovered) / denom).log10().max(-16.0))
}

/// A symmetric band of removed frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Band {
    pub frequencies: Vec<Frequency>,
    /// Set when part of the requested band fell outside the sampled square.
    pub clipped: bool,
}

/// `K_j = {(k, l) : 10j+1 <= |k|, |l| <= 10j+10}` on an `n1` grid.
pub fn remove_bands(j: usize, n1: usize) -> Band {
    band(10 * j as i64 + 1, 10 * j as i64 + 10, n1)
}

/// The same schedule with band edges scaled by `n1 / 128`:
/// `floor(s * 10j) + 1 <= |k|, |l| <= floor(s * (10j + 10))`. Equal to
/// [`remove_bands`] at `n1 = 128`.
pub fn remove_bands_scaled(j: usize, n1: usize) -> Band {
    let s = n1 as f64 / 128.0;
    let lo = (s * 10.0 * j as f64).floor() as i64 + 1;
    let hi = (s * (10.0 * j as f64 + 10.0)).floor() as i64;
    band(lo, hi, n1)
}

/// All `(k, l)` with `lo <= |k|, |l| <= hi`, restricted to `|k|, |l| < c` so
/// the set stays closed under negation.
fn band(lo: i64, hi: i64, n1: usize) -> Band {
    let limit = half_width(n1) - 1;
    let keep_hi = hi.min(limit);
    let clipped = hi > limit;
    let mut frequencies = Vec::new();
    if lo <= keep_hi {
        let values: Vec<i64> = (lo..=keep_hi).flat_map(|v| [-v, v]).collect();
        for &k in &values {
            for &l in &values {
                frequencies.push(Frequency::new(k, l));
            }
        }
    }
    frequencies.sort();
    Band { frequencies, clipped }
}
