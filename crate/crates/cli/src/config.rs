//! Versioned JSON run configuration and `--key.path value` overrides.

use std::path::PathBuf;

use jhbl::operators::RegularizationOp;
use jhbl::simulate::{remove_bands, remove_bands_scaled, NoiseSpec, PhantomSpec};
use jhbl::uq::VarianceOptions;
use jhbl::{HyperParams, OperatorDescriptor, SolverConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// Intensity multiplier of the default phantoms.
pub const DEFAULT_INTENSITY: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Fourier,
    Blur,
}

/// Which frequencies frame `j` (1-based) loses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bands {
    None,
    /// `10j+1 <= |k|, |l| <= 10j+10`, clipped to the grid.
    Absolute,
    /// The same schedule with edges scaled by `n1 / 128`.
    Scaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UqConfig {
    /// Skip variance maps entirely when false.
    pub enabled: bool,
    #[serde(flatten)]
    pub options: VarianceOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: u32,
    pub modality: Modality,
    pub bands: Bands,
    /// Kernel width of the blur modality, in units of the image side.
    pub blur_gamma: f64,
    pub tv_order: usize,
    pub anti_inverse_crime: bool,
    pub phantom: PhantomSpec,
    pub noise: NoiseSpec,
    pub solver: SolverConfig,
    pub uq: UqConfig,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn default_for(modality: Modality) -> Self {
        let n1 = 64;
        let frames = 4;
        let (hyper, tv_order, noise) = match modality {
            Modality::Fourier => (HyperParams::fourier_default(), 1, NoiseSpec::constant(2.0, 0)),
            Modality::Blur => (HyperParams::blur_default(), 2, NoiseSpec::increasing(frames, 0)),
        };
        Self {
            version: CONFIG_VERSION,
            modality,
            bands: Bands::Scaled,
            blur_gamma: 2.0 / n1 as f64,
            tv_order,
            anti_inverse_crime: true,
            phantom: PhantomSpec::moving_ellipses(n1, frames, DEFAULT_INTENSITY),
            noise,
            solver: SolverConfig::joint(hyper),
            uq: UqConfig {
                enabled: true,
                options: VarianceOptions::exact(),
            },
            output_dir: PathBuf::from("jhbl-out"),
        }
    }

    pub fn n1(&self) -> usize {
        self.phantom.n1
    }

    pub fn frames(&self) -> usize {
        self.phantom.frames
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::Usage(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.phantom.validate().map_err(usage)?;
        self.solver.validate().map_err(usage)?;
        RegularizationOp::new(self.tv_order, self.n1()).map_err(usage)?;
        self.noise.snr_for(0, self.frames()).map_err(usage)?;
        if self.modality == Modality::Blur && !(self.blur_gamma > 0.0) {
            return Err(CliError::Usage("blur_gamma must be positive".into()));
        }
        Ok(())
    }

    /// Forward operator description of every frame.
    pub fn descriptors(&self) -> Vec<OperatorDescriptor> {
        let n1 = self.n1();
        (1..=self.frames())
            .map(|j| match self.modality {
                Modality::Fourier => OperatorDescriptor::Fourier {
                    n1,
                    removed: match self.bands {
                        Bands::None => vec![],
                        Bands::Absolute => remove_bands(j, n1).frequencies,
                        Bands::Scaled => remove_bands_scaled(j, n1).frequencies,
                    },
                },
                Modality::Blur => OperatorDescriptor::Blur {
                    n1,
                    blur_gamma: self.blur_gamma,
                },
            })
            .collect()
    }

    /// Frames whose band request fell partly outside the grid.
    pub fn clipped_bands(&self) -> Vec<usize> {
        if self.modality != Modality::Fourier {
            return vec![];
        }
        (1..=self.frames())
            .filter(|&j| match self.bands {
                Bands::None => false,
                Bands::Absolute => remove_bands(j, self.n1()).clipped,
                Bands::Scaled => remove_bands_scaled(j, self.n1()).clipped,
            })
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `(key.path, value)` overrides. Values parse as JSON when they
    /// can and are taken as strings otherwise; `mode` is short for
    /// `solver.mode`.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut doc = serde_json::to_value(self).expect("config serializes");
        for (key, raw) in overrides {
            let key = if key == "mode" { "solver.mode" } else { key.as_str() };
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
            set_path(&mut doc, key, value)?;
        }
        serde_json::from_value(doc).map_err(|e| CliError::Usage(format!("invalid override: {e}")))
    }
}

fn usage(e: jhbl::Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let unknown = || CliError::Usage(format!("unknown config key '{key}'"));
        let next = match node {
            Value::Object(map) => map.get_mut(*part).ok_or_else(unknown)?,
            Value::Array(items) => {
                let idx: usize = part.parse().map_err(|_| unknown())?;
                items.get_mut(idx).ok_or_else(unknown)?
            }
            _ => return Err(unknown()),
        };
        if i + 1 == parts.len() {
            *next = value;
            return Ok(());
        }
        node = next;
    }
    Err(CliError::Usage("empty override key".into()))
}

/// Splits `--key value` pairs.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let key = flag
            .strip_prefix("--")
            .filter(|k| !k.is_empty())
            .ok_or_else(|| CliError::Usage(format!("expected --key, got '{flag}'")))?;
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_string(), v.to_string()));
            continue;
        }
        let value = it
            .next()
            .ok_or_else(|| CliError::Usage(format!("missing value for --{key}")))?;
        out.push((key.to_string(), value.clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use jhbl::Mode;

    #[test]
    fn round_trip_is_identity() {
        for m in [Modality::Fourier, Modality::Blur] {
            let cfg = RunConfig::default_for(m);
            assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        }
    }

    #[test]
    fn modality_defaults() {
        let f = RunConfig::default_for(Modality::Fourier);
        assert_eq!(f.solver.hyper, HyperParams::fourier_default());
        assert_eq!(f.tv_order, 1);
        assert_eq!(f.noise.snr, vec![2.0]);
        let b = RunConfig::default_for(Modality::Blur);
        assert_eq!(b.solver.hyper.eta_gamma, 1.0);
        assert_eq!(b.solver.hyper.theta_gamma, 0.1);
        assert_eq!(b.tv_order, 2);
        assert_eq!(b.noise.snr, vec![3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn overrides_follow_dot_paths() {
        let cfg = RunConfig::default_for(Modality::Fourier);
        let args: Vec<String> = ["--mode", "separate", "--solver.hyper.eta_gamma", "4", "--phantom.n1=32", "--output_dir", "x/y"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let out = cfg.with_overrides(&parse_overrides(&args).unwrap()).unwrap();
        assert_eq!(out.solver.mode, Mode::Separate);
        assert_eq!(out.solver.hyper.eta_gamma, 4.0);
        assert_eq!(out.phantom.n1, 32);
        assert_eq!(out.output_dir, PathBuf::from("x/y"));
        let arr = cfg
            .with_overrides(&[("noise.snr.0".into(), "7".into())])
            .unwrap();
        assert_eq!(arr.noise.snr, vec![7.0]);
    }

    #[test]
    fn bad_overrides_are_usage_errors() {
        let cfg = RunConfig::default_for(Modality::Fourier);
        assert!(matches!(cfg.with_overrides(&[("nope".into(), "1".into())]), Err(CliError::Usage(_))));
        assert!(matches!(cfg.with_overrides(&[("tv_order".into(), "\"x\"".into())]), Err(CliError::Usage(_))));
        assert!(parse_overrides(&["value".into()]).is_err());
        assert!(parse_overrides(&["--dangling".into()]).is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::default_for(Modality::Fourier);
        assert!(cfg.validate().is_ok());
        cfg.version = 99;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default_for(Modality::Fourier);
        cfg.noise.snr = vec![1.0, 2.0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn absolute_bands_on_the_default_grid() {
        let mut cfg = RunConfig::default_for(Modality::Fourier);
        cfg.bands = Bands::Absolute;
        let d = cfg.descriptors();
        match &d[0] {
            OperatorDescriptor::Fourier { removed, .. } => {
                assert_eq!(removed.len(), 400);
                assert!(removed.iter().all(|f| (11..=20).contains(&f.k.abs())));
            }
            _ => unreachable!(),
        }
        // j = 3 asks for |k| up to 40 on a grid whose half-width is 32
        assert_eq!(cfg.clipped_bands(), vec![3, 4]);
    }
}
