//! `simulate`, `recover` and `compare` over an output directory:
//!
//! ```text
//! <output_dir>/config.json
//! <output_dir>/truth/frame_<j>.{f64,json,pgm}
//! <output_dir>/data/data_<j>.{f64,json}, descriptors.json, noise.json
//! <output_dir>/<mode>/frame_<j>, variance_<j>, edges_<j>_{vertical,horizontal,combined},
//!                     change_<j>_<j+1> (joint only), precisions.json, history.csv, summary.json
//! <output_dir>/metrics.csv
//! ```
//! Frame indices in file names are 1-based.

use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use jhbl::operators::RegularizationOp;
use jhbl::simulate::{render_phantom, synthesize_from_phantom};
use jhbl::uq::{change_mask, edge_map, posterior_variances};
use jhbl::{solve, MeasurementSet, Mode, OperatorDescriptor};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::io::{ensure_dir, read_image, read_json, read_raw, write_image, write_json, write_text, write_vector};
use crate::metrics::{MethodResult, MetricsTable};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub alpha: Vec<f64>,
    pub dc: Vec<f64>,
    /// Frames whose removed band was clipped to the grid.
    pub clipped_bands: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySummary {
    pub mode: Mode,
    pub iterations: usize,
    pub converged: bool,
    pub warm_start_iterations: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionDump {
    pub alpha: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
}

fn frame_name(prefix: &str, j: usize) -> String {
    format!("{prefix}_{}", j + 1)
}

pub fn mode_dir(cfg: &RunConfig, mode: Mode) -> PathBuf {
    cfg.output_dir.join(match mode {
        Mode::Joint => "joint",
        Mode::Separate => "separate",
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<NoiseRecord, CliError> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    let truth_dir = out.join("truth");
    let data_dir = out.join("data");
    ensure_dir(&truth_dir)?;
    ensure_dir(&data_dir)?;
    write_text(&out.join("config.json"), &(cfg.to_json() + "\n"))?;

    let truth = render_phantom(&cfg.phantom)?;
    for (j, f) in truth.frames().iter().enumerate() {
        write_image(&truth_dir, &frame_name("frame", j), f, cfg.n1())?;
    }
    let descriptors = cfg.descriptors();
    let synth = synthesize_from_phantom(&cfg.phantom, &descriptors, &cfg.noise, cfg.anti_inverse_crime)?;
    for (j, y) in synth.measurements.all_data().iter().enumerate() {
        write_vector(&data_dir, &frame_name("data", j), y)?;
    }
    write_json(&data_dir.join("descriptors.json"), &descriptors)?;
    let record = NoiseRecord {
        alpha: synth.alpha,
        dc: synth.dc,
        clipped_bands: cfg.clipped_bands(),
    };
    write_json(&data_dir.join("noise.json"), &record)?;
    Ok(record)
}

pub fn load_measurements(cfg: &RunConfig) -> Result<MeasurementSet, CliError> {
    let data_dir = cfg.output_dir.join("data");
    let descriptors: Vec<OperatorDescriptor> = read_json(&data_dir.join("descriptors.json"))?;
    let data = (0..descriptors.len())
        .map(|j| read_raw(&data_dir, &frame_name("data", j)).map(|(_, v)| v))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MeasurementSet::with_descriptors(data, descriptors)?)
}

pub fn recover(cfg: &RunConfig) -> Result<RecoverySummary, CliError> {
    cfg.validate()?;
    let y = load_measurements(cfg)?;
    if y.descriptors().iter().any(|d| d.n1() != cfg.n1()) {
        return Err(CliError::Usage("stored data do not match the configured grid".into()));
    }
    let ops = y.operators()?;
    let reg = RegularizationOp::new(cfg.tv_order, cfg.n1())?;

    let start = Instant::now();
    let result = solve(&y, &ops, &reg, &cfg.solver, None)?;
    let variances = if cfg.uq.enabled {
        Some(posterior_variances(&result.posteriors, &cfg.uq.options)?)
    } else {
        None
    };
    let wall_time_s = start.elapsed().as_secs_f64();

    let mode = cfg.solver.mode;
    let dir = mode_dir(cfg, mode);
    ensure_dir(&dir)?;
    let n1 = cfg.n1();
    for (j, f) in result.images.frames().iter().enumerate() {
        write_image(&dir, &frame_name("frame", j), f, n1)?;
        let edges = edge_map(&result.precisions.beta[j], &reg)?;
        for (label, map) in [("vertical", &edges.vertical), ("horizontal", &edges.horizontal), ("combined", &edges.combined)] {
            write_image(&dir, &format!("edges_{}_{label}", j + 1), map, n1)?;
        }
        if let Some(v) = &variances {
            write_image(&dir, &frame_name("variance", j), &v[j].values, n1)?;
        }
    }
    for (j, g) in result.precisions.gamma.iter().enumerate() {
        write_image(&dir, &format!("change_{}_{}", j + 1, j + 2), &change_mask(g)?, n1)?;
    }
    write_json(
        &dir.join("precisions.json"),
        &PrecisionDump {
            alpha: result.precisions.alpha.clone(),
            beta: result.precisions.beta.clone(),
            gamma: result.precisions.gamma.clone(),
        },
    )?;
    let mut history = String::from("iteration,abs_change,rel_change,log_joint\n");
    for r in &result.history {
        writeln!(history, "{},{:.11e},{:.11e},{:.11e}", r.iteration, r.abs_change, r.rel_change, r.log_joint)
            .expect("write to string");
    }
    write_text(&dir.join("history.csv"), &history)?;
    let summary = RecoverySummary {
        mode,
        iterations: result.iterations,
        converged: result.converged,
        warm_start_iterations: result.warm_start_iterations,
        wall_time_s,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn read_frames(dir: &Path, frames: usize) -> Result<Vec<Vec<f64>>, CliError> {
    (0..frames)
        .map(|j| read_image(dir, &frame_name("frame", j)).map(|(_, v)| v))
        .collect()
}

fn count_frames(dir: &Path) -> usize {
    (0..).take_while(|j| dir.join(format!("{}.f64", frame_name("frame", *j))).exists()).count()
}

/// Compares every `(method, dir)` against the frames in `truth_dir`.
pub fn compare_dirs(truth_dir: &Path, results: &[(String, PathBuf)]) -> Result<MetricsTable, CliError> {
    let frames = count_frames(truth_dir);
    if frames == 0 {
        return Err(CliError::Io(format!("{}: no ground-truth frames", truth_dir.display())));
    }
    let truth = read_frames(truth_dir, frames)?;
    let mut loaded = Vec::new();
    for (method, dir) in results {
        let found = count_frames(dir);
        if found != frames {
            return Err(CliError::Usage(format!("{method}: {found} frames against {frames} truth frames")));
        }
        let summary: RecoverySummary = read_json(&dir.join("summary.json"))?;
        loaded.push((method.as_str(), read_frames(dir, frames)?, summary));
    }
    for (_, f, _) in &loaded {
        if f.iter().zip(&truth).any(|(a, b)| a.len() != b.len()) {
            return Err(CliError::Usage("image sizes differ from the ground truth".into()));
        }
    }
    let methods: Vec<MethodResult<'_>> = loaded
        .iter()
        .map(|(m, f, s)| MethodResult {
            method: m,
            frames: f,
            iterations: s.iterations,
            wall_time_s: s.wall_time_s,
        })
        .collect();
    MetricsTable::build(&truth, &methods)
}

/// Compares whichever of the separate and joint results exist and writes
/// `metrics.csv`.
pub fn compare(cfg: &RunConfig) -> Result<MetricsTable, CliError> {
    let results: Vec<(String, PathBuf)> = [Mode::Separate, Mode::Joint]
        .into_iter()
        .map(|m| (m, mode_dir(cfg, m)))
        .filter(|(_, d)| d.join("summary.json").exists())
        .map(|(m, d)| (serde_json::to_value(m).expect("mode").as_str().expect("str").to_string(), d))
        .collect();
    if results.is_empty() {
        return Err(CliError::Io(format!("{}: no recovery results", cfg.output_dir.display())));
    }
    let table = compare_dirs(&cfg.output_dir.join("truth"), &results)?;
    write_text(&cfg.output_dir.join("metrics.csv"), &table.to_csv())?;
    Ok(table)
}
