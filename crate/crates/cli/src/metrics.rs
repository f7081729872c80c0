//! Relative log-error tables.

use std::fmt::Write;

use jhbl::simulate::relative_log_error;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub method: String,
    /// 1-based frame index; `None` for the average row.
    pub frame: Option<usize>,
    pub e_log: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsTable {
    pub rows: Vec<MetricRow>,
}

/// Results of one method, frame by frame.
pub struct MethodResult<'a> {
    pub method: &'a str,
    pub frames: &'a [Vec<f64>],
    pub iterations: usize,
    pub wall_time_s: f64,
}

impl MetricsTable {
    pub fn build(truth: &[Vec<f64>], methods: &[MethodResult<'_>]) -> Result<Self, CliError> {
        let mut rows = Vec::new();
        for m in methods {
            if m.frames.len() != truth.len() {
                return Err(CliError::Usage(format!(
                    "{}: {} frames against {} truth frames",
                    m.method,
                    m.frames.len(),
                    truth.len()
                )));
            }
            let mut sum = 0.0;
            for (j, (t, x)) in truth.iter().zip(m.frames).enumerate() {
                let e_log = relative_log_error(t, x).map_err(|e| CliError::Usage(format!("{}: {e}", m.method)))?;
                sum += e_log;
                rows.push(MetricRow {
                    method: m.method.into(),
                    frame: Some(j + 1),
                    e_log,
                    iterations: m.iterations,
                    wall_time_s: m.wall_time_s,
                });
            }
            rows.push(MetricRow {
                method: m.method.into(),
                frame: None,
                e_log: sum / truth.len() as f64,
                iterations: m.iterations,
                wall_time_s: m.wall_time_s,
            });
        }
        Ok(Self { rows })
    }

    pub fn average(&self, method: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.frame.is_none())
            .map(|r| r.e_log)
    }

    /// Fixed 12-significant-digit CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,frame,e_log,iterations,wall_time_s\n");
        for r in &self.rows {
            let frame = r.frame.map_or_else(|| "average".to_string(), |j| j.to_string());
            writeln!(out, "{},{},{:.11e},{},{:.11e}", r.method, frame, r.e_log, r.iterations, r.wall_time_s)
                .expect("write to string");
        }
        out
    }
}
