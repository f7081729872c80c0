//! Array files: raw little-endian `f64` with a JSON sidecar, plus 16-bit
//! PGM previews of images.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawHeader {
    pub shape: Vec<usize>,
    /// `column_major` for images (pixel `(a, b)` at `a + n1 * b`), `linear`
    /// for plain vectors.
    pub order: String,
    pub dtype: String,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    write_text(path, &(text + "\n"))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| io_err(path, e))
}

fn raw_paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{name}.f64")), dir.join(format!("{name}.json")))
}

pub fn write_raw(dir: &Path, name: &str, values: &[f64], shape: Vec<usize>, order: &str) -> Result<(), CliError> {
    debug_assert_eq!(shape.iter().product::<usize>(), values.len());
    let (bin, head) = raw_paths(dir, name);
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&bin, bytes).map_err(|e| io_err(&bin, e))?;
    write_json(
        &head,
        &RawHeader {
            shape,
            order: order.into(),
            dtype: "f64_le".into(),
        },
    )
}

pub fn read_raw(dir: &Path, name: &str) -> Result<(RawHeader, Vec<f64>), CliError> {
    let (bin, head) = raw_paths(dir, name);
    let header: RawHeader = read_json(&head)?;
    let bytes = fs::read(&bin).map_err(|e| io_err(&bin, e))?;
    let expected = header.shape.iter().product::<usize>() * 8;
    if bytes.len() != expected || header.dtype != "f64_le" {
        return Err(io_err(&bin, format!("expected {expected} bytes of f64_le, found {}", bytes.len())));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, values))
}

pub fn write_vector(dir: &Path, name: &str, values: &[f64]) -> Result<(), CliError> {
    write_raw(dir, name, values, vec![values.len()], "linear")
}

/// Raw image plus a PGM preview.
pub fn write_image(dir: &Path, name: &str, img: &[f64], n1: usize) -> Result<(), CliError> {
    write_raw(dir, name, img, vec![n1, n1], "column_major")?;
    let pgm = dir.join(format!("{name}.pgm"));
    fs::write(&pgm, pgm_bytes(img, n1)).map_err(|e| io_err(&pgm, e))
}

pub fn read_image(dir: &Path, name: &str) -> Result<(usize, Vec<f64>), CliError> {
    let (h, v) = read_raw(dir, name)?;
    match h.shape.as_slice() {
        [a, b] if a == b && h.order == "column_major" => Ok((*a, v)),
        _ => Err(CliError::Io(format!("{name}: not a square column-major image"))),
    }
}

/// Binary P5 with maxval 65535; the value range maps linearly onto
/// `0..=65535` (a constant image is black). Row `a`, column `b` shows pixel
/// `(a, b)`.
pub fn pgm_bytes(img: &[f64], n1: usize) -> Vec<u8> {
    let lo = img.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = img.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = format!("P5\n{n1} {n1}\n65535\n").into_bytes();
    for a in 0..n1 {
        for b in 0..n1 {
            let v = img[a + n1 * b];
            let level = if span > 0.0 && span.is_finite() {
                ((v - lo) / span * 65535.0).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            };
            out.extend_from_slice(&level.to_be_bytes());
        }
    }
    out
}
