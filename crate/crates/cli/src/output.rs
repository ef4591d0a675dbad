//! Deterministic result writers.
//!
//! All numeric formatting goes through the shortest-roundtrip float
//! representation, so identical values always produce identical bytes and
//! nothing timestamp-like is ever emitted.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;
use serde_json::json;
use trisim_core::C64;

use crate::CliError;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Output(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text)
        .map_err(|e| CliError::Output(format!("writing {}: {e}", path.display())))?;
    Ok(())
}

/// Row-major complex matrix as `{"dims":[r,c],"re":[..],"im":[..]}`.
pub fn matrix_json(m: &Array2<C64>) -> serde_json::Value {
    let (rows, cols) = m.dim();
    let mut re = Vec::with_capacity(rows * cols);
    let mut im = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            re.push(m[(i, j)].re);
            im.push(m[(i, j)].im);
        }
    }
    json!({ "dims": [rows, cols], "re": re, "im": im })
}

pub fn write_matrix(path: &Path, m: &Array2<C64>) -> Result<(), CliError> {
    write_json(path, &matrix_json(m))
}

/// Comma-separated UTF-8 table with a header row and '.' decimals. Cells
/// are written as given; use [`fmt_f64`] for numbers.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Output(format!("creating {}: {e}", path.display())))?;
    w.write_record(header)
        .map_err(|e| CliError::Output(format!("writing {}: {e}", path.display())))?;
    for row in rows {
        w.write_record(row)
            .map_err(|e| CliError::Output(format!("writing {}: {e}", path.display())))?;
    }
    w.flush()
        .map_err(|e| CliError::Output(format!("flushing {}: {e}", path.display())))?;
    Ok(())
}

pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    format!("{v}")
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Output(format!("creating {}: {e}", dir.display())))
}

/// The eight computational labels in row order, as `b1b2b3` strings.
pub fn basis_labels() -> [String; 8] {
    std::array::from_fn(|b| format!("{}{}{}", (b >> 2) & 1, (b >> 1) & 1, b & 1))
}
