//! Plain-text CSV storage: one line per embedding dimension, one field per
//! class, values printed in shortest round-trip decimal form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::{verify_separation, SeparationMatrix};
use crate::error::{Error, Result};

/// Tolerance a loaded matrix must meet.
pub const LOAD_TOLERANCE: f64 = 1e-6;

pub fn matrix_to_csv(p: &SeparationMatrix) -> String {
    let m = p.entries();
    let mut out = String::with_capacity(m.len() * 20);
    for row in m.row_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn save_matrix(p: &SeparationMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, matrix_to_csv(p)).map_err(|e| Error::io(path, e))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<SeparationMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(c, field)| {
                field.trim().parse::<f64>().map_err(|e| {
                    Error::parse(path, format!("row {}, column {}: {e}", r + 1, c + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::parse(
                    path,
                    format!(
                        "row {} has {} columns, expected {}",
                        r + 1,
                        row.len(),
                        first.len()
                    ),
                ));
            }
        }
        rows.push(row);
    }
    let Some(ncols) = rows.first().map(Vec::len) else {
        return Err(Error::parse(path, "empty matrix file"));
    };
    let nrows = rows.len();
    if nrows + 1 != ncols {
        return Err(Error::parse(
            path,
            format!("{nrows} rows x {ncols} columns is not a (C-1) x C matrix"),
        ));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let p = SeparationMatrix::from_entries(DMatrix::from_row_slice(nrows, ncols, &flat))?;
    let report = verify_separation(&p, LOAD_TOLERANCE);
    if !report.passed {
        return Err(Error::Integrity(format!(
            "{} is not maximally separated at {LOAD_TOLERANCE:e}: norm dev {:e}, dot dev {:e}, sum norm {:e}",
            path.display(),
            report.max_norm_deviation,
            report.max_cosine_deviation,
            report.mean_vector_norm
        )));
    }
    Ok(p)
}
