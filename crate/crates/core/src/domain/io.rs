//! Field files.
//!
//! CSV: one row per cell of Ω ∪ collar, `i,value` in 1D and `i,j,value` in
//! 2D, with indices relative to Ω (collar cells have indices < 0 or ≥ shape).
//!
//! Raw: a 16-byte header (`TVF0`, dimension, full shape x, full shape y as
//! little-endian u32) followed by the cell values as little-endian f64 in
//! storage order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Grid, ScalarField};
use crate::error::{Error, Result};

pub const RAW_MAGIC: &[u8; 4] = b"TVF0";

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

pub fn write_csv(path: &Path, grid: &Grid, field: &ScalarField) -> Result<()> {
    fs::write(path, csv_string(grid, field)).map_err(|e| io_err(path, e))
}

pub(crate) fn csv_string(grid: &Grid, field: &ScalarField) -> String {
    let mut out = String::new();
    out.push_str(if grid.dimension() == 2 { "i,j,value\n" } else { "i,value\n" });
    for (k, v) in field.values().iter().enumerate() {
        let [i, j] = grid.relative_coords(k);
        if grid.dimension() == 2 {
            let _ = writeln!(out, "{i},{j},{v:e}");
        } else {
            let _ = writeln!(out, "{i},{v:e}");
        }
    }
    out
}

pub fn read_csv(path: &Path, grid: &Grid) -> Result<ScalarField> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| format_err(path, "empty file"))?;
    let columns = grid.dimension() + 1;
    if header.split(',').count() != columns {
        return Err(format_err(
            path,
            format!("expected {columns} columns in header `{header}`"),
        ));
    }
    let mut values = vec![f64::NAN; grid.cell_count()];
    let mut seen = 0usize;
    let c = grid.collar_width() as i64;
    let [fx, fy] = grid.full_shape();
    for (row, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != columns {
            return Err(format_err(path, format!("row {}: wrong column count", row + 2)));
        }
        let parse_idx = |s: &str| -> Result<i64> {
            s.parse::<i64>()
                .map_err(|_| format_err(path, format!("row {}: bad index `{s}`", row + 2)))
        };
        let i = parse_idx(parts[0])? + c;
        let j = if grid.dimension() == 2 { parse_idx(parts[1])? + c } else { 0 };
        if i < 0 || j < 0 || i as usize >= fx || j as usize >= fy {
            return Err(format_err(path, format!("row {}: index out of range", row + 2)));
        }
        let v: f64 = parts[columns - 1]
            .parse()
            .map_err(|_| format_err(path, format!("row {}: bad value", row + 2)))?;
        let k = grid.cell_index(i as usize, j as usize);
        if !values[k].is_nan() {
            return Err(format_err(path, format!("row {}: duplicate cell", row + 2)));
        }
        values[k] = v;
        seen += 1;
    }
    if seen != grid.cell_count() {
        return Err(format_err(
            path,
            format!("expected {} cells, found {seen}", grid.cell_count()),
        ));
    }
    ScalarField::new(grid, values)
}

pub(crate) fn raw_bytes(grid: &Grid, field: &ScalarField) -> Vec<u8> {
    let [fx, fy] = grid.full_shape();
    let mut out = Vec::with_capacity(16 + 8 * field.len());
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&(grid.dimension() as u32).to_le_bytes());
    out.extend_from_slice(&(fx as u32).to_le_bytes());
    out.extend_from_slice(&(fy as u32).to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_raw(path: &Path, grid: &Grid, field: &ScalarField) -> Result<()> {
    fs::write(path, raw_bytes(grid, field)).map_err(|e| io_err(path, e))
}

pub fn read_raw(path: &Path, grid: &Grid) -> Result<ScalarField> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() < 16 || &bytes[..4] != RAW_MAGIC {
        return Err(format_err(path, "missing TVF0 header"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (dim, fx, fy) = (word(4), word(8), word(12));
    if dim != grid.dimension() || [fx, fy] != grid.full_shape() {
        return Err(format_err(
            path,
            format!(
                "header describes a {dim}D {fx}x{fy} array, grid is {}D {:?}",
                grid.dimension(),
                grid.full_shape()
            ),
        ));
    }
    let body = &bytes[16..];
    if body.len() != 8 * fx * fy {
        return Err(format_err(path, "payload length does not match header"));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ScalarField::new(grid, values)
}
