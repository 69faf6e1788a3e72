//! Output files. Every write goes to a temporary file in the target directory
//! that is then renamed into place.
//!
//! Field files: the bytes `AMBO`, a version byte (1), the dimension as a `u32`,
//! `n` as a `u32` for every axis, then the values as little-endian `f64` in
//! row-major order with the first axis varying fastest (for a 2D field, row
//! `j` holds the cells `(0, j), (1, j), ...`).

use std::io::Write;
use std::path::Path;

use super::HarnessError;
use crate::grid::{ScalarField, TorusGrid};

pub const FIELD_MAGIC: &[u8; 4] = b"AMBO";
pub const FIELD_VERSION: u8 = 1;

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub fn encode_field(field: &ScalarField) -> Vec<u8> {
    let grid = field.grid();
    let mut out = Vec::with_capacity(9 + 4 * grid.dim() + 8 * grid.len());
    out.extend_from_slice(FIELD_MAGIC);
    out.push(FIELD_VERSION);
    out.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    for _ in 0..grid.dim() {
        out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    }
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<ScalarField, HarnessError> {
    let bad = |m: &str| HarnessError::Io(format!("malformed field file: {m}"));
    if bytes.len() < 9 || &bytes[..4] != FIELD_MAGIC {
        return Err(bad("missing magic"));
    }
    if bytes[4] != FIELD_VERSION {
        return Err(bad(&format!("unsupported version {}", bytes[4])));
    }
    let word = |at: usize| -> Result<u32, HarnessError> {
        let b = bytes.get(at..at + 4).ok_or_else(|| bad("truncated header"))?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    };
    let dim = word(5)? as usize;
    let mut ns = Vec::with_capacity(dim);
    for a in 0..dim {
        ns.push(word(9 + 4 * a)? as usize);
    }
    if ns.is_empty() || ns.iter().any(|&n| n != ns[0]) {
        return Err(bad("only cubic grids are supported"));
    }
    let grid = TorusGrid::new(dim, ns[0]).map_err(|e| bad(&e.to_string()))?;
    let start = 9 + 4 * dim;
    let body = &bytes[start..];
    if body.len() != 8 * grid.len() {
        return Err(bad("value count does not match the header"));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    ScalarField::from_values(grid, values).map_err(|e| bad(&e.to_string()))
}

pub fn write_field(path: &Path, field: &ScalarField) -> Result<(), HarnessError> {
    atomic_write(path, &encode_field(field))
}

pub fn read_field(path: &Path) -> Result<ScalarField, HarnessError> {
    decode_field(&std::fs::read(path).map_err(|e| io_err(path, e))?)
}

/// 8-bit binary PGM of a 2D field, `lo` black and `hi` white, top row = largest second coordinate.
pub fn write_pgm(path: &Path, field: &ScalarField, lo: f64, hi: f64) -> Result<(), HarnessError> {
    let grid = field.grid();
    if grid.dim() != 2 {
        return Err(HarnessError::Io(format!("{}: PGM output needs a 2D field", path.display())));
    }
    let n = grid.n();
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    let span = if hi > lo { hi - lo } else { 1.0 };
    for j in (0..n).rev() {
        for i in 0..n {
            let t = ((field.get(grid.linear([i, j, 0])) - lo) / span).clamp(0.0, 1.0);
            out.push((t * 255.0).round() as u8);
        }
    }
    atomic_write(path, &out)
}

/// CSV with a header row; values use the shortest round-trip formatting.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for (k, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(HarnessError::Io(format!("{}: row {k} has {} columns, header has {}", path.display(), row.len(), header.len())));
        }
        w.write_record(row).map_err(|e| io_err(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| io_err(path, e))?;
    atomic_write(path, &bytes)
}

pub fn write_summary(path: &Path, summary: &serde_json::Value) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(summary).map_err(|e| io_err(path, e))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Formats a float for CSV output.
pub fn num(v: f64) -> String {
    format!("{v}")
}
