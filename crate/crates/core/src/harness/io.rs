//! Matrix file IO.
//!
//! Native format "MR1": ASCII header line `MR1 <n_rows> <n_cols>` followed by
//! row-major 64-bit IEEE-754 little-endian values. CSV files (by `.csv`
//! extension or content) are also read and written, with 17 significant
//! digits so values round-trip bitwise.

use crate::error::{MatregError, Result};
use crate::matcore::DenseMatrix;
use std::fs;
use std::io::Write;
use std::path::Path;

fn io_err(path: &Path, source: std::io::Error) -> MatregError {
    MatregError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> MatregError {
    MatregError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

pub fn save_matrix(a: &DenseMatrix, path: &Path) -> Result<()> {
    if path.extension().and_then(|e| e.to_str()) == Some("csv") {
        save_csv(a, path)
    } else {
        save_mr1(a, path)
    }
}

fn save_mr1(a: &DenseMatrix, path: &Path) -> Result<()> {
    let mut buf = format!("MR1 {} {}\n", a.n_rows(), a.n_cols()).into_bytes();
    buf.reserve(a.entries().len() * 8);
    for &v in a.entries() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| io_err(path, e))
}

fn save_csv(a: &DenseMatrix, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for i in 0..a.n_rows() {
        let row: Vec<String> = a.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", row.join(",")).map_err(|e| io_err(path, e))?;
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn load_matrix(path: &Path) -> Result<DenseMatrix> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.starts_with(b"MR1 ") {
        load_mr1(path, &bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| parse_err(path, 1, "file is neither MR1 nor UTF-8 CSV"))?;
        load_csv(path, &text)
    }
}

fn load_mr1(path: &Path, bytes: &[u8]) -> Result<DenseMatrix> {
    let header_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse_err(path, 1, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| parse_err(path, 1, "header is not ASCII"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != "MR1" {
        return Err(parse_err(path, 1, format!("malformed header '{header}'")));
    }
    let n_rows: usize = fields[1]
        .parse()
        .map_err(|_| parse_err(path, 1, format!("bad row count '{}'", fields[1])))?;
    let n_cols: usize = fields[2]
        .parse()
        .map_err(|_| parse_err(path, 1, format!("bad column count '{}'", fields[2])))?;
    let body = &bytes[header_end + 1..];
    let expected = n_rows
        .checked_mul(n_cols)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| parse_err(path, 1, "dimensions overflow"))?;
    if body.len() != expected {
        return Err(parse_err(
            path,
            1,
            format!(
                "size mismatch: {n_rows}x{n_cols} needs {expected} bytes, found {}",
                body.len()
            ),
        ));
    }
    let mut entries = Vec::with_capacity(n_rows * n_cols);
    for (idx, chunk) in body.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(parse_err(
                path,
                1,
                format!(
                    "non-finite value at row {}, col {}",
                    idx / n_cols,
                    idx % n_cols
                ),
            ));
        }
        entries.push(v);
    }
    DenseMatrix::new(n_rows, n_cols, entries)
}

fn load_csv(path: &Path, text: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, token) in trimmed.split(',').enumerate() {
            let v: f64 = token.trim().parse().map_err(|_| {
                parse_err(
                    path,
                    line_no + 1,
                    format!("bad value '{}' at column {col}", token.trim()),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    path,
                    line_no + 1,
                    format!("non-finite value at row {}, col {col}", rows.len()),
                ));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    path,
                    line_no + 1,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "empty matrix"));
    }
    let n_cols = rows[0].len();
    let entries: Vec<f64> = rows.iter().flatten().copied().collect();
    DenseMatrix::new(rows.len(), n_cols, entries)
}
