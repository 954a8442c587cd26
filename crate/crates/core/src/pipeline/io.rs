//! Matrix and label files.
//!
//! `raw-f64` is a 16-byte header of two little-endian `u64` (rows, columns)
//! followed by the entries as little-endian `f64`, row-major. CSV is plain
//! comma-separated decimals with an optional header line. Label files hold
//! one integer per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};

use crate::error::{AsrcError, Result};
use crate::numerics::DataMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    RawF64,
}

impl FromStr for MatrixFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(MatrixFormat::Csv),
            "raw-f64" => Ok(MatrixFormat::RawF64),
            other => Err(format!("unknown matrix format `{other}`")),
        }
    }
}

fn parse_error(location: String, message: impl Into<String>) -> AsrcError {
    AsrcError::Parse {
        location,
        message: message.into(),
    }
}

pub fn load_matrix(path: &Path, format: MatrixFormat, has_header: bool) -> Result<DataMatrix> {
    match format {
        MatrixFormat::Csv => read_csv(File::open(path)?, has_header),
        MatrixFormat::RawF64 => read_raw_f64(File::open(path)?),
    }
}

pub fn read_csv<R: Read>(reader: R, has_header: bool) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(format!("line {line}"), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(AsrcError::Dimension(format!(
                    "line {line} has {} fields, expected {c}",
                    record.len()
                )))
            }
            _ => {}
        }
        for (f, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_error(format!("line {line}, field {}", f + 1), format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(format!("line {line}, field {}", f + 1), "value is not finite"));
            }
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| AsrcError::Dimension("no data rows".into()))?;
    Array2::from_shape_vec((rows, cols), values).map_err(|e| AsrcError::Dimension(e.to_string()))
}

pub fn read_raw_f64<R: Read>(mut reader: R) -> Result<DataMatrix> {
    let mut header = [0u8; 16];
    reader
        .read_exact(&mut header)
        .map_err(|_| parse_error("byte 0".into(), "file shorter than the 16-byte header"))?;
    let n = u64::from_le_bytes(header[..8].try_into().expect("8 bytes"));
    let d = u64::from_le_bytes(header[8..].try_into().expect("8 bytes"));
    let count = n
        .checked_mul(d)
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| AsrcError::Dimension(format!("{n} x {d} does not fit in memory")))?;
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    if body.len() != count * 8 {
        return Err(AsrcError::Dimension(format!(
            "header announces {n} x {d} values ({} bytes) but {} bytes follow",
            count * 8,
            body.len()
        )));
    }
    let mut values = Vec::with_capacity(count);
    for (idx, chunk) in body.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(parse_error(format!("byte {}", 16 + 8 * idx), "value is not finite"));
        }
        values.push(v);
    }
    Array2::from_shape_vec((n as usize, d as usize), values).map_err(|e| AsrcError::Dimension(e.to_string()))
}

pub fn write_raw_f64(path: &Path, x: &ArrayView2<'_, f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(x.nrows() as u64).to_le_bytes())?;
    w.write_all(&(x.ncols() as u64).to_le_bytes())?;
    for v in x.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// CSV with shortest round-trip decimal formatting.
pub fn write_csv(path: &Path, x: &ArrayView2<'_, f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in x.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_labels(path: &Path) -> Result<Vec<i64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut labels = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        labels.push(
            t.parse()
                .map_err(|_| parse_error(format!("line {}", i + 1), format!("`{t}` is not an integer")))?,
        );
    }
    Ok(labels)
}

pub fn write_labels<T: std::fmt::Display>(path: &Path, labels: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for l in labels {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

/// Map every column affinely onto `[0, 1]`; constant columns become 0.
pub fn normalize_minmax(x: &ArrayView2<'_, f64>) -> DataMatrix {
    let mut out = x.to_owned();
    for mut col in out.columns_mut() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        if range > 0.0 {
            col.mapv_inplace(|v| ((v - lo) / range).clamp(0.0, 1.0));
        } else {
            col.fill(0.0);
        }
    }
    out
}
