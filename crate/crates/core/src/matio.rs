//! Data matrices and their on-disk formats.
//!
//! Two formats are supported:
//!
//! - **csv**: row-major, comma separated, one matrix row per line. A first
//!   line containing any token that does not parse as a number is treated as
//!   a header and skipped.
//! - **bin**: the magic bytes `CILM`, a version byte, `d` and `n` as
//!   little-endian `u64`, then `d·n` little-endian IEEE-754 doubles in
//!   row-major order. Round trips are bit-exact.
//!
//! Columns are data points. Images are stored flattened, one image per
//! column, and their shape is supplied by the caller.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const BIN_MAGIC: &[u8; 4] = b"CILM";
const BIN_VERSION: u8 = 1;
const BIN_HEADER_LEN: usize = 4 + 1 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Bin,
}

impl MatrixFormat {
    /// Guess the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("bin") => MatrixFormat::Bin,
            _ => MatrixFormat::Csv,
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(MatrixFormat::Csv),
            "bin" => Ok(MatrixFormat::Bin),
            other => Err(Error::param(format!("unknown matrix format '{other}' (expected csv or bin)"))),
        }
    }
}

/// A `d × n` real matrix whose columns are data points.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    image_shape: Option<(usize, usize)>,
    labels: Option<Vec<usize>>,
}

impl DataMatrix {
    /// Wraps a matrix after checking `d ≥ 1`, `n ≥ 2` and finiteness.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Empty);
        }
        if values.ncols() < 2 {
            return Err(Error::shape(format!(
                "need at least 2 data points (columns), got {}",
                values.ncols()
            )));
        }
        check_finite(&values)?;
        Ok(DataMatrix {
            values,
            image_shape: None,
            labels: None,
        })
    }

    pub fn with_image_shape(mut self, h: usize, w: usize) -> Result<Self> {
        if h * w != self.dim() {
            return Err(Error::shape(format!(
                "image shape {h}x{w} does not match feature dimension {}",
                self.dim()
            )));
        }
        self.image_shape = Some((h, w));
        Ok(self)
    }

    /// Attaches ground-truth labels, which must form the contiguous set `{0..k-1}`.
    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::InvalidLabels(format!(
                "{} labels for {} points",
                labels.len(),
                self.len()
            )));
        }
        check_contiguous(&labels)?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    /// Feature dimension `d`.
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Number of points `n`.
    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn image_shape(&self) -> Option<(usize, usize)> {
        self.image_shape
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Replaces the values, keeping shape metadata and labels.
    pub(crate) fn map_values(&self, values: DMatrix<f64>) -> Result<Self> {
        debug_assert_eq!(values.shape(), self.values.shape());
        check_finite(&values)?;
        Ok(DataMatrix {
            values,
            image_shape: self.image_shape,
            labels: self.labels.clone(),
        })
    }
}

fn check_finite(values: &DMatrix<f64>) -> Result<()> {
    for c in 0..values.ncols() {
        for r in 0..values.nrows() {
            if !values[(r, c)].is_finite() {
                return Err(Error::NonFinite { row: r, col: c });
            }
        }
    }
    Ok(())
}

fn check_contiguous(labels: &[usize]) -> Result<()> {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut seen = vec![false; k];
    for &l in labels {
        seen[l] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidLabels(format!(
            "label values must be contiguous 0..{k}, missing {missing}"
        )));
    }
    Ok(())
}

/// Scales every column to unit Euclidean norm.
///
/// A column of exact zeros is an error; the caller decides whether to drop
/// or perturb it.
pub fn normalize_columns(x: &DataMatrix) -> Result<DataMatrix> {
    let mut values = x.values.clone();
    for (j, mut col) in values.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        col /= norm;
    }
    x.map_values(values)
}

pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<DataMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let values = match format {
        MatrixFormat::Csv => {
            let text = String::from_utf8(bytes).map_err(|e| Error::Parse {
                line: 0,
                message: format!("not valid UTF-8: {e}"),
            })?;
            parse_csv(&text)?
        }
        MatrixFormat::Bin => decode_bin(&bytes)?,
    };
    DataMatrix::new(values)
}

pub fn save_matrix(x: &DataMatrix, path: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
    write_matrix(x.values(), path, format)
}

/// Writes any matrix (e.g. a coefficient matrix) in one of the two formats.
pub fn write_matrix(values: &DMatrix<f64>, path: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        MatrixFormat::Csv => encode_csv(values).into_bytes(),
        MatrixFormat::Bin => encode_bin(values),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a raw matrix without the `DataMatrix` shape checks (square
/// coefficient matrices, single columns).
pub fn read_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let values = match format {
        MatrixFormat::Csv => parse_csv(&String::from_utf8_lossy(&bytes))?,
        MatrixFormat::Bin => decode_bin(&bytes)?,
    };
    check_finite(&values)?;
    Ok(values)
}

pub fn parse_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = tokens.iter().map(|t| t.parse::<f64>()).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(e) => {
                if rows.is_empty() && width.is_none() {
                    // header line: remember its width, skip it
                    width = Some(tokens.len());
                    continue;
                }
                return Err(Error::Parse {
                    line: line_no,
                    message: e.to_string(),
                });
            }
        };
        match width {
            Some(w) if w != row.len() => {
                return Err(Error::Ragged {
                    line: line_no,
                    expected: w,
                    found: row.len(),
                })
            }
            _ => width = Some(row.len()),
        }
        if let Some(col) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: rows.len(), col });
        }
        rows.push(row);
    }
    let ncols = match (rows.first(), width) {
        (Some(first), _) => first.len(),
        _ => return Err(Error::Empty),
    };
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

pub fn encode_csv(values: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(values.len() * 20);
    for r in 0..values.nrows() {
        for c in 0..values.ncols() {
            if c > 0 {
                out.push(',');
            }
            // Display for f64 prints the shortest string that round-trips.
            out.push_str(&values[(r, c)].to_string());
        }
        out.push('\n');
    }
    out
}

pub fn encode_bin(values: &DMatrix<f64>) -> Vec<u8> {
    let (d, n) = values.shape();
    let mut out = Vec::with_capacity(BIN_HEADER_LEN + 8 * d * n);
    out.extend_from_slice(BIN_MAGIC);
    out.push(BIN_VERSION);
    out.extend_from_slice(&(d as u64).to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for r in 0..d {
        for c in 0..n {
            out.extend_from_slice(&values[(r, c)].to_le_bytes());
        }
    }
    out
}

pub fn decode_bin(bytes: &[u8]) -> Result<DMatrix<f64>> {
    let bad = |message: &str| Error::Parse {
        line: 0,
        message: message.to_string(),
    };
    if bytes.len() < BIN_HEADER_LEN || &bytes[..4] != BIN_MAGIC {
        return Err(bad("missing CILM header"));
    }
    if bytes[4] != BIN_VERSION {
        return Err(bad(&format!("unsupported bin version {}", bytes[4])));
    }
    let read_u64 = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let d = usize::try_from(read_u64(5)).map_err(|_| bad("row count overflows"))?;
    let n = usize::try_from(read_u64(13)).map_err(|_| bad("column count overflows"))?;
    if d == 0 || n == 0 {
        return Err(Error::Empty);
    }
    let expected = d
        .checked_mul(n)
        .and_then(|m| m.checked_mul(8))
        .ok_or_else(|| bad("matrix size overflows"))?;
    let payload = &bytes[BIN_HEADER_LEN..];
    if payload.len() != expected {
        return Err(bad(&format!(
            "payload has {} bytes, expected {expected} for {d}x{n}",
            payload.len()
        )));
    }
    let mut values = DMatrix::zeros(d, n);
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        values[(i / n, i % n)] = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
    }
    Ok(values)
}

/// Reads a label file: one integer per line, blank lines ignored.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text)
}

pub fn parse_labels(text: &str) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        labels.push(t.parse::<usize>().map_err(|e| Error::Parse {
            line: idx + 1,
            message: format!("bad label '{t}': {e}"),
        })?);
    }
    if labels.is_empty() {
        return Err(Error::Empty);
    }
    Ok(labels)
}

pub fn save_labels(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for l in labels {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
