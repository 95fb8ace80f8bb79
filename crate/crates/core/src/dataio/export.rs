use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// On-disk matrix encodings. Both are row-major with no header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    /// Comma-separated, one row per line, 17 significant digits.
    Csv,
    /// Raw little-endian `f64`.
    F64Bin,
}

impl std::str::FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "f64bin" => Ok(Self::F64Bin),
            other => Err(Error::InvalidInput(format!("unknown matrix format `{other}`"))),
        }
    }
}

/// Writes `m` row-major to `path`.
pub fn write_matrix(m: &Matrix, path: &Path, format: MatrixFormat) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    match format {
        MatrixFormat::Csv => {
            for r in 0..m.rows() {
                for (c, v) in m.row(r).iter().enumerate() {
                    if c > 0 {
                        w.write_all(b",").map_err(io)?;
                    }
                    write!(w, "{v:.16e}").map_err(io)?;
                }
                w.write_all(b"\n").map_err(io)?;
            }
        }
        MatrixFormat::F64Bin => {
            for v in m.as_slice() {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

/// Alias of [`write_matrix`] taking any path-like argument.
pub fn export_matrix(m: &Matrix, path: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
    write_matrix(m, path.as_ref(), format)
}

/// Reads a row-major matrix with `cols` columns; the row count is inferred.
pub fn read_matrix(path: &Path, format: MatrixFormat, cols: usize) -> Result<Matrix> {
    if cols == 0 {
        return Err(Error::InvalidInput("matrix column count must be >= 1".into()));
    }
    let context = path.display().to_string();
    match format {
        MatrixFormat::Csv => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut data = Vec::new();
            let mut rows = 0;
            for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
                let before = data.len();
                for field in line.split(',') {
                    let v: f64 = field.trim().parse().map_err(|_| {
                        Error::InvalidInput(format!("{context}: bad number `{field}` on row {rows}"))
                    })?;
                    data.push(v);
                }
                if data.len() - before != cols {
                    return Err(Error::shape(
                        format!("{context} row {rows}"),
                        format!("{cols} fields"),
                        data.len() - before,
                    ));
                }
                rows += 1;
            }
            Matrix::from_vec(rows, cols, data)
        }
        MatrixFormat::F64Bin => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            if bytes.len() % (8 * cols) != 0 {
                return Err(Error::shape(
                    context,
                    format!("a multiple of {} bytes", 8 * cols),
                    bytes.len(),
                ));
            }
            let data: Vec<f64> = bytes
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                .collect();
            Matrix::from_vec(bytes.len() / (8 * cols), cols, data)
        }
    }
}
