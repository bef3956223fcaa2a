//! Plain-text formats: headerless numeric matrix CSV and labeled sample CSV.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::qda::LabeledDataset;
use crate::spdlinalg::Dims;
use crate::{Error, Result};

/// Formats a float with 17 significant digits; infinities as `inf`/`-inf`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn parse_float(s: &str, line: usize) -> Result<f64> {
    let t = s.trim();
    match t {
        "inf" | "+inf" | "Inf" => Ok(f64::INFINITY),
        "-inf" | "-Inf" => Ok(f64::NEG_INFINITY),
        _ => t.parse::<f64>().map_err(|e| Error::Parse {
            line,
            message: format!("invalid number {t:?}: {e}"),
        }),
    }
}

/// Parses comma-separated rows of equal length; blank lines are skipped.
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| parse_float(f, idx + 1))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("row has {} fields, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 0, message: "empty matrix file".into() });
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.into_iter().flatten()))
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| format_float(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix_csv(&fs::read_to_string(path)?)
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    fs::write(path, matrix_to_csv(m))?;
    Ok(())
}

/// Reads one observation per row (no header); each row is a `vec(Y)`.
pub fn read_samples_csv(path: &Path, dims: Dims) -> Result<Vec<DVector<f64>>> {
    let m = read_matrix_csv(path)?;
    if m.ncols() != dims.p() {
        return Err(Error::DimensionMismatch(format!(
            "samples have {} columns, expected p1*p2 = {}",
            m.ncols(),
            dims.p()
        )));
    }
    Ok(m.row_iter().map(|r| r.transpose()).collect())
}

/// Parses a dataset with header `label,v1,...,vp`, one sample per row.
pub fn parse_dataset_csv(text: &str, dims: Dims) -> Result<LabeledDataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse { line: 0, message: "empty dataset".into() })?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields.first() != Some(&"label") || fields.len() != dims.p() + 1 {
        return Err(Error::Parse {
            line: 1,
            message: format!("header must be label,v1,...,v{}", dims.p()),
        });
    }
    let mut data = LabeledDataset::new(dims);
    for (idx, raw) in lines {
        let mut parts = raw.split(',');
        let label = parts.next().unwrap_or_default().trim().to_string();
        let values = parts.map(|f| parse_float(f, idx + 1)).collect::<Result<Vec<_>>>()?;
        if values.len() != dims.p() {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("{} values, expected {}", values.len(), dims.p()),
            });
        }
        data.push(label, DVector::from_vec(values))?;
    }
    Ok(data)
}

pub fn read_dataset_csv(path: &Path, dims: Dims) -> Result<LabeledDataset> {
    parse_dataset_csv(&fs::read_to_string(path)?, dims)
}

pub fn dataset_to_csv(data: &LabeledDataset) -> String {
    let p = data.dims().p();
    let mut out = String::from("label");
    for k in 1..=p {
        out.push_str(&format!(",v{k}"));
    }
    out.push('\n');
    for (label, y) in data.samples() {
        out.push_str(label);
        for v in y.iter() {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset_csv(path: &Path, data: &LabeledDataset) -> Result<()> {
    fs::write(path, dataset_to_csv(data))?;
    Ok(())
}
