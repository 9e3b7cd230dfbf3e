//! CSV and JSON persistence.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use robust_mem::bootstrap::BandPoint;
use robust_mem::{validate_dataset, ObservedDataset};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Full-precision, locale-independent float text (17 significant digits).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Git-style object hash of a blob: SHA-256 over `"blob <len>\0"` + content.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_table(bytes: &[u8]) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("row {r}: {e}")))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field
                    .parse::<f64>()
                    .map_err(|_| CliError::Data(format!("row {r}, column {c}: {field:?} is not a number")))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Reads a dataset CSV (header row, response last) and returns it with the
/// raw file bytes.
pub fn read_dataset(path: &Path) -> CliResult<(ObservedDataset, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let (header, rows) = parse_table(&bytes)?;
    let data = validate_dataset(&rows)?;
    let data = if header.len() == data.dim() + 1 {
        data.with_column_names(header)?
    } else {
        data
    };
    Ok((data, bytes))
}

/// Reads a samples CSV back into a matrix plus its column names.
pub fn read_samples(path: &Path) -> CliResult<(Vec<String>, DMatrix<f64>)> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let (header, rows) = parse_table(&bytes)?;
    if rows.is_empty() {
        return Err(CliError::Data(format!("{} has no rows", path.display())));
    }
    if let Some(r) = rows.iter().position(|r| r.len() != header.len()) {
        return Err(CliError::Data(format!("row {r} has the wrong number of columns")));
    }
    let flat: Vec<f64> = rows.concat();
    Ok((header, DMatrix::from_row_slice(rows.len(), rows[0].len(), &flat)))
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e.into()))?;
    w.write_record(header).map_err(|e| CliError::io(path, e.into()))?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_float(*v)))
            .map_err(|e| CliError::io(path, e.into()))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_matrix(path: &Path, header: &[String], m: &DMatrix<f64>) -> CliResult<()> {
    write_csv(path, header, (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()))
}

pub fn write_dataset(path: &Path, data: &ObservedDataset) -> CliResult<()> {
    let mut header: Vec<String> = (1..=data.dim()).map(|k| format!("w_{k}")).collect();
    header.push("y".into());
    write_csv(path, &header, (0..data.len()).map(|i| {
        let mut row = data.row(i);
        row.push(data.y()[i]);
        row
    }))
}

pub fn write_band(path: &Path, band: &[BandPoint]) -> CliResult<()> {
    let header: Vec<String> = ["x", "lo", "mid", "hi"].iter().map(|s| s.to_string()).collect();
    write_csv(path, &header, band.iter().map(|p| vec![p.x, p.lo, p.mid, p.hi]))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}
