//! Long-format CSV datasets: header `id,time,y`, one row per observation.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use bentcable_core::{LongitudinalDataset, ObservationRow};

use crate::error::{CliError, Result};

pub const REQUIRED_COLUMNS: [&str; 3] = ["id", "time", "y"];

/// Read a dataset. Rows of one id must be in increasing time order; ids keep
/// their order of first appearance.
pub fn read_dataset(path: &Path) -> Result<LongitudinalDataset> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_dataset(file, path)
}

pub fn parse_dataset(source: impl Read, path: &Path) -> Result<LongitudinalDataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(bentcable_core::Error::Setup("no profiles".into()).into());
    }
    let mut idx = [0usize; 3];
    for (k, name) in REQUIRED_COLUMNS.iter().enumerate() {
        idx[k] = header.iter().position(|h| h == *name).ok_or_else(|| CliError::Format {
            path: path.into(),
            message: format!("missing column `{name}` (header must contain id,time,y)"),
        })?;
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let field = |k: usize| record.get(idx[k]).unwrap_or("");
        let number = |k: usize| -> Result<f64> {
            field(k).parse::<f64>().map_err(|_| CliError::Parse {
                path: path.into(),
                row,
                message: format!("`{}` is not a number in column `{}`", field(k), REQUIRED_COLUMNS[k]),
            })
        };
        let id = field(0);
        if id.is_empty() {
            return Err(CliError::Parse { path: path.into(), row, message: "empty id".into() });
        }
        rows.push(ObservationRow { row, id: id.to_string(), time: number(1)?, y: number(2)? });
    }
    Ok(LongitudinalDataset::from_rows(&rows)?)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let row = e.position().map(|p| p.line() as usize);
    match row {
        Some(row) => CliError::Parse { path: path.into(), row, message: e.to_string() },
        None => CliError::Format { path: path.into(), message: e.to_string() },
    }
}

pub fn write_dataset(path: &Path, ds: &LongitudinalDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_write_error(path, e))?;
    w.write_record(REQUIRED_COLUMNS).map_err(|e| csv_write_error(path, e))?;
    for pr in ds.profiles() {
        for (t, y) in pr.times.iter().zip(&pr.responses) {
            w.write_record([pr.id.as_str(), &t.to_string(), &y.to_string()]).map_err(|e| csv_write_error(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub(crate) fn csv_write_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Format { path: path.into(), message: format!("{other:?}") },
    }
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Format { path: path.into(), message: e.to_string() })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse { path: path.into(), row: e.line(), message: e.to_string() })
}
