//! CSV ingestion and export of datasets.

use std::path::Path;

use pairswap::Dataset;

use crate::error::{CliError, CliResult};

/// Where the response, covariate and control live in a CSV file.
///
/// With a header row, columns are named; without one, they are given as
/// one-based column numbers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub x_col: String,
    pub y_col: String,
    pub z_col: String,
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            x_col: "x".into(),
            y_col: "y".into(),
            z_col: "z".into(),
            delimiter: b',',
            has_header: true,
        }
    }
}

fn reader(path: &Path, delimiter: u8, has_header: bool) -> CliResult<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))
}

fn column_index(name: &str, header: Option<&csv::StringRecord>) -> CliResult<usize> {
    match header {
        Some(h) => h
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::Data(format!("column `{name}` not found in the header"))),
        None => match name.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(k - 1),
            _ => Err(CliError::Usage(format!(
                "without a header, columns are one-based numbers; got `{name}`"
            ))),
        },
    }
}

/// Reads the named columns as finite numbers. Rows are reported one-based,
/// counting data rows only.
pub fn read_columns(path: &Path, names: &[&str], delimiter: u8, has_header: bool) -> CliResult<Vec<Vec<f64>>> {
    let mut rdr = reader(path, delimiter, has_header)?;
    let header = if has_header {
        Some(
            rdr.headers()
                .map_err(|e| CliError::Data(format!("cannot read header: {e}")))?
                .clone(),
        )
    } else {
        None
    };
    let indices = names
        .iter()
        .map(|n| column_index(n, header.as_ref()))
        .collect::<CliResult<Vec<_>>>()?;
    let mut columns = vec![Vec::new(); names.len()];
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| CliError::Data(format!("row {row}: {e}")))?;
        for ((col, &idx), name) in columns.iter_mut().zip(&indices).zip(names) {
            let cell = record.get(idx).ok_or_else(|| {
                CliError::Data(format!("row {row}: missing column `{name}`"))
            })?;
            let value: f64 = cell.parse().map_err(|_| {
                CliError::Data(format!("row {row}, column `{name}`: `{cell}` is not a number"))
            })?;
            if !value.is_finite() {
                return Err(CliError::Data(format!(
                    "row {row}, column `{name}`: non-finite value `{cell}`"
                )));
            }
            col.push(value);
        }
    }
    Ok(columns)
}

pub fn load_dataset(path: &Path, schema: &CsvSchema) -> CliResult<Dataset> {
    let names = [schema.x_col.as_str(), schema.y_col.as_str(), schema.z_col.as_str()];
    let mut cols = read_columns(path, &names, schema.delimiter, schema.has_header)?;
    if cols[0].is_empty() {
        return Err(CliError::Data(format!("{} has no data rows", path.display())));
    }
    let z = cols.pop().unwrap_or_default();
    let y = cols.pop().unwrap_or_default();
    let x = cols.pop().unwrap_or_default();
    Ok(Dataset::new(x, y, z)?)
}

/// Writes `x,y,z` columns with a header. Values use the shortest decimal
/// form that parses back to the same `f64`.
pub fn write_dataset(path: &Path, d: &Dataset) -> CliResult<()> {
    let io = |e: csv::Error| CliError::Internal(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["x", "y", "z"]).map_err(io)?;
    for i in 0..d.len() {
        w.write_record([d.x()[i], d.y()[i], d.z()[i]].map(|v| v.to_string()))
            .map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}
