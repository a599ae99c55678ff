//! CSV panel ingestion and emission.
//!
//! Long format: one row per observation with columns `id,t,y,x1..xK`;
//! periods are positive integers and rows with `t = 0` supply the initial
//! outcomes (their covariate cells are ignored). Wide format: one file per
//! matrix whose header row lists the periods and whose rows are the units,
//! aligned across files by position; the initial-outcome file has the
//! single header `0`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use qpc_core::PanelDataF64;

/// Ingestion failures with enough context to fix the file.
#[derive(Debug)]
pub enum DataError {
    /// I/O problem.
    Io(String),
    /// A malformed cell, with the 1-based data line.
    Parse {
        /// Line number within the file (header excluded).
        line: usize,
        /// What went wrong.
        message: String,
    },
    /// The panel has holes after pivoting.
    Unbalanced {
        /// Missing `(id, period)` pairs, capped at twenty for readability.
        missing: Vec<(String, usize)>,
    },
    /// Structural problem (bad header, inconsistent shapes).
    Schema(String),
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::Io(msg) => write!(f, "i/o error: {msg}"),
            DataError::Parse { line, message } => {
                write!(f, "parse error on data line {line}: {message}")
            }
            DataError::Unbalanced { missing } => {
                let cells: Vec<String> =
                    missing.iter().map(|(id, t)| format!("({id}, {t})")).collect();
                write!(f, "unbalanced panel; missing cells: {}", cells.join(", "))
            }
            DataError::Schema(msg) => write!(f, "schema error: {msg}"),
        }
    }
}

impl std::error::Error for DataError {}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, DataError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DataError::Io(e.to_string()))
}

/// Read a long-format panel.
pub fn read_long(path: &Path) -> Result<PanelDataF64, DataError> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| DataError::Io(e.to_string()))?.clone();
    if headers.len() < 3 || &headers[0] != "id" || &headers[1] != "t" || &headers[2] != "y" {
        return Err(DataError::Schema(
            "long format needs the header id,t,y,x1,...  (in that order)".into(),
        ));
    }
    let k = headers.len() - 3;
    if k == 0 {
        return Err(DataError::Schema("at least one covariate column is required".into()));
    }
    for (j, name) in headers.iter().skip(3).enumerate() {
        let expected = format!("x{}", j + 1);
        if name != expected {
            return Err(DataError::Schema(format!(
                "covariate column {} is named '{name}', expected '{expected}'",
                j + 4
            )));
        }
    }

    struct Row {
        id: String,
        period: usize,
        y: f64,
        x: Vec<f64>,
    }

    let mut rows: Vec<Row> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| DataError::Parse { line, message: e.to_string() })?;
        if record.len() != headers.len() {
            return Err(DataError::Parse {
                line,
                message: format!("{} fields, expected {}", record.len(), headers.len()),
            });
        }
        let id = record[0].to_string();
        let period: usize = record[1].parse().map_err(|_| DataError::Parse {
            line,
            message: format!("period '{}' is not a non-negative integer", &record[1]),
        })?;
        let y: f64 = record[2].parse().map_err(|_| DataError::Parse {
            line,
            message: format!("outcome '{}' is not numeric", &record[2]),
        })?;
        let mut x = Vec::with_capacity(k);
        if period > 0 {
            for j in 0..k {
                let v: f64 = record[3 + j].parse().map_err(|_| DataError::Parse {
                    line,
                    message: format!("covariate x{} value '{}' is not numeric", j + 1, &record[3 + j]),
                })?;
                x.push(v);
            }
        }
        rows.push(Row { id, period, y, x });
    }

    // Pivot: ids in first-appearance order, periods 1..=T must be complete.
    let mut ids: Vec<String> = Vec::new();
    let mut id_index: BTreeMap<String, usize> = BTreeMap::new();
    for row in &rows {
        if !id_index.contains_key(&row.id) {
            id_index.insert(row.id.clone(), ids.len());
            ids.push(row.id.clone());
        }
    }
    let periods: BTreeSet<usize> = rows.iter().map(|r| r.period).filter(|&p| p > 0).collect();
    let t = *periods.iter().max().ok_or_else(|| {
        DataError::Schema("no observations with period >= 1".into())
    })?;
    let n = ids.len();

    let mut y = DMatrix::from_element(n, t, f64::NAN);
    let mut x: Vec<DMatrix<f64>> = (0..k).map(|_| DMatrix::from_element(n, t, f64::NAN)).collect();
    let mut y0 = DVector::from_element(n, f64::NAN);
    let mut have_y0 = false;
    for row in &rows {
        let i = id_index[&row.id];
        if row.period == 0 {
            y0[i] = row.y;
            have_y0 = true;
        } else {
            y[(i, row.period - 1)] = row.y;
            for (xj, value) in x.iter_mut().zip(&row.x) {
                xj[(i, row.period - 1)] = *value;
            }
        }
    }

    let mut missing = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        for period in 1..=t {
            if y[(i, period - 1)].is_nan() && missing.len() < 20 {
                missing.push((id.clone(), period));
            }
        }
        if have_y0 && y0[i].is_nan() && missing.len() < 20 {
            missing.push((id.clone(), 0));
        }
    }
    if !missing.is_empty() {
        return Err(DataError::Unbalanced { missing });
    }

    PanelDataF64::new(y, x, have_y0.then_some(y0))
        .map_err(|e| DataError::Schema(e.to_string()))
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>, DataError> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| DataError::Io(e.to_string()))?.clone();
    let t = headers.len();
    for (j, name) in headers.iter().enumerate() {
        let expected = format!("{}", j + 1);
        if name != expected {
            return Err(DataError::Schema(format!(
                "wide header column {} is '{name}', expected the period label '{expected}'",
                j + 1
            )));
        }
    }
    let mut values: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| DataError::Parse { line, message: e.to_string() })?;
        if record.len() != t {
            return Err(DataError::Parse {
                line,
                message: format!("{} fields, expected {t}", record.len()),
            });
        }
        for cell in record.iter() {
            let v: f64 = cell.parse().map_err(|_| DataError::Parse {
                line,
                message: format!("value '{cell}' is not numeric"),
            })?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(DataError::Schema(format!("{} has no data rows", path.display())));
    }
    Ok(DMatrix::from_row_iterator(rows, t, values))
}

/// Read a wide-format panel: the outcome file, one file per covariate and
/// an optional initial-outcome file (single column, header `0`).
pub fn read_wide(
    y_path: &Path,
    x_paths: &[std::path::PathBuf],
    y0_path: Option<&Path>,
) -> Result<PanelDataF64, DataError> {
    if x_paths.is_empty() {
        return Err(DataError::Schema("at least one covariate file is required".into()));
    }
    let y = read_matrix(y_path)?;
    let mut x = Vec::with_capacity(x_paths.len());
    for path in x_paths {
        let xk = read_matrix(path)?;
        if xk.shape() != y.shape() {
            return Err(DataError::Schema(format!(
                "{} is {}x{}, outcome file is {}x{}",
                path.display(),
                xk.nrows(),
                xk.ncols(),
                y.nrows(),
                y.ncols()
            )));
        }
        x.push(xk);
    }
    let y0 = match y0_path {
        Some(path) => {
            let mut reader = open_reader(path)?;
            let headers = reader.headers().map_err(|e| DataError::Io(e.to_string()))?.clone();
            if headers.len() != 1 || &headers[0] != "0" {
                return Err(DataError::Schema(
                    "the initial-outcome file needs the single header '0'".into(),
                ));
            }
            let mut vals = Vec::new();
            for (idx, record) in reader.records().enumerate() {
                let line = idx + 1;
                let record =
                    record.map_err(|e| DataError::Parse { line, message: e.to_string() })?;
                let v: f64 = record[0].parse().map_err(|_| DataError::Parse {
                    line,
                    message: format!("value '{}' is not numeric", &record[0]),
                })?;
                vals.push(v);
            }
            if vals.len() != y.nrows() {
                return Err(DataError::Schema(format!(
                    "initial-outcome file has {} rows, outcome file has {}",
                    vals.len(),
                    y.nrows()
                )));
            }
            Some(DVector::from_vec(vals))
        }
        None => None,
    };
    PanelDataF64::new(y, x, y0).map_err(|e| DataError::Schema(e.to_string()))
}

/// Write a panel in long format (`id` = 1-based row index; `t = 0` rows
/// first when an initial condition is present). Values round-trip exactly.
pub fn write_long(data: &PanelDataF64, path: &Path) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| DataError::Io(e.to_string()))?;
    let k = data.k();
    let mut header = vec!["id".to_string(), "t".to_string(), "y".to_string()];
    for j in 1..=k {
        header.push(format!("x{j}"));
    }
    writer.write_record(&header).map_err(|e| DataError::Io(e.to_string()))?;
    if let Some(y0) = data.y0() {
        for i in 0..data.n() {
            let mut record = vec![(i + 1).to_string(), "0".to_string(), format!("{}", y0[i])];
            for _ in 0..k {
                record.push(String::new());
            }
            writer.write_record(&record).map_err(|e| DataError::Io(e.to_string()))?;
        }
    }
    for i in 0..data.n() {
        for period in 1..=data.t() {
            let mut record = vec![
                (i + 1).to_string(),
                period.to_string(),
                format!("{}", data.y()[(i, period - 1)]),
            ];
            for xk in data.x() {
                record.push(format!("{}", xk[(i, period - 1)]));
            }
            writer.write_record(&record).map_err(|e| DataError::Io(e.to_string()))?;
        }
    }
    writer.flush().map_err(|e| DataError::Io(e.to_string()))
}

/// Write a panel in wide format under `dir`: `y.csv`, `x1.csv`, ...,
/// plus `y0.csv` when an initial condition is present. Returns the paths
/// in `(y, xs, y0)` order.
pub fn write_wide(
    data: &PanelDataF64,
    dir: &Path,
) -> Result<(std::path::PathBuf, Vec<std::path::PathBuf>, Option<std::path::PathBuf>), DataError> {
    let write_matrix = |mat: &DMatrix<f64>, path: &Path| -> Result<(), DataError> {
        let mut writer =
            csv::Writer::from_path(path).map_err(|e| DataError::Io(e.to_string()))?;
        let header: Vec<String> = (1..=mat.ncols()).map(|p| p.to_string()).collect();
        writer.write_record(&header).map_err(|e| DataError::Io(e.to_string()))?;
        for i in 0..mat.nrows() {
            let record: Vec<String> =
                (0..mat.ncols()).map(|c| format!("{}", mat[(i, c)])).collect();
            writer.write_record(&record).map_err(|e| DataError::Io(e.to_string()))?;
        }
        writer.flush().map_err(|e| DataError::Io(e.to_string()))
    };

    let y_path = dir.join("y.csv");
    write_matrix(data.y(), &y_path)?;
    let mut x_paths = Vec::new();
    for (j, xk) in data.x().iter().enumerate() {
        let path = dir.join(format!("x{}.csv", j + 1));
        write_matrix(xk, &path)?;
        x_paths.push(path);
    }
    let y0_path = match data.y0() {
        Some(y0) => {
            let path = dir.join("y0.csv");
            let mut writer =
                csv::Writer::from_path(&path).map_err(|e| DataError::Io(e.to_string()))?;
            writer.write_record(["0"]).map_err(|e| DataError::Io(e.to_string()))?;
            for i in 0..y0.len() {
                writer
                    .write_record([format!("{}", y0[i])])
                    .map_err(|e| DataError::Io(e.to_string()))?;
            }
            writer.flush().map_err(|e| DataError::Io(e.to_string()))?;
            Some(path)
        }
        None => None,
    };
    Ok((y_path, x_paths, y0_path))
}
