//! Dataset files: a header row naming `y`, `w` and the predictors, then one
//! row of decimal numbers per observation.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use hdcp_core::{Dataset, Matrix};

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("line {line}, column {column} ({name}): {message}")]
    Cell {
        line: u64,
        column: usize,
        name: String,
        message: String,
    },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("header: {0}")]
    Header(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A dataset together with its predictor column names.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedDataset {
    pub data: Dataset,
    pub predictors: Vec<String>,
}

impl NamedDataset {
    /// Keeps only the listed predictor columns.
    pub fn with_columns(&self, cols: &[usize]) -> NamedDataset {
        NamedDataset {
            data: self.data.with_columns(cols),
            predictors: cols.iter().map(|&j| self.predictors[j].clone()).collect(),
        }
    }
}

pub fn read_dataset(path: &Path) -> Result<NamedDataset, CsvError> {
    parse_dataset(File::open(path)?)
}

pub fn parse_dataset<R: Read>(reader: R) -> Result<NamedDataset, CsvError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| -> Result<usize, CsvError> {
        let hits: Vec<usize> = (0..header.len()).filter(|&j| header[j] == name).collect();
        match hits.as_slice() {
            [j] => Ok(*j),
            [] => Err(CsvError::Header(format!("missing required column \"{name}\""))),
            _ => Err(CsvError::Header(format!("column \"{name}\" appears more than once"))),
        }
    };
    let (iy, iw) = (find("y")?, find("w")?);
    let pred_cols: Vec<usize> = (0..header.len()).filter(|&j| j != iy && j != iw).collect();
    if pred_cols.is_empty() {
        return Err(CsvError::Header("no predictor columns".into()));
    }
    for (k, &a) in pred_cols.iter().enumerate() {
        if header[a].is_empty() {
            return Err(CsvError::Header(format!("column {} has an empty name", a + 1)));
        }
        if pred_cols[..k].iter().any(|&b| header[b] == header[a]) {
            return Err(CsvError::Header(format!("duplicate column name \"{}\"", header[a])));
        }
    }

    let p = pred_cols.len();
    let (mut y, mut w) = (Vec::new(), Vec::new());
    let mut rows: Vec<f64> = Vec::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map_or(0, |pos| pos.line());
        if record.len() != header.len() {
            return Err(CsvError::Row {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let cell = |j: usize| -> Result<f64, CsvError> {
            let raw = record[j].trim();
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CsvError::Cell {
                    line,
                    column: j + 1,
                    name: header[j].clone(),
                    message: format!("\"{raw}\" is not a finite decimal number"),
                }),
            }
        };
        y.push(cell(iy)?);
        w.push(cell(iw)?);
        for &j in &pred_cols {
            rows.push(cell(j)?);
        }
    }
    let n = y.len();
    if n < 2 {
        return Err(CsvError::Invalid(format!("need at least 2 data rows, found {n}")));
    }
    // row-major buffer to column-major
    let mut cols = vec![0.0; n * p];
    for i in 0..n {
        for j in 0..p {
            cols[j * n + i] = rows[i * p + j];
        }
    }
    let x = Matrix::from_col_major(n, p, cols).map_err(|e| CsvError::Invalid(e.to_string()))?;
    let data = Dataset::new(y, x, w).map_err(|e| CsvError::Invalid(e.to_string()))?;
    Ok(NamedDataset {
        data,
        predictors: pred_cols.iter().map(|&j| header[j].clone()).collect(),
    })
}

/// Default predictor names `x1, …, xp`.
pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

/// Writes `y,w,<predictors>`; numbers use the shortest representation that
/// parses back to the same value.
pub fn write_dataset<W: Write>(out: W, data: &NamedDataset) -> Result<(), CsvError> {
    let d = &data.data;
    if data.predictors.len() != d.p() {
        return Err(CsvError::Invalid("predictor names do not match the design width".into()));
    }
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["y".to_string(), "w".to_string()];
    header.extend(data.predictors.iter().cloned());
    wtr.write_record(&header)?;
    let mut row = Vec::with_capacity(d.p() + 2);
    for i in 0..d.n() {
        row.clear();
        row.push(d.y()[i].to_string());
        row.push(d.w()[i].to_string());
        row.extend((0..d.p()).map(|j| d.x().get(i, j).to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn export_dataset(path: &Path, data: &NamedDataset) -> Result<(), CsvError> {
    write_dataset(File::create(path)?, data)
}
