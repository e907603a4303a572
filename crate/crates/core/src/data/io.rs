//! Dense CSV and sparse `label idx:val …` loaders.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    /// Zero-based column holding the label; `None` reads features only.
    pub label_column: Option<usize>,
    pub has_header: bool,
}

fn parse_error(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

fn parse_label(field: &str, line: usize) -> Result<i64> {
    let field = field.trim();
    if let Ok(v) = field.parse::<i64>() {
        return Ok(v);
    }
    match field.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(v as i64),
        _ => Err(parse_error(line, format!("label {field:?} is not an integer"))),
    }
}

fn parse_value(field: &str, line: usize) -> Result<f64> {
    let field = field.trim();
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_error(line, format!("{field:?} is not a finite number"))),
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn parse_csv(text: &str, name: &str, opts: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let features = record.len() - usize::from(opts.label_column.is_some());
        match width {
            None => width = Some(features),
            Some(w) if w != features => {
                return Err(parse_error(line, format!("expected {w} features, found {features}")));
            }
            _ => {}
        }
        if let Some(lc) = opts.label_column {
            if lc >= record.len() {
                return Err(parse_error(line, format!("label column {lc} out of range")));
            }
        }
        for (j, field) in record.iter().enumerate() {
            if Some(j) == opts.label_column {
                labels.push(parse_label(field, line)?);
            } else {
                values.push(parse_value(field, line)?);
            }
        }
    }
    let d = width.ok_or(Error::EmptyInput("csv file"))?;
    let n = values.len().checked_div(d).unwrap_or(labels.len());
    if n == 0 {
        return Err(Error::EmptyInput("csv file"));
    }
    let x = DMatrix::from_row_slice(n, d, &values);
    Dataset::new(x, opts.label_column.map(|_| labels), name)
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    parse_csv(&std::fs::read_to_string(path)?, &dataset_name(path), opts)
}

/// Rows `label idx:val idx:val …` with one-based indices. Blank lines and
/// lines starting with `#` are skipped. The dimension is the largest index
/// unless `dim` is given.
pub fn parse_sparse_text(text: &str, name: &str, dim: Option<usize>) -> Result<Dataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let mut parts = content.split_whitespace();
        labels.push(parse_label(parts.next().expect("non-empty line"), line)?);
        let mut row = Vec::new();
        for item in parts {
            let (idx, val) = item
                .split_once(':')
                .ok_or_else(|| parse_error(line, format!("entry {item:?} is not idx:val")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_error(line, format!("index {idx:?} is not a positive integer")))?;
            if idx == 0 {
                return Err(parse_error(line, "indices are one-based"));
            }
            max_index = max_index.max(idx);
            row.push((idx - 1, parse_value(val, line)?));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("sparse file"));
    }
    let d = match dim {
        Some(d) if d < max_index => {
            return Err(Error::param("dim", format!("{d} is smaller than the largest index {max_index}")));
        }
        Some(d) => d,
        None => max_index,
    };
    let mut x = DMatrix::zeros(rows.len(), d);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            x[(i, j)] = v;
        }
    }
    Dataset::new(x, Some(labels), name)
}

pub fn load_sparse_text(path: impl AsRef<Path>, dim: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    parse_sparse_text(&std::fs::read_to_string(path)?, &dataset_name(path), dim)
}
