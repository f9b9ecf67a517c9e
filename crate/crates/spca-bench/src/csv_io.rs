//! Numeric dataset ingestion: samples in rows, features in columns, an
//! optional label column, and an optional header auto-detected from a
//! non-numeric first row.

use std::path::Path;

use spca_cluster::{DataMatrix, LabelVector};

use crate::BenchError;

/// A parsed dataset.
#[derive(Debug)]
pub struct LoadedCsv {
    pub data: DataMatrix,
    pub labels: Option<LabelVector>,
    pub header: Option<Vec<String>>,
}

/// Reads a comma-separated numeric table.
///
/// `label_column`, when given, is either a 0-based column index (if it
/// parses as an integer) or a header name (which requires a header row).
/// Label values that already form the set `1..=K` are used verbatim;
/// anything else (strings included) is mapped to `1..=K` by first
/// appearance.
///
/// Errors name the offending location with 1-based row and column numbers;
/// the header row, when present, counts as row 1.
pub fn load_csv(path: &Path, label_column: Option<&str>) -> Result<LoadedCsv, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_csv_text(&text, label_column)
}

fn parse_csv_text(text: &str, label_column: Option<&str>) -> Result<LoadedCsv, BenchError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records: Vec<Vec<String>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| BenchError::Parse {
            row: i + 1,
            col: 1,
            message: e.to_string(),
        })?;
        records.push(record.iter().map(|s| s.trim().to_string()).collect());
    }
    if records.is_empty() {
        return Err(BenchError::Parse {
            row: 1,
            col: 1,
            message: "empty file".into(),
        });
    }

    let width = records[0].len();
    for (i, rec) in records.iter().enumerate() {
        if rec.len() != width {
            return Err(BenchError::Parse {
                row: i + 1,
                col: rec.len().min(width) + 1,
                message: format!("ragged row: {} fields, expected {width}", rec.len()),
            });
        }
    }

    // Resolve the label column to an index if it is numeric.
    let label_index_hint: Option<usize> = label_column.and_then(|s| s.parse::<usize>().ok());

    // Header detection: the first row is a header when any cell outside the
    // label column fails to parse as a number.
    let first_is_numeric = records[0]
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != label_index_hint)
        .all(|(_, cell)| cell.parse::<f64>().is_ok());
    let header: Option<Vec<String>> = if first_is_numeric {
        None
    } else {
        Some(records[0].clone())
    };

    let label_index: Option<usize> = match label_column {
        None => None,
        Some(spec) => match label_index_hint {
            Some(idx) => {
                if idx >= width {
                    return Err(BenchError::Config(format!(
                        "label column index {idx} outside 0..{width}"
                    )));
                }
                Some(idx)
            }
            None => {
                let header = header.as_ref().ok_or_else(|| {
                    BenchError::Config(format!(
                        "label column {spec:?} is a name but the file has no header row"
                    ))
                })?;
                Some(header.iter().position(|h| h == spec).ok_or_else(|| {
                    BenchError::Config(format!("label column {spec:?} not found in header"))
                })?)
            }
        },
    };

    let data_start = usize::from(header.is_some());
    let data_rows = &records[data_start..];
    if data_rows.len() < 2 {
        return Err(BenchError::Parse {
            row: data_start + data_rows.len(),
            col: 1,
            message: format!("need at least 2 data rows, found {}", data_rows.len()),
        });
    }

    let feature_cols: Vec<usize> = (0..width).filter(|j| Some(*j) != label_index).collect();
    if feature_cols.is_empty() {
        return Err(BenchError::Config("no feature columns remain".into()));
    }

    let n = data_rows.len();
    let p = feature_cols.len();
    let mut values = nalgebra::DMatrix::<f64>::zeros(n, p);
    let mut raw_labels: Vec<String> = Vec::with_capacity(if label_index.is_some() { n } else { 0 });
    for (i, rec) in data_rows.iter().enumerate() {
        for (c, &j) in feature_cols.iter().enumerate() {
            values[(i, c)] = rec[j].parse::<f64>().map_err(|e| BenchError::Parse {
                row: data_start + i + 1,
                col: j + 1,
                message: format!("non-numeric cell {:?}: {e}", rec[j]),
            })?;
        }
        if let Some(j) = label_index {
            raw_labels.push(rec[j].clone());
        }
    }

    let data = DataMatrix::new(values).map_err(|e| BenchError::Config(e.to_string()))?;
    let labels = match label_index {
        None => None,
        Some(_) => Some(map_labels(&raw_labels)?),
    };
    Ok(LoadedCsv {
        data,
        labels,
        header,
    })
}

/// Integer labels already forming `1..=K` pass through; everything else is
/// mapped by first appearance.
fn map_labels(raw: &[String]) -> Result<LabelVector, BenchError> {
    let as_ints: Option<Vec<usize>> = raw.iter().map(|s| s.parse::<usize>().ok()).collect();
    if let Some(ints) = as_ints {
        let max = ints.iter().copied().max().unwrap_or(0);
        let mut seen = vec![false; max + 1];
        for &l in &ints {
            if l >= 1 {
                seen[l] = true;
            }
        }
        let contiguous = max >= 1
            && ints.iter().all(|&l| l >= 1)
            && (1..=max).all(|l| seen[l]);
        if contiguous {
            return LabelVector::new(ints, max).map_err(|e| BenchError::Config(e.to_string()));
        }
    }
    let mut order: Vec<&String> = Vec::new();
    let mapped: Vec<usize> = raw
        .iter()
        .map(|s| match order.iter().position(|o| *o == s) {
            Some(idx) => idx + 1,
            None => {
                order.push(s);
                order.len()
            }
        })
        .collect();
    LabelVector::new(mapped, order.len()).map_err(|e| BenchError::Config(e.to_string()))
}
