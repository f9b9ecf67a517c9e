//! Result serialization: fixed-precision CSV and a grid-shaped markdown
//! table.

use crate::config::BenchMethod;
use crate::grid::{CellKey, CellStats, ResultsTable};
use crate::BenchError;

pub const CSV_HEADER: &str = "r,v,method,mean_error,std_error,n_reps,failures,seconds";

/// Fixed-point CSV with six decimals on every real-valued column.
pub fn emit_csv(table: &ResultsTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (key, stats) in &table.rows {
        out.push_str(&format!(
            "{:.6},{:.6},{},{:.6},{:.6},{},{},{:.6}\n",
            key.r,
            key.v,
            key.method.as_str(),
            stats.mean_error,
            stats.std_error,
            stats.n_reps,
            stats.failures,
            stats.seconds
        ));
    }
    out
}

/// Parses a CSV produced by [`emit_csv`]; the round trip is lossless at the
/// printed precision.
pub fn parse_csv(text: &str) -> Result<ResultsTable, BenchError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(BenchError::Parse {
                row: 1,
                col: 1,
                message: format!("unexpected header {other:?}"),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row = idx + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(BenchError::Parse {
                row,
                col: fields.len(),
                message: "expected 8 fields".into(),
            });
        }
        let num = |col: usize| -> Result<f64, BenchError> {
            fields[col].parse::<f64>().map_err(|e| BenchError::Parse {
                row,
                col: col + 1,
                message: e.to_string(),
            })
        };
        let int = |col: usize| -> Result<usize, BenchError> {
            fields[col].parse::<usize>().map_err(|e| BenchError::Parse {
                row,
                col: col + 1,
                message: e.to_string(),
            })
        };
        let method = BenchMethod::parse(fields[2]).ok_or_else(|| BenchError::Parse {
            row,
            col: 3,
            message: format!("unknown method {:?}", fields[2]),
        })?;
        rows.push((
            CellKey {
                r: num(0)?,
                v: num(1)?,
                method,
            },
            CellStats {
                mean_error: num(3)?,
                std_error: num(4)?,
                n_reps: int(5)?,
                failures: int(6)?,
                seconds: num(7)?,
            },
        ));
    }
    Ok(ResultsTable { rows })
}

/// Markdown layout mirroring the benchmark grid: one section per method,
/// signal strengths as rows and sparsity exponents as columns, in the order
/// they appear in the results.
pub fn emit_markdown(table: &ResultsTable) -> String {
    let mut methods: Vec<BenchMethod> = Vec::new();
    let mut r_values: Vec<f64> = Vec::new();
    let mut v_values: Vec<f64> = Vec::new();
    for (key, _) in &table.rows {
        if !methods.contains(&key.method) {
            methods.push(key.method);
        }
        if !r_values.iter().any(|&r| (r - key.r).abs() < 1e-12) {
            r_values.push(key.r);
        }
        if !v_values.iter().any(|&v| (v - key.v).abs() < 1e-12) {
            v_values.push(key.v);
        }
    }

    let mut out = String::new();
    for method in methods {
        out.push_str(&format!("## {}\n\n", method.as_str()));
        out.push_str("| r \\ v |");
        for &v in &v_values {
            out.push_str(&format!(" {v} |"));
        }
        out.push('\n');
        out.push_str("|---|");
        for _ in &v_values {
            out.push_str("---|");
        }
        out.push('\n');
        for &r in &r_values {
            out.push_str(&format!("| {r} |"));
            for &v in &v_values {
                match table.get(r, v, method) {
                    Some(stats) => out.push_str(&format!(" {:.4} |", stats.mean_error)),
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
