//! Benchmark harness for the sparse-PCA clustering library: simulation-grid
//! execution, dataset ingestion, and result reporting. The `spca-bench`
//! binary is a thin shell over these modules.

pub mod config;
pub mod csv_io;
pub mod grid;
pub mod report;

use thiserror::Error;

/// Harness-level errors, each mapped to a documented process exit code.
#[derive(Debug, Error)]
pub enum BenchError {
    /// Invalid configuration or input validation failure (exit code 2).
    #[error("config error: {0}")]
    Config(String),

    /// Malformed input data with its 1-based location (exit code 2).
    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },

    /// A clustering run failed numerically (exit code 3).
    #[error("pipeline error: {0}")]
    Pipeline(String),

    /// File-system failure (exit code 4).
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Parse { .. } => 2,
            BenchError::Pipeline(_) => 3,
            BenchError::Io { .. } => 4,
        }
    }

    /// Library errors keep their validation/pipeline distinction.
    pub fn from_pipeline(e: spca_cluster::Error) -> Self {
        if e.is_validation() {
            BenchError::Config(e.to_string())
        } else {
            BenchError::Pipeline(e.to_string())
        }
    }
}
