//! Experiment configuration: JSON file plus command-line overrides.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::BenchError;

/// Which clustering methods a grid run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    Spca,
    Pca,
    Both,
}

impl MethodChoice {
    pub fn methods(self) -> Vec<BenchMethod> {
        match self {
            MethodChoice::Spca => vec![BenchMethod::Spca],
            MethodChoice::Pca => vec![BenchMethod::Pca],
            MethodChoice::Both => vec![BenchMethod::Spca, BenchMethod::Pca],
        }
    }
}

/// A single method identity used in result rows and seed derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMethod {
    Spca,
    Pca,
}

impl BenchMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BenchMethod::Spca => "spca",
            BenchMethod::Pca => "pca",
        }
    }

    /// Stable identifier mixed into per-replicate seeds.
    pub fn seed_id(self) -> u64 {
        match self {
            BenchMethod::Spca => 0,
            BenchMethod::Pca => 1,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "spca" => Some(BenchMethod::Spca),
            "pca" => Some(BenchMethod::Pca),
            _ => None,
        }
    }
}

/// Initializer selection for the sparse pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitChoice {
    /// Variance thresholding with the configured `alpha`.
    Diag,
    /// Column-norm screening; the width defaults to
    /// `min(p, ceil(p^(1-v)) + ceil(log p))` per grid cell unless `s_prime`
    /// is set.
    Screen,
}

/// Normalization applied before clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizeChoice {
    Center,
    CenterScale,
}

impl NormalizeChoice {
    pub fn mode(self) -> spca_cluster::NormalizeMode {
        match self {
            NormalizeChoice::Center => spca_cluster::NormalizeMode::CenterOnly,
            NormalizeChoice::CenterScale => spca_cluster::NormalizeMode::CenterAndScale,
        }
    }
}

/// Full configuration of a simulation grid run.
///
/// The JSON schema is flat and matches these field names; command-line flags
/// override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub r_values: Vec<f64>,
    pub v_values: Vec<f64>,
    pub n_reps: usize,
    pub seed: u64,
    pub method: MethodChoice,
    pub beta: f64,
    pub delta: f64,
    pub alpha: f64,
    pub s_prime: Option<usize>,
    pub init: InitChoice,
    pub restarts: usize,
    /// 0 means "use all available cores".
    pub threads: usize,
    pub normalize: NormalizeChoice,
    /// Per-coordinate class gap override passed to the generator.
    pub tau: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 145,
            p: 1000,
            k: 2,
            r_values: vec![0.25, 0.35, 0.5, 0.65],
            v_values: vec![0.6, 0.7, 0.8],
            n_reps: 10,
            seed: 20160216,
            method: MethodChoice::Both,
            beta: 1.0,
            delta: 0.2,
            alpha: 1.0,
            s_prime: None,
            init: InitChoice::Screen,
            restarts: 10,
            threads: 0,
            normalize: NormalizeChoice::Center,
            tau: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| BenchError::Config(format!(
            "{}: {e}",
            path.display()
        )))
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.n < 2 {
            return Err(BenchError::Config("n must be >= 2".into()));
        }
        if self.p < 1 {
            return Err(BenchError::Config("p must be >= 1".into()));
        }
        if self.k < 2 {
            return Err(BenchError::Config("k must be >= 2".into()));
        }
        if self.n <= self.k {
            return Err(BenchError::Config("n must exceed k".into()));
        }
        if self.r_values.is_empty() || self.v_values.is_empty() {
            return Err(BenchError::Config("r and v lists must be non-empty".into()));
        }
        for &r in &self.r_values {
            if !(r > 0.0 && r < 1.0) {
                return Err(BenchError::Config(format!("r = {r} outside (0, 1)")));
            }
        }
        for &v in &self.v_values {
            if !(v > 0.0 && v < 1.0) {
                return Err(BenchError::Config(format!("v = {v} outside (0, 1)")));
            }
        }
        if self.n_reps < 1 {
            return Err(BenchError::Config("n_reps must be >= 1".into()));
        }
        if !(self.beta > 0.0) || !(self.delta > 0.0) || !(self.alpha > 0.0) {
            return Err(BenchError::Config(
                "beta, delta, alpha must be positive".into(),
            ));
        }
        if let Some(s) = self.s_prime {
            if s < 1 || s > self.p {
                return Err(BenchError::Config(format!(
                    "s_prime {s} outside 1..={}",
                    self.p
                )));
            }
        }
        if self.restarts < 1 {
            return Err(BenchError::Config("restarts must be >= 1".into()));
        }
        if let Some(tau) = self.tau {
            if !(tau >= 0.0) || !tau.is_finite() {
                return Err(BenchError::Config("tau must be finite and >= 0".into()));
            }
        }
        Ok(())
    }
}
