//! Parallel execution of the simulation grid.

use std::time::Instant;

use rayon::prelude::*;

use spca_cluster::engine::{default_screen_size, InitializerSpec, SpcaParams};
use spca_cluster::seeding::derive_seed;
use spca_cluster::synth::{run_replicates, ClusterMethod, GridPoint, SynthConfig};

use crate::config::{BenchMethod, ExperimentConfig, InitChoice};
use crate::BenchError;

/// Identity of one results row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub r: f64,
    pub v: f64,
    pub method: BenchMethod,
}

/// Aggregated replicate statistics for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    /// Mean error over successful replicates (NaN if none succeeded).
    pub mean_error: f64,
    /// Standard error of the mean over successful replicates.
    pub std_error: f64,
    pub n_reps: usize,
    pub failures: usize,
    /// Wall-clock seconds spent on this cell's replicates.
    pub seconds: f64,
}

/// Ordered rows of a finished grid run: methods in configuration order, then
/// `r` values, then `v` values.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<(CellKey, CellStats)>,
}

impl ResultsTable {
    pub fn get(&self, r: f64, v: f64, method: BenchMethod) -> Option<&CellStats> {
        self.rows
            .iter()
            .find(|(key, _)| {
                key.method == method && (key.r - r).abs() < 1e-12 && (key.v - v).abs() < 1e-12
            })
            .map(|(_, stats)| stats)
    }
}

/// Runs every (method, r, v) cell of the configured grid, `n_reps`
/// replicates each, in parallel over cells.
///
/// Each cell derives its own seed root as
/// `derive_seed(config.seed, [r_index, v_index, method_id])`; the replicate
/// layer splits further per replicate index. Results are therefore
/// independent of the number of worker threads, and per-replicate failures
/// are counted without disturbing any other replicate.
pub fn run_grid(config: &ExperimentConfig) -> Result<ResultsTable, BenchError> {
    config.validate()?;
    let methods = config.method.methods();
    let mut cells = Vec::new();
    for method in &methods {
        for (ri, &r) in config.r_values.iter().enumerate() {
            for (vi, &v) in config.v_values.iter().enumerate() {
                cells.push((*method, ri, r, vi, v));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;

    let rows: Vec<Result<(CellKey, CellStats), BenchError>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(method, ri, r, vi, v)| run_cell(config, method, ri, r, vi, v))
            .collect()
    });

    let mut table = Vec::with_capacity(rows.len());
    for row in rows {
        table.push(row?);
    }
    Ok(ResultsTable { rows: table })
}

fn run_cell(
    config: &ExperimentConfig,
    method: BenchMethod,
    r_index: usize,
    r: f64,
    v_index: usize,
    v: f64,
) -> Result<(CellKey, CellStats), BenchError> {
    let started = Instant::now();
    let cell_seed = derive_seed(
        config.seed,
        &[r_index as u64, v_index as u64, method.seed_id()],
    );
    let mut synth = SynthConfig::new(config.n, config.p, config.k, cell_seed);
    synth.tau_override = config.tau;
    let grid = GridPoint::new(r, v).map_err(|e| BenchError::Config(e.to_string()))?;

    let cluster_method = match method {
        BenchMethod::Spca => {
            let init = match config.init {
                InitChoice::Diag => InitializerSpec::DiagonalThreshold {
                    alpha: config.alpha,
                },
                InitChoice::Screen => InitializerSpec::ColumnScreen {
                    s_prime: config
                        .s_prime
                        .unwrap_or_else(|| default_screen_size(config.p, v)),
                },
            };
            let mut params = SpcaParams::new(config.k, init, 0);
            params.penalty.beta = config.beta;
            params.penalty.delta = config.delta;
            params.kmeans_restarts = config.restarts;
            ClusterMethod::Spca(params)
        }
        BenchMethod::Pca => ClusterMethod::PcaBaseline {
            restarts: config.restarts,
        },
    };

    let outcomes = run_replicates(&synth, &grid, config.n_reps, &cluster_method)
        .map_err(BenchError::from_pipeline)?;
    let successes: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.error_rate.as_ref().ok().copied())
        .collect();
    let failures = outcomes.len() - successes.len();
    let mean = if successes.is_empty() {
        f64::NAN
    } else {
        successes.iter().sum::<f64>() / successes.len() as f64
    };
    let std_error = if successes.len() > 1 {
        let var = successes.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / (successes.len() as f64 - 1.0);
        (var / successes.len() as f64).sqrt()
    } else {
        0.0
    };

    Ok((
        CellKey { r, v, method },
        CellStats {
            mean_error: mean,
            std_error,
            n_reps: config.n_reps,
            failures,
            seconds: started.elapsed().as_secs_f64(),
        },
    ))
}
