//! Command-line benchmark harness.
//!
//! Subcommands: `simulate` runs the synthetic grid, `cluster` labels a CSV
//! dataset, `fisher-demo` prints the full-versus-screened oracle comparison,
//! and `selftest` replays the library's quick correctness checks.
//!
//! Exit codes: 0 success, 2 configuration or validation error, 3 pipeline
//! error, 4 i/o error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

use spca_bench::config::{ExperimentConfig, InitChoice, MethodChoice, NormalizeChoice};
use spca_bench::csv_io::load_csv;
use spca_bench::grid::run_grid;
use spca_bench::report::{emit_csv, emit_markdown};
use spca_bench::BenchError;
use spca_cluster::engine::{InitializerSpec, SpcaParams};
use spca_cluster::fisher::{
    empirical_misclassification, fisher_rate_paper, fisher_rate_standard, subset_vs_full_gap,
    FeatureSplit, OracleParams,
};
use spca_cluster::metrics::matched_hamming_error;
use spca_cluster::model::normalize;

#[derive(Parser)]
#[command(
    name = "spca-bench",
    about = "Sparse-PCA clustering benchmark harness",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the synthetic simulation grid and tabulate error rates.
    Simulate(SimulateArgs),
    /// Cluster a CSV dataset (rows = samples, columns = features).
    Cluster(ClusterArgs),
    /// Print the full-versus-screened oracle discriminant comparison.
    FisherDemo(FisherDemoArgs),
    /// Run the built-in correctness checks.
    Selftest,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Signal-strength exponent; repeat for several values.
    #[arg(long = "r")]
    r_values: Vec<f64>,
    /// Sparsity exponent; repeat for several values.
    #[arg(long = "v")]
    v_values: Vec<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    method: Option<MethodFlag>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "s-prime")]
    s_prime: Option<usize>,
    #[arg(long)]
    init: Option<InitFlag>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    normalize: Option<NormalizeFlag>,
    /// Override the per-coordinate class gap.
    #[arg(long)]
    tau: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: FormatFlag,
}

#[derive(clap::Args)]
struct ClusterArgs {
    /// Input CSV path.
    input: PathBuf,
    /// Number of clusters.
    #[arg(long)]
    k: usize,
    /// Label column: 0-based index or header name; enables error reporting.
    #[arg(long)]
    labels: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long = "s-prime")]
    s_prime: Option<usize>,
    /// Initializer; screening requires --s-prime on real data.
    #[arg(long, default_value = "diag")]
    init: InitFlag,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value = "center")]
    normalize: NormalizeFlag,
    /// Output file for predicted labels (one per line); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct FisherDemoArgs {
    /// Equicorrelation of the covariance.
    #[arg(long, default_value_t = 0.6)]
    rho: f64,
    /// Ambient dimension.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Size of the leading "useful" block.
    #[arg(long, default_value_t = 1)]
    split: usize,
    #[arg(long, default_value_t = 1_000_000)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodFlag {
    Spca,
    Pca,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitFlag {
    Diag,
    Screen,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizeFlag {
    Center,
    CenterScale,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatFlag {
    Csv,
    Markdown,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Cluster(args) => cluster(args),
        Command::FisherDemo(args) => fisher_demo(args),
        Command::Selftest => selftest(),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn simulate(args: SimulateArgs) -> Result<(), BenchError> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(p) = args.p {
        config.p = p;
    }
    if let Some(k) = args.k {
        config.k = k;
    }
    if !args.r_values.is_empty() {
        config.r_values = args.r_values.clone();
    }
    if !args.v_values.is_empty() {
        config.v_values = args.v_values.clone();
    }
    if let Some(reps) = args.reps {
        config.n_reps = reps;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(method) = args.method {
        config.method = match method {
            MethodFlag::Spca => MethodChoice::Spca,
            MethodFlag::Pca => MethodChoice::Pca,
            MethodFlag::Both => MethodChoice::Both,
        };
    }
    if let Some(beta) = args.beta {
        config.beta = beta;
    }
    if let Some(delta) = args.delta {
        config.delta = delta;
    }
    if let Some(alpha) = args.alpha {
        config.alpha = alpha;
    }
    if args.s_prime.is_some() {
        config.s_prime = args.s_prime;
    }
    if let Some(init) = args.init {
        config.init = match init {
            InitFlag::Diag => InitChoice::Diag,
            InitFlag::Screen => InitChoice::Screen,
        };
    }
    if let Some(restarts) = args.restarts {
        config.restarts = restarts;
    }
    if let Some(threads) = args.threads {
        config.threads = threads;
    }
    if let Some(normalize) = args.normalize {
        config.normalize = match normalize {
            NormalizeFlag::Center => NormalizeChoice::Center,
            NormalizeFlag::CenterScale => NormalizeChoice::CenterScale,
        };
    }
    if args.tau.is_some() {
        config.tau = args.tau;
    }

    let table = run_grid(&config)?;
    let rendered = match args.format {
        FormatFlag::Csv => emit_csv(&table),
        FormatFlag::Markdown => emit_markdown(&table),
    };
    write_output(args.out.as_deref(), &rendered)
}

fn cluster(args: ClusterArgs) -> Result<(), BenchError> {
    if args.k < 2 {
        return Err(BenchError::Config("k must be >= 2".into()));
    }
    let loaded = load_csv(&args.input, args.labels.as_deref())?;
    if let Some(truth) = &loaded.labels {
        if truth.distinct_count() != args.k {
            return Err(BenchError::Config(format!(
                "label column has {} distinct values but k = {}",
                truth.distinct_count(),
                args.k
            )));
        }
    }
    let mode = match args.normalize {
        NormalizeFlag::Center => spca_cluster::NormalizeMode::CenterOnly,
        NormalizeFlag::CenterScale => spca_cluster::NormalizeMode::CenterAndScale,
    };
    let w = normalize(&loaded.data, mode).map_err(BenchError::from_pipeline)?;
    let init = match args.init {
        InitFlag::Diag => InitializerSpec::DiagonalThreshold { alpha: args.alpha },
        InitFlag::Screen => match args.s_prime {
            Some(s) => InitializerSpec::ColumnScreen { s_prime: s },
            None => {
                return Err(BenchError::Config(
                    "--init screen requires --s-prime on real data".into(),
                ))
            }
        },
    };
    let mut params = SpcaParams::new(args.k, init, args.seed);
    params.penalty.beta = args.beta;
    params.penalty.delta = args.delta;
    params.kmeans_restarts = args.restarts;

    let labels =
        spca_cluster::engine::spca_cluster(&w, &params).map_err(BenchError::from_pipeline)?;
    let mut rendered = String::new();
    for &l in labels.labels() {
        rendered.push_str(&format!("{l}\n"));
    }
    write_output(args.out.as_deref(), &rendered)?;

    if let Some(truth) = &loaded.labels {
        let report =
            matched_hamming_error(&labels, truth, args.k).map_err(BenchError::from_pipeline)?;
        eprintln!(
            "misclassified {} of {} (rate {:.6}), best permutation {:?}",
            report.hamming,
            labels.len(),
            report.rate,
            report.best_permutation
        );
    }
    Ok(())
}

fn fisher_demo(args: FisherDemoArgs) -> Result<(), BenchError> {
    let p = args.dim;
    if p < 2 {
        return Err(BenchError::Config("dim must be >= 2".into()));
    }
    if args.split < 1 || args.split >= p {
        return Err(BenchError::Config(format!(
            "split {} outside 1..{p}",
            args.split
        )));
    }
    // The equicorrelated covariance is positive definite exactly for
    // -1/(p-1) < rho < 1.
    if !(args.rho > -1.0 / (p as f64 - 1.0) && args.rho < 1.0) {
        return Err(BenchError::Config(format!(
            "rho {} makes the covariance indefinite",
            args.rho
        )));
    }
    let sigma = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { args.rho });
    let delta = DVector::from_fn(p, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let params = OracleParams::new(
        DVector::zeros(p),
        &delta * 0.5,
        &delta * -0.5,
        sigma.clone(),
        0.5,
        0.5,
    )
    .map_err(BenchError::from_pipeline)?;
    let split = FeatureSplit::new(args.split);
    let gap = subset_vs_full_gap(&delta, &sigma, &split).map_err(BenchError::from_pipeline)?;
    println!("quadratic form, all features:    {:.12}", gap.full);
    println!("quadratic form, leading block:   {:.12}", gap.subset);
    println!("gap (full - subset):             {:.12}", gap.gap);
    println!(
        "oracle rate 1 - Phi(sqrt(qf)):   {:.6e}",
        fisher_rate_paper(&delta, &sigma).map_err(BenchError::from_pipeline)?
    );
    println!(
        "equal-prior rate Phi(-sqrt/2):   {:.6}",
        fisher_rate_standard(&delta, &sigma).map_err(BenchError::from_pipeline)?
    );

    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let full = empirical_misclassification(&params, None, args.draws, &mut rng)
        .map_err(BenchError::from_pipeline)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let subset = empirical_misclassification(&params, Some(&split), args.draws, &mut rng)
        .map_err(BenchError::from_pipeline)?;
    let se = |rate: f64| -> f64 { (rate.max(1e-12) * (1.0 - rate) / args.draws as f64).sqrt() };
    println!(
        "monte carlo, all features:       {:.6} (se {:.2e})",
        full,
        se(full)
    );
    println!(
        "monte carlo, leading block:      {:.6} (se {:.2e})",
        subset,
        se(subset)
    );
    let margin = (subset - full) / (se(full).powi(2) + se(subset).powi(2)).sqrt().max(1e-300);
    println!("screened-minus-full margin:      {margin:.1} standard errors");
    println!(
        "verdict: clustering on all features is {}",
        if full <= subset { "no worse" } else { "worse" }
    );
    Ok(())
}

fn selftest() -> Result<(), BenchError> {
    use spca_cluster::engine as eng;
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool| {
        println!("selftest {name}: {}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    // Penalty formula against frozen references.
    let pen = eng::PenaltyParams::default();
    let pen1 = eng::penalty(1, 4000, 2, &pen).unwrap();
    let pen2 = eng::penalty(2, 4000, 2, &pen).unwrap();
    check(
        "penalty frozen values",
        (pen1 - 21.031835678272073).abs() < 1e-9 && (pen2 - 40.829543668889299).abs() < 1e-9,
    );

    // Exact selector versus enumeration on small instances.
    check("support selector vs enumeration", {
        use rand::{Rng, SeedableRng};
        let mut ok = true;
        for seed in 0..30u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = 1 + (rng.random::<u64>() % 8) as usize;
            let y = DMatrix::from_fn(p, 1, |_, _| (rng.random::<f64>() - 0.5) * 20.0);
            let penalties = eng::penalty_table(p, p, 2, &pen).unwrap();
            let fast = eng::select_support_with_penalties(&y, &penalties).unwrap();
            let norms: Vec<f64> = (0..p).map(|i| y[(i, 0)] * y[(i, 0)]).collect();
            let mut best = f64::INFINITY;
            for mask in 0u32..(1 << p) {
                let mut cost = 0.0;
                for (i, &nrm) in norms.iter().enumerate() {
                    if mask & (1 << i) == 0 {
                        cost += nrm;
                    }
                }
                cost += penalties[mask.count_ones() as usize];
                best = best.min(cost);
            }
            ok &= fast.objective == best;
        }
        ok
    });

    // Matched-error paths agree.
    check("matched error exhaustive vs assignment", {
        use rand::{Rng, SeedableRng};
        use spca_cluster::metrics::{matched_hamming_assignment, matched_hamming_exhaustive};
        use spca_cluster::LabelVector;
        let mut ok = true;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 2..=6usize {
            for _ in 0..40 {
                let draw = |rng: &mut ChaCha8Rng| {
                    LabelVector::new((0..25).map(|_| rng.random_range(1..=k)).collect(), k)
                        .unwrap()
                };
                let a = draw(&mut rng);
                let b = draw(&mut rng);
                ok &= matched_hamming_exhaustive(&a, &b, k).unwrap().hamming
                    == matched_hamming_assignment(&a, &b, k).unwrap().hamming;
            }
        }
        ok
    });

    // Schur-complement gap is nonnegative on random SPD covariances.
    check("screening gap nonnegative", {
        use rand::{Rng, SeedableRng};
        use rand_distr::{Distribution, StandardNormal};
        let mut ok = true;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let p = 2 + (rng.random::<u64>() % 19) as usize;
            let a = DMatrix::<f64>::from_fn(p, p, |_, _| StandardNormal.sample(&mut rng));
            let sigma = &a * a.transpose() + DMatrix::<f64>::identity(p, p) * 0.05;
            let s = 1 + (rng.random::<u64>() % (p as u64 - 1)) as usize;
            let delta = DVector::from_fn(p, |i, _| {
                if i < s {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    g
                } else {
                    0.0
                }
            });
            match subset_vs_full_gap(&delta, &sigma, &FeatureSplit::new(s)) {
                Ok(report) => ok &= report.gap >= -1e-10,
                Err(_) => ok = false,
            }
        }
        ok
    });

    // Regression-target identity on random pipelines.
    check("regression target identity", {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut ok = true;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = DMatrix::from_fn(12, 18, |_, _| StandardNormal.sample(&mut rng));
            let w = normalize(
                &spca_cluster::DataMatrix::new(x).unwrap(),
                spca_cluster::NormalizeMode::CenterOnly,
            )
            .unwrap();
            let split = eng::sample_split(&w, &mut rng);
            let g = DMatrix::from_fn(18, 1, |_, _| StandardNormal.sample(&mut rng));
            let v0 = eng::orthonormalize(&g).unwrap();
            let y = eng::regress_targets(&split, &v0).unwrap();
            let b = &split.w0 * v0.matrix();
            let q = b.clone() / b.norm();
            let alt = split.w1.tr_mul(&q) / 2f64.sqrt();
            ok &= ((&y - &alt).norm()).min((&y + &alt).norm()) < 1e-8;
        }
        ok
    });

    // Normalization is idempotent.
    check("normalization idempotent", {
        let x = DMatrix::from_fn(9, 5, |i, j| ((i * 3 + j) % 7) as f64 * 0.9 - 2.0);
        let data = spca_cluster::DataMatrix::new(x).unwrap();
        let once = normalize(&data, spca_cluster::NormalizeMode::CenterAndScale).unwrap();
        let again = normalize(
            &spca_cluster::DataMatrix::new(once.values().clone()).unwrap(),
            spca_cluster::NormalizeMode::CenterAndScale,
        )
        .unwrap();
        (once.values() - again.values()).norm() < 1e-9
    });

    if failures > 0 {
        Err(BenchError::Pipeline(format!(
            "{failures} selftest check(s) failed"
        )))
    } else {
        Ok(())
    }
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), BenchError> {
    match path {
        None => {
            print!("{content}");
            std::io::stdout().flush().map_err(|e| BenchError::Io {
                path: "<stdout>".into(),
                message: e.to_string(),
            })
        }
        Some(path) => std::fs::write(path, content).map_err(|e| BenchError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }),
    }
}
