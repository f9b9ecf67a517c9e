//! The sparse clustering pipeline.
//!
//! Stages, in order: noise-injection sample splitting, a row-sparse initial
//! basis from one split, a regression reduction against the other split,
//! exact penalized row selection, orthonormalization of the kept rows,
//! projection of the data onto the estimated loadings, and k-means on the
//! resulting sample embedding.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kmeans::{kmeans, KMeansResult, DEFAULT_MAX_ITER};
use crate::linalg;
use crate::model::{LabelVector, NormalizedMatrix, SubspaceBasis};

/// The two noise-injected copies of a normalized data matrix.
///
/// With fresh standard Gaussian noise `Z`, the copies are `w0 = w + Z` and
/// `w1 = w - Z`, so `(w0 + w1) / 2` recovers the input exactly up to
/// roundoff and the two copies are conditionally independent given the data.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub w0: DMatrix<f64>,
    pub w1: DMatrix<f64>,
}

/// Scale and inflation parameters of the row-selection penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    pub beta: f64,
    pub delta: f64,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        Self {
            beta: 1.0,
            delta: 0.2,
        }
    }
}

impl PenaltyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument("beta must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument("delta must be positive".into()));
        }
        Ok(())
    }
}

/// How the initial row-sparse basis is produced.
#[derive(Debug, Clone)]
pub enum InitializerSpec {
    /// Keep features whose sample variance exceeds `1 + alpha *
    /// sqrt(log(p) / n)`; calibrated for roughly unit-variance noise.
    DiagonalThreshold { alpha: f64 },
    /// Keep the `s_prime` columns of largest Euclidean norm.
    ColumnScreen { s_prime: usize },
    /// Use a caller-provided basis verbatim (diagnostics and oracles).
    Oracle { basis: SubspaceBasis },
}

/// Full parameter set for [`spca_cluster`].
#[derive(Debug, Clone)]
pub struct SpcaParams {
    /// Number of clusters; the embedding has `k - 1` dimensions.
    pub k: usize,
    pub penalty: PenaltyParams,
    pub init: InitializerSpec,
    pub kmeans_restarts: usize,
    /// Seed for the pipeline's private RNG stream.
    pub seed: u64,
}

impl SpcaParams {
    pub fn new(k: usize, init: InitializerSpec, seed: u64) -> Self {
        Self {
            k,
            penalty: PenaltyParams::default(),
            init,
            kmeans_restarts: crate::kmeans::DEFAULT_RESTARTS,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidArgument("k must be >= 2".into()));
        }
        self.penalty.validate()?;
        if self.kmeans_restarts < 1 {
            return Err(Error::InvalidArgument("restarts must be >= 1".into()));
        }
        match &self.init {
            InitializerSpec::DiagonalThreshold { alpha } => {
                if !(*alpha > 0.0) {
                    return Err(Error::InvalidArgument("alpha must be positive".into()));
                }
            }
            InitializerSpec::ColumnScreen { s_prime } => {
                if *s_prime < 1 {
                    return Err(Error::InvalidArgument("s_prime must be >= 1".into()));
                }
            }
            InitializerSpec::Oracle { basis } => {
                if basis.rank() != self.k - 1 {
                    return Err(Error::InvalidArgument(format!(
                        "oracle basis has rank {}, expected {}",
                        basis.rank(),
                        self.k - 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Adds and subtracts one fresh matrix of i.i.d. standard normal noise,
/// drawn row-major from `rng`.
pub fn sample_split<R: Rng + ?Sized>(w: &NormalizedMatrix, rng: &mut R) -> SplitPair {
    let (n, p) = (w.n_samples(), w.n_features());
    let mut w0 = w.values().clone();
    let mut w1 = w.values().clone();
    for i in 0..n {
        for j in 0..p {
            let z: f64 = StandardNormal.sample(rng);
            w0[(i, j)] += z;
            w1[(i, j)] -= z;
        }
    }
    SplitPair { w0, w1 }
}

/// Screening threshold and basis extraction for the variance initializer.
///
/// Features with sample variance at least `1 + alpha * sqrt(log(p) / n)` are
/// kept; if fewer than `k - 1` survive, the top `k - 1 + ceil(log p)`
/// columns by variance are used instead. The returned basis holds the top
/// `k - 1` right singular vectors of the restricted matrix, zero-padded back
/// to all `p` rows.
pub fn init_diagonal_threshold(w0: &DMatrix<f64>, alpha: f64, k: usize) -> Result<SubspaceBasis> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }
    if k < 2 {
        return Err(Error::InvalidArgument("k must be >= 2".into()));
    }
    let (n, p) = (w0.nrows(), w0.ncols());
    let variances = linalg::column_sample_variances(w0);
    let threshold = 1.0 + alpha * ((p as f64).ln() / n as f64).sqrt();
    let mut selected: Vec<usize> = (0..p).filter(|&j| variances[j] >= threshold).collect();
    if selected.len() < k - 1 {
        let want = (k - 1 + (p as f64).ln().ceil() as usize).min(p);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| variances[b].total_cmp(&variances[a]).then(a.cmp(&b)));
        selected = order[..want].to_vec();
        selected.sort_unstable();
    }
    if selected.len() < k - 1 {
        return Err(Error::InitFailure(format!(
            "only {} features survive screening, need {}",
            selected.len(),
            k - 1
        )));
    }
    restricted_right_basis(w0, &selected, k - 1)
}

/// Norm-based screening: keep the `s_prime` columns with the largest
/// Euclidean norms, then take the top `k - 1` right singular vectors of the
/// restricted matrix, zero-padded. The support of the result has at most
/// `s_prime` rows.
pub fn init_column_screen(w0: &DMatrix<f64>, s_prime: usize, k: usize) -> Result<SubspaceBasis> {
    let (n, p) = (w0.nrows(), w0.ncols());
    if s_prime < 1 || s_prime > p {
        return Err(Error::InvalidArgument(format!(
            "s_prime {s_prime} outside 1..={p}"
        )));
    }
    if k < 2 || k - 1 > n.min(s_prime) {
        return Err(Error::InvalidArgument(format!(
            "k - 1 = {} exceeds min(n, s_prime) = {}",
            k - 1,
            n.min(s_prime)
        )));
    }
    let norms: Vec<f64> = (0..p).map(|j| w0.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let mut selected = order[..s_prime].to_vec();
    selected.sort_unstable();
    restricted_right_basis(w0, &selected, k - 1)
}

fn restricted_right_basis(
    w0: &DMatrix<f64>,
    selected: &[usize],
    rank: usize,
) -> Result<SubspaceBasis> {
    let restricted = w0.select_columns(selected.iter());
    let (v, sigmas) = linalg::leading_right_singular(&restricted, rank);
    if linalg::rank_from_sigmas(&sigmas) < rank || v.ncols() < rank {
        return Err(Error::InitFailure(format!(
            "screened matrix has rank below {rank}"
        )));
    }
    let mut padded = DMatrix::zeros(w0.ncols(), rank);
    for (row, &j) in selected.iter().enumerate() {
        for c in 0..rank {
            padded[(j, c)] = v[(row, c)];
        }
    }
    SubspaceBasis::new(padded)
}

/// Default screen size used for synthetic runs where the sparsity exponent
/// is known: `min(p, ceil(p^(1-v)) + ceil(log p))`.
pub fn default_screen_size(p: usize, v: f64) -> usize {
    let s = (p as f64).powf(1.0 - v).ceil() + (p as f64).ln().ceil();
    (s as usize).clamp(1, p)
}

/// Row-selection penalty: `pen(k) = (1 + delta)^2 * sum_{i=1..k} t_i` with
/// `t_i = (K - 1) + sqrt(2 (K - 1) beta log(e p / i)) + beta log(e p / i)`
/// (natural logarithm). `pen(0) = 0` and the sequence is strictly
/// increasing.
pub fn penalty(rows: usize, p: usize, k: usize, params: &PenaltyParams) -> Result<f64> {
    let table = penalty_table(rows, p, k, params)?;
    Ok(*table.last().expect("table is never empty"))
}

/// All penalty values `pen(0..=rows)` in one pass; the summation order is
/// fixed so `penalty` and the table agree bitwise.
pub fn penalty_table(rows: usize, p: usize, k: usize, params: &PenaltyParams) -> Result<Vec<f64>> {
    params.validate()?;
    if k < 2 {
        return Err(Error::InvalidArgument("k must be >= 2".into()));
    }
    if p < 1 {
        return Err(Error::InvalidArgument("p must be >= 1".into()));
    }
    if rows > p {
        return Err(Error::InvalidArgument(format!(
            "support size {rows} exceeds p = {p}"
        )));
    }
    let km1 = (k - 1) as f64;
    let inflation = (1.0 + params.delta) * (1.0 + params.delta);
    let mut table = Vec::with_capacity(rows + 1);
    table.push(0.0);
    let mut sum = 0.0;
    for i in 1..=rows {
        let log_term = 1.0 + (p as f64).ln() - (i as f64).ln();
        let t = km1 + (2.0 * km1 * params.beta * log_term).sqrt() + params.beta * log_term;
        sum += t;
        table.push(inflation * sum);
    }
    Ok(table)
}

/// Regression targets for support selection.
///
/// With `b = w0 * v0` and its SVD `b = q c r'`, the target matrix is
/// `y = (w1' * w0 * v0 * r * c^{-1}) / sqrt(2)`, which equals
/// `(w1' * q) / sqrt(2)`; the computation follows the first form and tests
/// pin the identity. Fails if `b` is numerically rank deficient.
pub fn regress_targets(split: &SplitPair, v0: &SubspaceBasis) -> Result<DMatrix<f64>> {
    if v0.dim() != split.w0.ncols() {
        return Err(Error::InvalidArgument(format!(
            "basis dimension {} does not match feature count {}",
            v0.dim(),
            split.w0.ncols()
        )));
    }
    let b = &split.w0 * v0.matrix();
    let svd = b.clone().svd(true, true);
    let sigmas: Vec<f64> = svd.singular_values.iter().copied().collect();
    if linalg::rank_from_sigmas(&sigmas) < v0.rank() {
        return Err(Error::InitRankDeficient);
    }
    let r = svd.v_t.as_ref().expect("v requested").transpose();
    let mut br = b * r;
    for c in 0..br.ncols() {
        br.column_mut(c).scale_mut(1.0 / sigmas[c]);
    }
    Ok(split.w1.tr_mul(&br) / 2f64.sqrt())
}

/// Result of the exact penalized row selection.
#[derive(Debug, Clone)]
pub struct SupportSelection {
    /// Input rows copied on the kept support, zero elsewhere.
    pub theta: DMatrix<f64>,
    /// Kept row indices, ascending.
    pub support: Vec<usize>,
    /// Minimized objective `sum_{i not kept} ||y_i||^2 + pen(|support|)`.
    pub objective: f64,
}

/// Exact minimizer of `||y - theta||_F^2 + pen(|rows(theta)|)`.
///
/// For a fixed support the optimum copies the corresponding rows of `y`, so
/// the search reduces to choosing how many of the largest-norm rows to keep.
/// Row-norm ties break toward the smaller index and objective ties toward
/// the smaller support.
pub fn select_support(y: &DMatrix<f64>, k: usize, params: &PenaltyParams) -> Result<SupportSelection> {
    if y.ncols() + 1 != k {
        return Err(Error::InvalidArgument(format!(
            "y has {} columns, expected k - 1 = {}",
            y.ncols(),
            k - 1
        )));
    }
    let penalties = penalty_table(y.nrows(), y.nrows(), k, params)?;
    select_support_with_penalties(y, &penalties)
}

/// [`select_support`] with an explicit penalty table `pen(0..=p)`.
///
/// Objectives are accumulated by summing the excluded rows' squared norms in
/// ascending row order before adding the penalty, so independent
/// enumeration-based checks can reproduce them bit for bit.
pub fn select_support_with_penalties(
    y: &DMatrix<f64>,
    penalties: &[f64],
) -> Result<SupportSelection> {
    let p = y.nrows();
    if penalties.len() != p + 1 {
        return Err(Error::InvalidArgument(format!(
            "penalty table has {} entries, expected {}",
            penalties.len(),
            p + 1
        )));
    }
    let norms_sq: Vec<f64> = (0..p)
        .map(|i| y.row(i).iter().map(|v| v * v).sum())
        .collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| norms_sq[b].total_cmp(&norms_sq[a]).then(a.cmp(&b)));

    let mut kept = vec![false; p];
    let mut best_k = 0;
    let mut best_obj = objective_for(&norms_sq, &kept, penalties[0]);
    for size in 1..=p {
        kept[order[size - 1]] = true;
        let obj = objective_for(&norms_sq, &kept, penalties[size]);
        if obj < best_obj {
            best_obj = obj;
            best_k = size;
        }
    }

    let mut support: Vec<usize> = order[..best_k].to_vec();
    support.sort_unstable();
    let mut theta = DMatrix::zeros(p, y.ncols());
    for &i in &support {
        for j in 0..y.ncols() {
            theta[(i, j)] = y[(i, j)];
        }
    }
    Ok(SupportSelection {
        theta,
        support,
        objective: best_obj,
    })
}

fn objective_for(norms_sq: &[f64], kept: &[bool], penalty: f64) -> f64 {
    let mut sum = 0.0;
    for (i, &k) in kept.iter().enumerate() {
        if !k {
            sum += norms_sq[i];
        }
    }
    sum + penalty
}

/// Orthonormalizes the columns of a row-sparse matrix inside its nonzero-row
/// block, preserving the support. Fails with
/// [`Error::RankDeficientSelection`] when the block has rank below its
/// column count (in particular for the zero matrix).
pub fn orthonormalize(theta: &DMatrix<f64>) -> Result<SubspaceBasis> {
    let rank = theta.ncols();
    let support: Vec<usize> = (0..theta.nrows())
        .filter(|&i| theta.row(i).iter().any(|&v| v != 0.0))
        .collect();
    if support.len() < rank {
        return Err(Error::RankDeficientSelection);
    }
    let block = theta.select_rows(support.iter());
    let sigmas: Vec<f64> = block.singular_values().iter().copied().collect();
    if linalg::rank_from_sigmas(&sigmas) < rank {
        return Err(Error::RankDeficientSelection);
    }
    let q = linalg::orthonormal_columns(&block);
    let mut padded = DMatrix::zeros(theta.nrows(), rank);
    for (row, &i) in support.iter().enumerate() {
        for c in 0..rank {
            padded[(i, c)] = q[(row, c)];
        }
    }
    SubspaceBasis::new(padded)
}

/// Orthonormal basis of `span(w * v_hat)`, the sample-side embedding whose
/// rows are clustered. Fails with [`Error::RankDeficientProjection`] when
/// the projection loses rank.
pub fn sample_embedding(w: &NormalizedMatrix, v_hat: &SubspaceBasis) -> Result<SubspaceBasis> {
    if v_hat.dim() != w.n_features() {
        return Err(Error::InvalidArgument(format!(
            "basis dimension {} does not match feature count {}",
            v_hat.dim(),
            w.n_features()
        )));
    }
    let projected = w.values() * v_hat.matrix();
    let sigmas: Vec<f64> = projected.singular_values().iter().copied().collect();
    if linalg::rank_from_sigmas(&sigmas) < v_hat.rank() {
        return Err(Error::RankDeficientProjection);
    }
    SubspaceBasis::new(linalg::orthonormal_columns(&projected))
}

/// Everything a pipeline run produces, kept for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct SpcaRun {
    pub labels: LabelVector,
    /// Initial row-sparse basis from the first split copy.
    pub initial_basis: SubspaceBasis,
    /// Orthonormalized loadings actually used for the embedding.
    pub loadings: SubspaceBasis,
    /// Sample-side orthonormal embedding whose rows were clustered.
    pub embedding: SubspaceBasis,
    /// Rows kept by the penalized selection (may be empty).
    pub selected_support: Vec<usize>,
    /// True when the selection was empty or rank deficient and the
    /// initializer basis was used as the loadings instead.
    pub fell_back_to_initializer: bool,
    pub kmeans: KMeansResult,
}

/// Runs the full pipeline with a caller-supplied RNG stream.
///
/// The stream drives, in order, the noise injection of the sample split and
/// the k-means restarts. When the penalized selection keeps no usable rows
/// (the weak-signal regime) the pipeline clusters on the initializer basis
/// instead of failing; rank deficiencies elsewhere still surface as errors.
///
/// When the variance-threshold initializer is used, its input is the first
/// split copy rescaled by `1/sqrt(2)`: splitting doubles the noise variance,
/// and the rescale restores the unit-noise calibration the threshold
/// assumes. Singular vectors are scale invariant, so only the screening is
/// affected.
pub fn spca_cluster_with_rng<R: Rng + ?Sized>(
    w: &NormalizedMatrix,
    params: &SpcaParams,
    rng: &mut R,
) -> Result<SpcaRun> {
    params.validate()?;
    let (n, p) = (w.n_samples(), w.n_features());
    if n <= params.k {
        return Err(Error::InvalidArgument(format!(
            "need more than k = {} samples, got {n}",
            params.k
        )));
    }
    let split = sample_split(w, rng);
    let v0 = match &params.init {
        InitializerSpec::DiagonalThreshold { alpha } => {
            let rescaled = &split.w0 * (1.0 / 2f64.sqrt());
            init_diagonal_threshold(&rescaled, *alpha, params.k)?
        }
        InitializerSpec::ColumnScreen { s_prime } => {
            init_column_screen(&split.w0, (*s_prime).min(p), params.k)?
        }
        InitializerSpec::Oracle { basis } => {
            if basis.dim() != p {
                return Err(Error::InvalidArgument(
                    "oracle basis dimension does not match data".into(),
                ));
            }
            basis.clone()
        }
    };
    let y = regress_targets(&split, &v0)?;
    let selection = select_support(&y, params.k, &params.penalty)?;
    let (loadings, fell_back) = match orthonormalize(&selection.theta) {
        Ok(v) => (v, false),
        Err(Error::RankDeficientSelection) => (v0.clone(), true),
        Err(e) => return Err(e),
    };
    let embedding = sample_embedding(w, &loadings)?;
    let embedding_rows = embedding.matrix().clone();
    let km = kmeans(
        &embedding_rows,
        params.k,
        params.kmeans_restarts,
        DEFAULT_MAX_ITER,
        rng,
    )?;
    Ok(SpcaRun {
        labels: km.labels.clone(),
        initial_basis: v0,
        loadings,
        embedding,
        selected_support: selection.support,
        fell_back_to_initializer: fell_back,
        kmeans: km,
    })
}

/// Seeded convenience wrapper: builds a ChaCha8 stream from `params.seed`
/// and returns only the labels. Identical inputs give identical labels.
pub fn spca_cluster(w: &NormalizedMatrix, params: &SpcaParams) -> Result<LabelVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    Ok(spca_cluster_with_rng(w, params, &mut rng)?.labels)
}

/// Seeded wrapper returning the full diagnostics of the run.
pub fn spca_cluster_detailed(w: &NormalizedMatrix, params: &SpcaParams) -> Result<SpcaRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    spca_cluster_with_rng(w, params, &mut rng)
}

/// Dense spectral baseline: k-means on the rows of the top `k - 1` left
/// singular vectors of the data, with no feature selection.
pub fn pca_cluster_baseline<R: Rng + ?Sized>(
    w: &NormalizedMatrix,
    k: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<LabelVector> {
    if k < 2 {
        return Err(Error::InvalidArgument("k must be >= 2".into()));
    }
    if w.n_samples() <= k {
        return Err(Error::InvalidArgument(format!(
            "need more than k = {k} samples, got {}",
            w.n_samples()
        )));
    }
    let (u, sigmas) = linalg::leading_left_singular(w.values(), k - 1);
    if linalg::rank_from_sigmas(&sigmas) < k - 1 {
        return Err(Error::RankDeficientProjection);
    }
    let km = kmeans(&u, k, restarts, DEFAULT_MAX_ITER, rng)?;
    Ok(km.labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::std_normal_cdf;
    use crate::metrics::{matched_hamming_error, sin_theta_distance};
    use crate::model::{normalize, DataMatrix, NormalizeMode};
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, DVector};
    use proptest::prelude::*;

    fn seeded(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn normalized_from(values: DMatrix<f64>) -> NormalizedMatrix {
        normalize(&DataMatrix::new(values).unwrap(), NormalizeMode::CenterOnly).unwrap()
    }

    fn random_normalized(n: usize, p: usize, seed: u64) -> NormalizedMatrix {
        let mut rng = seeded(seed);
        normalized_from(DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng)))
    }

    fn random_orthonormal(p: usize, r: usize, seed: u64) -> SubspaceBasis {
        let mut rng = seeded(seed);
        let g = DMatrix::from_fn(p, r, |_, _| StandardNormal.sample(&mut rng));
        SubspaceBasis::new(linalg::orthonormal_columns(&g)).unwrap()
    }

    #[test]
    fn split_halves_average_back_to_the_input() {
        let w = random_normalized(9, 14, 3);
        let split = sample_split(&w, &mut seeded(17));
        let avg = (&split.w0 + &split.w1) * 0.5;
        let max_err = (&avg - w.values()).abs().max();
        assert!(max_err <= 1e-12);
    }

    #[test]
    fn splitting_zero_gives_opposite_copies() {
        let w = normalized_from(DMatrix::zeros(5, 6));
        let split = sample_split(&w, &mut seeded(4));
        assert_relative_eq!((&split.w0 + &split.w1).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn recovered_noise_passes_a_ks_test() {
        // (w0 - w1) / 2 recovers the injected noise; at alpha = 0.01 the
        // asymptotic Kolmogorov-Smirnov critical value is 1.6276 / sqrt(N).
        let w = random_normalized(100, 100, 8);
        let split = sample_split(&w, &mut seeded(9));
        let noise = (&split.w0 - &split.w1) * 0.5;
        let mut values: Vec<f64> = noise.iter().copied().collect();
        values.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        let mut d = 0.0f64;
        for (i, &x) in values.iter().enumerate() {
            let cdf = std_normal_cdf(x);
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
        }
        assert!(d < 1.6276236115189504 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn penalty_matches_frozen_values() {
        let params = PenaltyParams::default();
        assert_relative_eq!(penalty(0, 4000, 2, &params).unwrap(), 0.0);
        // High-precision references for (K = 2, beta = 1, delta = 0.2,
        // p = 4000), computed independently with 30-digit arithmetic.
        assert_relative_eq!(
            penalty(1, 4000, 2, &params).unwrap(),
            21.031_835_678_272_073,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            penalty(2, 4000, 2, &params).unwrap(),
            40.829_543_668_889_299,
            max_relative = 1e-12
        );
    }

    #[test]
    fn penalty_is_strictly_increasing_and_bounds_checked() {
        let params = PenaltyParams::default();
        let table = penalty_table(50, 50, 3, &params).unwrap();
        for k in 1..table.len() {
            assert!(table[k] > table[k - 1]);
        }
        assert!(matches!(
            penalty(51, 50, 2, &params),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn diagonal_threshold_finds_planted_variance() {
        let (n, p) = (200, 50);
        let mut rng = seeded(21);
        let mut w0 = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        for j in 0..2 {
            for i in 0..n {
                w0[(i, j)] *= 2.0; // variance 4 on the planted features
            }
        }
        let basis = init_diagonal_threshold(&w0, 1.0, 2).unwrap();
        let support = basis.support();
        assert!(support.contains(&0) && support.contains(&1));
    }

    #[test]
    fn diagonal_threshold_falls_back_when_nothing_passes() {
        let w0 = {
            let mut rng = seeded(22);
            DMatrix::from_fn(60, 50, |_, _| StandardNormal.sample(&mut rng))
        };
        let basis = init_diagonal_threshold(&w0, 1e9, 2).unwrap();
        assert!(basis.orthonormality_defect() < 1e-10);
        let cap = 1 + (50f64).ln().ceil() as usize;
        assert!(basis.support().len() <= cap);
    }

    #[test]
    fn diagonal_threshold_recovers_a_noiseless_direction() {
        // Signal on five features only; all other columns are exactly zero,
        // so the screen keeps the support and the basis matches the true
        // direction up to sign.
        let (n, p, s) = (40, 30, 5);
        let mut direction = DVector::zeros(p);
        for j in 0..s {
            direction[j] = (j + 1) as f64;
        }
        direction /= direction.norm();
        let mut w0 = DMatrix::zeros(n, p);
        for i in 0..n {
            let sign = if i % 2 == 0 { 1.5 } else { -1.5 };
            for j in 0..s {
                w0[(i, j)] = sign * direction[j] * 3.0;
            }
        }
        let v0 = init_diagonal_threshold(&w0, 0.01, 2).unwrap();
        let truth = SubspaceBasis::new(DMatrix::from_column_slice(p, 1, direction.as_slice()))
            .unwrap();
        let overlap = v0.matrix().tr_mul(truth.matrix())[(0, 0)].abs();
        assert!(overlap >= 0.5, "singular overlap {overlap}");
        assert!(v0.support().iter().all(|&j| j < s));
    }

    #[test]
    fn column_screen_with_full_width_matches_plain_svd() {
        let mut rng = seeded(31);
        let w0 = DMatrix::from_fn(30, 20, |_, _| StandardNormal.sample(&mut rng));
        let v0 = init_column_screen(&w0, 20, 3).unwrap();
        let svd = w0.clone().svd(false, true);
        let full = svd.v_t.unwrap().rows(0, 2).transpose();
        let reference = SubspaceBasis::new(full).unwrap();
        assert!(sin_theta_distance(&v0, &reference).unwrap() < 1e-6);
    }

    #[test]
    fn column_screen_keeps_loud_columns() {
        let (n, p) = (200, 60);
        for seed in 40..60u64 {
            let mut rng = seeded(seed);
            let mut w0 = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
            for j in 0..10 {
                for i in 0..n {
                    w0[(i, j)] *= 3.0;
                }
            }
            let v0 = init_column_screen(&w0, 12, 2).unwrap();
            let support = v0.support();
            assert!(support.len() <= 12);
            // The screened set must contain every loud column.
            let mut norms: Vec<f64> = (0..p).map(|j| w0.column(j).norm()).collect();
            norms.sort_by(f64::total_cmp);
            let cutoff = norms[p - 12];
            for j in 0..10 {
                assert!(w0.column(j).norm() >= cutoff, "seed {seed} column {j}");
            }
        }
    }

    #[test]
    fn column_screen_minimal_width_is_the_top_columns() {
        let mut w0 = DMatrix::zeros(10, 6);
        for j in 0..6 {
            for i in 0..10 {
                w0[(i, j)] = ((i + 1) as f64 * 0.1) * (j as f64 + 1.0);
            }
        }
        // Norms increase with the column index; k - 1 = 1 keeps column 5.
        let v0 = init_column_screen(&w0, 1, 2).unwrap();
        assert_eq!(v0.support(), vec![5]);
    }

    #[test]
    fn regression_targets_satisfy_the_projection_identity() {
        for seed in 0..20u64 {
            let k = 2 + (seed % 2) as usize;
            let w = random_normalized(15, 25, 100 + seed);
            let split = sample_split(&w, &mut seeded(200 + seed));
            let v0 = random_orthonormal(25, k - 1, 300 + seed);
            let y = regress_targets(&split, &v0).unwrap();
            // Independent route: y = w1' q / sqrt(2) with q from the SVD.
            let b = &split.w0 * v0.matrix();
            let svd = b.svd(true, false);
            let q = svd.u.unwrap();
            let alt = split.w1.tr_mul(&q) / 2f64.sqrt();
            let direct = (&y - &alt).norm();
            let flipped = (&y + &alt).norm();
            if k == 2 {
                assert!(direct.min(flipped) < 1e-8, "seed {seed}");
            } else {
                // Columns may differ by signs; compare spans instead.
                let by = SubspaceBasis::new(linalg::orthonormal_columns(&y)).unwrap();
                let ba = SubspaceBasis::new(linalg::orthonormal_columns(&alt)).unwrap();
                assert!(sin_theta_distance(&by, &ba).unwrap() < 1e-8, "seed {seed}");
            }
        }
    }

    #[test]
    fn regression_targets_span_ignores_basis_rotation() {
        let w = random_normalized(12, 18, 77);
        let split = sample_split(&w, &mut seeded(78));
        let v0 = random_orthonormal(18, 2, 79);
        let phi = 0.9f64;
        let rot = DMatrix::from_row_slice(2, 2, &[phi.cos(), -phi.sin(), phi.sin(), phi.cos()]);
        let v0_rot = SubspaceBasis::new(v0.matrix() * rot).unwrap();
        let y1 = regress_targets(&split, &v0).unwrap();
        let y2 = regress_targets(&split, &v0_rot).unwrap();
        let b1 = SubspaceBasis::new(linalg::orthonormal_columns(&y1)).unwrap();
        let b2 = SubspaceBasis::new(linalg::orthonormal_columns(&y2)).unwrap();
        assert!(sin_theta_distance(&b1, &b2).unwrap() < 1e-8);
    }

    #[test]
    fn regression_targets_match_a_straight_line_evaluation() {
        // 4 x 3 instance with a one-column basis: the target reduces to
        // w1' (w0 v0) / (||w0 v0|| sqrt(2)) up to the SVD's sign.
        let w0 = dmatrix![
            1.0, 2.0, -1.0;
            0.5, -1.0, 3.0;
            2.0, 0.0, 1.0;
            -1.5, 1.0, 0.5
        ];
        let w1 = dmatrix![
            0.0, 1.0, -2.0;
            1.5, -0.5, 2.0;
            1.0, 1.0, 0.0;
            -0.5, 2.0, 1.5
        ];
        let v0 = SubspaceBasis::new(DMatrix::from_column_slice(3, 1, &[0.6, 0.8, 0.0])).unwrap();
        let split = SplitPair {
            w0: w0.clone(),
            w1: w1.clone(),
        };
        let y = regress_targets(&split, &v0).unwrap();
        let b = &w0 * v0.matrix();
        let manual = w1.tr_mul(&b) / (b.norm() * 2f64.sqrt());
        let direct = (&y - &manual).norm();
        let flipped = (&y + &manual).norm();
        assert!(direct.min(flipped) < 1e-12);
    }

    #[test]
    fn select_support_worked_example() {
        // Row squared norms (9, 4, 1) against penalties (0, 5, 9, 12):
        // costs are (14, 10, 10, 12); the size tie breaks toward one row.
        let y = DMatrix::from_column_slice(3, 1, &[3.0, 2.0, 1.0]);
        let sel = select_support_with_penalties(&y, &[0.0, 5.0, 9.0, 12.0]).unwrap();
        assert_eq!(sel.support, vec![0]);
        assert_relative_eq!(sel.objective, 10.0);
        assert_eq!(sel.theta[(0, 0)], 3.0);
        assert_eq!(sel.theta[(1, 0)], 0.0);
    }

    #[test]
    fn zero_penalty_keeps_everything_and_a_huge_one_nothing() {
        let y = dmatrix![1.0, 0.5; -0.2, 2.0; 0.1, 0.1; 3.0, -1.0];
        let keep_all = select_support_with_penalties(&y, &[0.0; 5]).unwrap();
        assert_eq!(keep_all.support, vec![0, 1, 2, 3]);
        assert_eq!(keep_all.theta, y);
        let frob2: f64 = y.iter().map(|v| v * v).sum();
        let huge = frob2 + 1.0;
        let none =
            select_support_with_penalties(&y, &[0.0, huge, 2.0 * huge, 3.0 * huge, 4.0 * huge])
                .unwrap();
        assert!(none.support.is_empty());
        assert_eq!(none.theta, DMatrix::zeros(4, 2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(120))]
        #[test]
        fn select_support_matches_brute_force(
            seed in 0u64..10_000,
            p in 1usize..=8,
            cols in 1usize..=2,
        ) {
            let mut rng = seeded(seed);
            let beta = 0.05 + 1.95 * rng.random::<f64>();
            let delta = 0.01 + 0.99 * rng.random::<f64>();
            let params = PenaltyParams { beta, delta };
            let scale = 1.0 + 30.0 * rng.random::<f64>();
            let y = DMatrix::from_fn(p, cols, |_, _| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g * scale
            });
            let penalties = penalty_table(p, p, cols + 1, &params).unwrap();
            let fast = select_support_with_penalties(&y, &penalties).unwrap();

            // Brute force over all supports with the same canonical sum.
            let norms: Vec<f64> = (0..p)
                .map(|i| y.row(i).iter().map(|v| v * v).sum())
                .collect();
            let mut best = f64::INFINITY;
            for mask in 0u32..(1 << p) {
                let size = mask.count_ones() as usize;
                let mut cost = 0.0;
                for (i, &nrm) in norms.iter().enumerate() {
                    if mask & (1 << i) == 0 {
                        cost += nrm;
                    }
                }
                cost += penalties[size];
                if cost < best {
                    best = cost;
                }
            }
            prop_assert_eq!(fast.objective, best);
        }
    }

    #[test]
    fn orthonormalize_is_a_fixed_point_on_orthonormal_input() {
        let basis = random_orthonormal(20, 2, 91);
        let mut sparse = DMatrix::zeros(25, 2);
        for i in 0..20 {
            for j in 0..2 {
                sparse[(i + 3, j)] = basis.matrix()[(i, j)];
            }
        }
        let out = orthonormalize(&sparse).unwrap();
        assert_relative_eq!((out.matrix() - &sparse).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn orthonormalize_rejects_zero_and_rank_deficient_input() {
        assert!(matches!(
            orthonormalize(&DMatrix::zeros(10, 2)),
            Err(Error::RankDeficientSelection)
        ));
        // Two identical columns: rank 1 < 2.
        let mut m = DMatrix::zeros(10, 2);
        for i in 0..4 {
            m[(i, 0)] = (i + 1) as f64;
            m[(i, 1)] = (i + 1) as f64;
        }
        assert!(matches!(
            orthonormalize(&m),
            Err(Error::RankDeficientSelection)
        ));
    }

    #[test]
    fn orthonormalize_preserves_support_and_span() {
        let mut rng = seeded(93);
        let mut theta = DMatrix::zeros(20, 2);
        let support = [2usize, 5, 11, 17];
        for &i in &support {
            for j in 0..2 {
                theta[(i, j)] = StandardNormal.sample(&mut rng);
            }
        }
        let v = orthonormalize(&theta).unwrap();
        assert_eq!(v.support(), support.to_vec());
        assert!(v.orthonormality_defect() < 1e-10);
        // theta = v (v' theta) exactly when spans agree.
        let reconstructed = v.matrix() * v.matrix().tr_mul(&theta);
        assert!((reconstructed - theta).norm() < 1e-8);
    }

    #[test]
    fn embedding_of_orthogonal_columns_is_their_normalization() {
        // Centered, mutually orthogonal columns with arbitrary scales; a
        // coordinate-basis selection must come back normalized.
        let w = normalized_from(dmatrix![
            2.0, 3.0, 0.5;
            -2.0, 3.0, -0.5;
            2.0, -3.0, -0.5;
            -2.0, -3.0, 0.5
        ]);
        let mut pick = DMatrix::zeros(3, 2);
        pick[(0, 0)] = 1.0;
        pick[(2, 1)] = 1.0;
        let v = SubspaceBasis::new(pick).unwrap();
        let u = sample_embedding(&w, &v).unwrap();
        for (c, src) in [(0usize, 0usize), (1, 2)] {
            let col = w.values().column(src) / w.values().column(src).norm();
            let got = u.matrix().column(c);
            assert!((got - col).norm() < 1e-12);
        }
        assert!(u.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn embedding_span_is_rotation_invariant() {
        let w = random_normalized(10, 8, 95);
        let v = random_orthonormal(8, 2, 96);
        let phi = 1.2f64;
        let rot = DMatrix::from_row_slice(2, 2, &[phi.cos(), -phi.sin(), phi.sin(), phi.cos()]);
        let v_rot = SubspaceBasis::new(v.matrix() * rot).unwrap();
        let u1 = sample_embedding(&w, &v).unwrap();
        let u2 = sample_embedding(&w, &v_rot).unwrap();
        assert!(sin_theta_distance(&u1, &u2).unwrap() < 1e-8);
    }

    #[test]
    fn rank_one_embedding_has_two_distinct_rows() {
        // Noiseless two-cluster data: after centering the matrix has rank
        // one and the embedding collapses each cluster to a point.
        let (n, p) = (8, 6);
        let mu: Vec<f64> = (0..p).map(|j| 1.0 + j as f64 * 0.3).collect();
        let values = DMatrix::from_fn(n, p, |i, j| if i < 4 { mu[j] } else { -mu[j] });
        let w = normalized_from(values);
        let norm: f64 = mu.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v = SubspaceBasis::new(DMatrix::from_fn(p, 1, |j, _| mu[j] / norm)).unwrap();
        let u = sample_embedding(&w, &v).unwrap();
        let rows: Vec<f64> = (0..n).map(|i| u.matrix()[(i, 0)]).collect();
        for i in 0..4 {
            assert_relative_eq!(rows[i], rows[0], epsilon = 1e-9);
            assert_relative_eq!(rows[4 + i], rows[4], epsilon = 1e-9);
        }
        assert!((rows[0] - rows[4]).abs() > 1e-3);
    }

    #[test]
    fn pipeline_separates_strong_synthetic_clusters() {
        let mut config = crate::synth::SynthConfig::new(40, 60, 2, 7);
        config.tau_override = Some(100.0);
        let grid = crate::synth::GridPoint::new(0.5, 0.6).unwrap();
        let synth = crate::synth::generate(&config, &grid).unwrap();
        let w = normalize(&synth.data, NormalizeMode::CenterOnly).unwrap();
        let params = SpcaParams::new(
            2,
            InitializerSpec::ColumnScreen {
                s_prime: default_screen_size(60, 0.6),
            },
            11,
        );
        let labels = spca_cluster(&w, &params).unwrap();
        let report = matched_hamming_error(&labels, &synth.labels, 2).unwrap();
        assert_eq!(report.hamming, 0);
    }

    #[test]
    fn pipeline_is_deterministic_in_the_seed() {
        let w = random_normalized(30, 40, 55);
        let params = SpcaParams::new(2, InitializerSpec::ColumnScreen { s_prime: 10 }, 99);
        let a = spca_cluster(&w, &params).unwrap();
        let b = spca_cluster(&w, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pipeline_rejects_too_few_samples_and_propagates_init_errors() {
        let w = random_normalized(3, 10, 1);
        let params = SpcaParams::new(3, InitializerSpec::ColumnScreen { s_prime: 5 }, 1);
        assert!(matches!(
            spca_cluster(&w, &params),
            Err(Error::InvalidArgument(_))
        ));
        // A screen too narrow for k - 1 components surfaces from inside.
        let w = random_normalized(12, 10, 2);
        let params = SpcaParams::new(4, InitializerSpec::ColumnScreen { s_prime: 2 }, 1);
        assert!(matches!(
            spca_cluster(&w, &params),
            Err(Error::InvalidArgument(_))
        ));
        // Degenerate screened matrix on a direct initializer call.
        assert!(matches!(
            init_column_screen(&DMatrix::zeros(12, 10), 5, 2),
            Err(Error::InitFailure(_))
        ));
    }

    #[test]
    fn weak_signal_falls_back_to_the_initializer_instead_of_failing() {
        // Pure noise: the penalty dominates every row and the selection is
        // empty, but the pipeline still returns labels.
        let w = random_normalized(40, 200, 13);
        let params = SpcaParams::new(2, InitializerSpec::ColumnScreen { s_prime: 20 }, 5);
        let run = spca_cluster_detailed(&w, &params).unwrap();
        assert!(run.fell_back_to_initializer);
        assert!(run.selected_support.is_empty());
        assert_eq!(run.labels.len(), 40);
    }

    #[test]
    fn oracle_initializer_is_used_verbatim() {
        let w = random_normalized(15, 12, 61);
        let basis = random_orthonormal(12, 1, 62);
        let params = SpcaParams::new(2, InitializerSpec::Oracle { basis: basis.clone() }, 3);
        let run = spca_cluster_detailed(&w, &params).unwrap();
        assert_eq!(run.initial_basis.matrix(), basis.matrix());
    }

    #[test]
    fn baseline_separates_and_is_deterministic() {
        let mut config = crate::synth::SynthConfig::new(30, 25, 2, 77);
        config.tau_override = Some(50.0);
        let grid = crate::synth::GridPoint::new(0.5, 0.5).unwrap();
        let synth = crate::synth::generate(&config, &grid).unwrap();
        let w = normalize(&synth.data, NormalizeMode::CenterOnly).unwrap();
        let a = pca_cluster_baseline(&w, 2, 5, &mut seeded(8)).unwrap();
        let b = pca_cluster_baseline(&w, 2, 5, &mut seeded(8)).unwrap();
        assert_eq!(a, b);
        let report = matched_hamming_error(&a, &synth.labels, 2).unwrap();
        assert_eq!(report.hamming, 0);
    }

    #[test]
    fn feature_permutation_leaves_labels_unchanged() {
        // Every stage is column-permutation equivariant, so permuting the
        // features permutes the reported support but not the labels.
        let mut config = crate::synth::SynthConfig::new(30, 40, 2, 123);
        config.tau_override = Some(3.0);
        let grid = crate::synth::GridPoint::new(0.5, 0.6).unwrap();
        let synth = crate::synth::generate(&config, &grid).unwrap();
        let w = normalize(&synth.data, NormalizeMode::CenterOnly).unwrap();
        let params = SpcaParams::new(2, InitializerSpec::ColumnScreen { s_prime: 12 }, 19);
        let run = spca_cluster_detailed(&w, &params).unwrap();

        let p = w.n_features();
        let perm: Vec<usize> = (0..p).map(|j| (j + 7) % p).collect();
        let mut permuted = DMatrix::zeros(w.n_samples(), p);
        for (new_j, &old_j) in perm.iter().enumerate() {
            permuted.set_column(new_j, &w.values().column(old_j));
        }
        let w_perm = normalized_from(permuted);
        let run_perm = spca_cluster_detailed(&w_perm, &params).unwrap();
        assert_eq!(run.labels, run_perm.labels);
        // The support moves with the permutation.
        let mapped: Vec<usize> = run_perm
            .selected_support
            .iter()
            .map(|&j| perm[j])
            .collect();
        let mut mapped_sorted = mapped;
        mapped_sorted.sort_unstable();
        assert_eq!(run.selected_support, mapped_sorted);
    }
}
