//! Known-parameter discriminant analysis for a two-component Gaussian
//! mixture with a general covariance, and the full-versus-subset comparison
//! showing that mean-only feature screening can discard discriminative
//! information carried by correlations.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Relative tolerance on Cholesky pivots for the positive-definiteness check.
const PIVOT_TOL: f64 = 1e-12;
/// Elementwise tolerance on covariance symmetry.
const SYMMETRY_TOL: f64 = 1e-10;

/// Standard normal CDF, accurate to well below 1e-12 absolute.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Full parameter set of the two-class mixture oracle.
#[derive(Debug, Clone)]
pub struct OracleParams {
    mu_bar: DVector<f64>,
    mu1: DVector<f64>,
    mu2: DVector<f64>,
    sigma: DMatrix<f64>,
    delta1: f64,
    delta2: f64,
}

impl OracleParams {
    pub fn new(
        mu_bar: DVector<f64>,
        mu1: DVector<f64>,
        mu2: DVector<f64>,
        sigma: DMatrix<f64>,
        delta1: f64,
        delta2: f64,
    ) -> Result<Self> {
        let p = mu_bar.len();
        if mu1.len() != p || mu2.len() != p || sigma.nrows() != p || sigma.ncols() != p {
            return Err(Error::InvalidArgument(
                "mean and covariance dimensions disagree".into(),
            ));
        }
        if !(delta1 > 0.0 && delta1 < 1.0 && delta2 > 0.0 && delta2 < 1.0) {
            return Err(Error::InvalidArgument("priors must lie in (0, 1)".into()));
        }
        if (delta1 + delta2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "priors sum to {}",
                delta1 + delta2
            )));
        }
        spd_cholesky(&sigma)?;
        Ok(Self {
            mu_bar,
            mu1,
            mu2,
            sigma,
            delta1,
            delta2,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu_bar.len()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn priors(&self) -> (f64, f64) {
        (self.delta1, self.delta2)
    }

    /// Class contrast `mu1 - mu2`.
    pub fn contrast(&self) -> DVector<f64> {
        &self.mu1 - &self.mu2
    }

    /// Decision-boundary midpoint `mu_bar + (mu1 + mu2) / 2`.
    pub fn midpoint(&self) -> DVector<f64> {
        &self.mu_bar + (&self.mu1 + &self.mu2) * 0.5
    }

    /// Mean of class `k` in `{1, 2}`.
    pub fn class_mean(&self, class: usize) -> DVector<f64> {
        match class {
            1 => &self.mu_bar + &self.mu1,
            _ => &self.mu_bar + &self.mu2,
        }
    }

    /// Restriction to the leading `s` coordinates.
    pub fn leading_block(&self, s: usize) -> Result<OracleParams> {
        if s < 1 || s >= self.dim() {
            return Err(Error::InvalidArgument(format!(
                "block size {s} outside 1..{}",
                self.dim()
            )));
        }
        OracleParams::new(
            self.mu_bar.rows(0, s).into_owned(),
            self.mu1.rows(0, s).into_owned(),
            self.mu2.rows(0, s).into_owned(),
            self.sigma.view((0, 0), (s, s)).into_owned(),
            self.delta1,
            self.delta2,
        )
    }
}

/// Symmetry plus positive-definiteness check, returning the factorization.
fn spd_cholesky(sigma: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    for i in 0..sigma.nrows() {
        for j in (i + 1)..sigma.ncols() {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidCovariance(format!(
                    "asymmetric at ({i}, {j})"
                )));
            }
        }
    }
    let chol = Cholesky::new(sigma.clone())
        .ok_or_else(|| Error::InvalidCovariance("not positive definite".into()))?;
    let l = chol.l_dirty();
    let pivots: Vec<f64> = (0..sigma.nrows()).map(|i| l[(i, i)] * l[(i, i)]).collect();
    let max_pivot = pivots.iter().cloned().fold(0.0, f64::max);
    if pivots.iter().any(|&p| p <= PIVOT_TOL * max_pivot) {
        return Err(Error::InvalidCovariance(
            "pivot below tolerance; covariance is numerically singular".into(),
        ));
    }
    Ok(chol)
}

/// Quadratic form `delta' sigma^{-1} delta` via a symmetric solve (the
/// covariance is never inverted explicitly).
pub fn quad_form(delta: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    if delta.len() != sigma.nrows() {
        return Err(Error::InvalidArgument(
            "contrast and covariance dimensions disagree".into(),
        ));
    }
    let chol = spd_cholesky(sigma)?;
    let solved = chol.solve(delta);
    Ok(delta.dot(&solved).max(0.0))
}

/// The discriminant rule exactly as conventionally printed:
/// label `2` when `(z - midpoint)' sigma^{-1} (mu1 - mu2) >= log(d1 / d2)`,
/// else label `1`. The orientation labels a class-1 prototype as `2`;
/// downstream error metrics are permutation matched, so this cannot affect
/// reported rates.
pub fn fisher_classify(z: &DVector<f64>, params: &OracleParams) -> Result<usize> {
    if z.len() != params.dim() {
        return Err(Error::InvalidArgument(format!(
            "point has dimension {}, expected {}",
            z.len(),
            params.dim()
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite point".into()));
    }
    let chol = spd_cholesky(&params.sigma)?;
    let direction = chol.solve(&params.contrast());
    let score = (z - params.midpoint()).dot(&direction);
    let threshold = (params.delta1 / params.delta2).ln();
    Ok(if score >= threshold { 2 } else { 1 })
}

/// Error rate of the oracle rule in the form `1 - Phi(sqrt(quad_form))`.
pub fn fisher_rate_paper(delta: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    Ok(1.0 - std_normal_cdf(quad_form(delta, sigma)?.sqrt()))
}

/// Equal-prior oracle risk in the standard form `Phi(-sqrt(quad_form) / 2)`.
pub fn fisher_rate_standard(delta: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    Ok(std_normal_cdf(-quad_form(delta, sigma)?.sqrt() / 2.0))
}

/// Size of the leading block of "useful" features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureSplit {
    pub s: usize,
}

impl FeatureSplit {
    pub fn new(s: usize) -> Self {
        Self { s }
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.s < 1 || self.s >= p {
            return Err(Error::InvalidArgument(format!(
                "split size {} outside 1..{p}",
                self.s
            )));
        }
        Ok(())
    }
}

/// Quadratic forms of the full contrast versus its leading block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub full: f64,
    pub subset: f64,
    /// `full - subset`; nonnegative by the Schur-complement inequality.
    pub gap: f64,
}

/// Compares `delta' sigma^{-1} delta` against the same form restricted to
/// the leading `s` coordinates, for contrasts whose trailing block is
/// exactly zero. The gap is nonnegative because the Schur complement of the
/// leading block is positive semidefinite.
pub fn subset_vs_full_gap(
    delta: &DVector<f64>,
    sigma: &DMatrix<f64>,
    split: &FeatureSplit,
) -> Result<GapReport> {
    let p = delta.len();
    if sigma.nrows() != p || sigma.ncols() != p {
        return Err(Error::InvalidArgument(
            "contrast and covariance dimensions disagree".into(),
        ));
    }
    split.validate(p)?;
    if (split.s..p).any(|i| delta[i] != 0.0) {
        return Err(Error::InvalidArgument(
            "trailing contrast block must be exactly zero".into(),
        ));
    }
    let full = quad_form(delta, sigma)?;
    let delta1 = delta.rows(0, split.s).into_owned();
    let sigma11 = sigma.view((0, 0), (split.s, split.s)).into_owned();
    let subset = quad_form(&delta1, &sigma11)?;
    let gap = full - subset;
    debug_assert!(gap >= -1e-10, "Schur gap went negative: {gap}");
    Ok(GapReport { full, subset, gap })
}

/// Monte Carlo misclassification of the oracle rule on mixture draws,
/// restricted to the leading block when `split` is given.
///
/// The reported rate is permutation matched (minimum over the two label
/// pairings), which neutralizes the printed rule's orientation.
pub fn empirical_misclassification<R: Rng + ?Sized>(
    params: &OracleParams,
    split: Option<&FeatureSplit>,
    n_draws: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_draws < 1 {
        return Err(Error::InvalidArgument("n_draws must be >= 1".into()));
    }
    let classifier = match split {
        Some(s) => {
            s.validate(params.dim())?;
            params.leading_block(s.s)?
        }
        None => params.clone(),
    };
    // Precompute the linear rule once.
    let chol_rule = spd_cholesky(&classifier.sigma)?;
    let direction = chol_rule.solve(&classifier.contrast());
    let midpoint = classifier.midpoint();
    let threshold = (classifier.delta1 / classifier.delta2).ln();

    let chol_sample = spd_cholesky(&params.sigma)?;
    let l = chol_sample.l();
    let p = params.dim();
    let d = classifier.dim();

    let mut mismatches = 0usize;
    let mut g = DVector::zeros(p);
    for _ in 0..n_draws {
        let class = if rng.random::<f64>() < params.delta1 { 1 } else { 2 };
        for i in 0..p {
            g[i] = StandardNormal.sample(rng);
        }
        let z = params.class_mean(class) + &l * &g;
        let mut score = -midpoint.dot(&direction);
        for i in 0..d {
            score += z[i] * direction[i];
        }
        let predicted = if score >= threshold { 2 } else { 1 };
        if predicted != class {
            mismatches += 1;
        }
    }
    // Permutation matching for two classes: the swap turns m into n - m.
    Ok(mismatches.min(n_draws - mismatches) as f64 / n_draws as f64)
}
