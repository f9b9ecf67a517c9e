//! Core data model: observation matrices, cluster labels, column
//! normalization, and orthonormal subspace bases.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// Guard applied to sample standard deviations when scaling columns, so a
/// degenerate (constant) column stays all-zero instead of dividing by zero.
pub const SCALE_EPSILON: f64 = 1e-12;

/// Observation matrix with samples in rows and features in columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    /// Validates that the matrix has at least two samples, at least one
    /// feature, and only finite entries.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 samples, got {}",
                values.nrows()
            )));
        }
        if values.ncols() < 1 {
            return Err(Error::InvalidData("need at least 1 feature".into()));
        }
        if let Some((i, j)) = first_non_finite(&values) {
            return Err(Error::InvalidData(format!(
                "non-finite entry at row {i}, column {j}"
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }
}

fn first_non_finite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}

/// Cluster assignments with entries in `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    k: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidArgument("cluster count must be >= 1".into()));
        }
        if labels.is_empty() {
            return Err(Error::InvalidArgument("label vector is empty".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l < 1 || l > k) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside 1..={k}"
            )));
        }
        Ok(Self { labels, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The label alphabet size `k` (not the number of distinct values used).
    pub fn class_count(&self) -> usize {
        self.k
    }

    /// Number of distinct labels actually present.
    pub fn distinct_count(&self) -> usize {
        let mut seen = vec![false; self.k];
        for &l in &self.labels {
            seen[l - 1] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }

    /// 0/1 membership matrix with one row per sample and one column per class.
    pub fn indicator_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.labels.len(), self.k);
        for (i, &l) in self.labels.iter().enumerate() {
            m[(i, l - 1)] = 1.0;
        }
        m
    }
}

/// Which column normalization was applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizeMode {
    /// Subtract the column mean only.
    CenterOnly,
    /// Subtract the column mean, then divide by the sample standard
    /// deviation (divisor n-1), guarded by [`SCALE_EPSILON`].
    CenterAndScale,
}

/// Column-normalized data ready for the clustering pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMatrix {
    values: DMatrix<f64>,
    mode: NormalizeMode,
}

impl NormalizedMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn mode(&self) -> NormalizeMode {
        self.mode
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }
}

/// Centers every column of `x`, and under [`NormalizeMode::CenterAndScale`]
/// also divides each column by `max(sample std, SCALE_EPSILON)`.
///
/// Constant columns come out all-zero in both modes; they are kept (not
/// dropped) so feature indices stay aligned with support reporting.
pub fn normalize(x: &DataMatrix, mode: NormalizeMode) -> Result<NormalizedMatrix> {
    let mut values = x.values().clone();
    let means = linalg::column_means(&values);
    for j in 0..values.ncols() {
        let mut col = values.column_mut(j);
        col.add_scalar_mut(-means[j]);
    }
    if mode == NormalizeMode::CenterAndScale {
        let n = values.nrows() as f64;
        for j in 0..values.ncols() {
            let ss: f64 = values.column(j).iter().map(|v| v * v).sum();
            let std = (ss / (n - 1.0)).sqrt();
            let scale = 1.0 / std.max(SCALE_EPSILON);
            values.column_mut(j).scale_mut(scale);
        }
    }
    Ok(NormalizedMatrix { values, mode })
}

/// Matrix with orthonormal columns spanning an estimated or exact subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    matrix: DMatrix<f64>,
}

impl SubspaceBasis {
    /// Frobenius tolerance on `B'B - I` accepted at construction.
    pub const ORTHONORMALITY_TOL: f64 = 1e-8;

    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.ncols() < 1 {
            return Err(Error::InvalidArgument(
                "a basis needs at least one column".into(),
            ));
        }
        if matrix.nrows() < matrix.ncols() {
            return Err(Error::InvalidArgument(format!(
                "basis is {}x{}; ambient dimension must be >= rank",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let defect = linalg::orthonormality_defect(&matrix);
        if !defect.is_finite() || defect > Self::ORTHONORMALITY_TOL {
            return Err(Error::InvalidArgument(format!(
                "columns are not orthonormal (defect {defect:.3e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Ambient dimension (number of rows).
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of basis columns.
    pub fn rank(&self) -> usize {
        self.matrix.ncols()
    }

    /// Frobenius norm of `B'B - I`.
    pub fn orthonormality_defect(&self) -> f64 {
        linalg::orthonormality_defect(&self.matrix)
    }

    /// Indices of rows holding at least one nonzero entry.
    pub fn support(&self) -> Vec<usize> {
        (0..self.matrix.nrows())
            .filter(|&i| self.matrix.row(i).iter().any(|&v| v != 0.0))
            .collect()
    }
}

/// Rank-(k-1) SVD of the column-centered class-mean signal.
///
/// `means` holds one row per class; `scale`, when given, multiplies each
/// feature column before centering. Returns the sample-side basis, the
/// nonzero singular values (non-increasing), and the feature-side basis.
pub fn signal_svd(
    labels: &LabelVector,
    means: &DMatrix<f64>,
    scale: Option<&[f64]>,
) -> Result<(SubspaceBasis, Vec<f64>, SubspaceBasis)> {
    let k = labels.class_count();
    if k < 2 {
        return Err(Error::InvalidArgument("need at least two classes".into()));
    }
    if means.nrows() != k {
        return Err(Error::InvalidArgument(format!(
            "means has {} rows but labels describe {k} classes",
            means.nrows()
        )));
    }
    if let Some(s) = scale {
        if s.len() != means.ncols() {
            return Err(Error::InvalidArgument(
                "scale length does not match feature count".into(),
            ));
        }
    }
    let mut signal = labels.indicator_matrix() * means;
    if let Some(s) = scale {
        for j in 0..signal.ncols() {
            signal.column_mut(j).scale_mut(s[j]);
        }
    }
    let col_means = linalg::column_means(&signal);
    for j in 0..signal.ncols() {
        signal.column_mut(j).add_scalar_mut(-col_means[j]);
    }

    let rank = k - 1;
    let svd = signal.svd(true, true);
    let sigmas: Vec<f64> = svd.singular_values.iter().copied().take(rank).collect();
    if sigmas.len() < rank || linalg::rank_from_sigmas(&sigmas) < rank {
        return Err(Error::DegenerateSignal(format!(
            "centered signal has rank below {rank}"
        )));
    }
    let u = svd.u.as_ref().expect("u requested").columns(0, rank).into_owned();
    let v = svd
        .v_t
        .as_ref()
        .expect("v requested")
        .rows(0, rank)
        .transpose();
    Ok((SubspaceBasis::new(u)?, sigmas, SubspaceBasis::new(v)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, DMatrix};

    #[test]
    fn center_only_symmetric_pair() {
        let x = DataMatrix::new(dmatrix![1.0; 3.0]).unwrap();
        let w = normalize(&x, NormalizeMode::CenterOnly).unwrap();
        assert_eq!(w.values(), &dmatrix![-1.0; 1.0]);
    }

    #[test]
    fn constant_column_scales_to_zero() {
        let x = DataMatrix::new(dmatrix![5.0; 5.0; 5.0]).unwrap();
        let w = normalize(&x, NormalizeMode::CenterAndScale).unwrap();
        assert_eq!(w.values(), &dmatrix![0.0; 0.0; 0.0]);
    }

    #[test]
    fn center_and_scale_uses_sample_std() {
        // Column one has sample std 2 (divisor n-1); column two is constant.
        let x = DataMatrix::new(dmatrix![1.0, 10.0; 3.0, 10.0; 5.0, 10.0]).unwrap();
        let w = normalize(&x, NormalizeMode::CenterAndScale).unwrap();
        let expected = dmatrix![-1.0, 0.0; 0.0, 0.0; 1.0, 0.0];
        assert_relative_eq!((w.values() - expected).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let err = DataMatrix::new(dmatrix![1.0, f64::NAN; 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidData(_)));
    }

    #[test]
    fn normalize_is_idempotent() {
        for mode in [NormalizeMode::CenterOnly, NormalizeMode::CenterAndScale] {
            let x = DataMatrix::new(DMatrix::from_fn(7, 4, |i, j| {
                ((i * 31 + j * 17) % 13) as f64 * 0.7 - 3.0
            }))
            .unwrap();
            let once = normalize(&x, mode).unwrap();
            let again = normalize(&DataMatrix::new(once.values().clone()).unwrap(), mode).unwrap();
            assert!((once.values() - again.values()).norm() < 1e-9);
        }
    }

    #[test]
    fn column_sums_vanish() {
        let x = DataMatrix::new(DMatrix::from_fn(9, 5, |i, j| {
            (i as f64 + 1.0).powf(1.1) * (j as f64 + 0.5)
        }))
        .unwrap();
        let w = normalize(&x, NormalizeMode::CenterOnly).unwrap();
        for j in 0..w.n_features() {
            assert!(w.values().column(j).sum().abs() <= 1e-9 * w.n_samples() as f64);
        }
    }

    #[test]
    fn two_balanced_classes_give_closed_form_svd() {
        // Classes at +/- mu/2 with balanced labels: single singular value
        // sqrt(n) * ||mu|| / 2 and feature direction mu / ||mu||.
        let mu = [3.0, 0.0, 4.0, 0.0];
        let n = 8;
        let labels =
            LabelVector::new((0..n).map(|i| if i % 2 == 0 { 1 } else { 2 }).collect(), 2).unwrap();
        let mut means = DMatrix::zeros(2, 4);
        for j in 0..4 {
            means[(0, j)] = mu[j] / 2.0;
            means[(1, j)] = -mu[j] / 2.0;
        }
        let (u, sigmas, v) = signal_svd(&labels, &means, None).unwrap();
        let mu_norm = 5.0;
        assert_relative_eq!(sigmas[0], (n as f64).sqrt() * mu_norm / 2.0, epsilon = 1e-10);
        let dir = v.matrix().column(0);
        for j in 0..4 {
            assert_relative_eq!(dir[j].abs(), mu[j].abs() / mu_norm, epsilon = 1e-10);
        }
        assert!(u.orthonormality_defect() < 1e-10);
    }

    #[test]
    fn zero_signal_is_degenerate() {
        let labels = LabelVector::new(vec![1, 2, 1, 2], 2).unwrap();
        let means = DMatrix::zeros(2, 3);
        let err = signal_svd(&labels, &means, None).unwrap_err();
        assert!(matches!(err, Error::DegenerateSignal(_)));
    }

    #[test]
    fn reconstruction_matches_input() {
        let labels = LabelVector::new(vec![1, 1, 2, 2, 3, 3], 3).unwrap();
        let means = dmatrix![
            2.0, 0.0, 0.0, 0.3;
            0.0, 1.5, 0.0, -0.1;
            0.0, 0.0, 1.0, 0.6
        ];
        let (u, sigmas, v) = signal_svd(&labels, &means, None).unwrap();
        // Rebuild the centered signal and compare.
        let mut signal = labels.indicator_matrix() * &means;
        let col_means = signal.row_mean();
        for j in 0..signal.ncols() {
            signal.column_mut(j).add_scalar_mut(-col_means[j]);
        }
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(sigmas));
        let rebuilt = u.matrix() * d * v.matrix().transpose();
        assert!((rebuilt - signal).norm() < 1e-8);
    }
}
