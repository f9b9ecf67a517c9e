//! Clustering-error and subspace-distance metrics.
//!
//! The clustering error is the Hamming distance to the ground truth
//! minimized over all relabelings of the estimated clusters. Two independent
//! paths compute it: exhaustive search over permutations (small k) and a
//! minimum-cost assignment on the confusion matrix; they cross-validate each
//! other in tests.

use crate::error::{Error, Result};
use crate::model::{LabelVector, SubspaceBasis};

/// Result of a permutation-matched comparison of two labelings.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Misclassified samples after the best relabeling.
    pub hamming: usize,
    /// `hamming` divided by the number of samples.
    pub rate: f64,
    /// Best mapping from true label `t` (1-based index) to estimated label.
    pub best_permutation: Vec<usize>,
}

/// Exhaustive cutoff: up to this many classes every permutation is tried.
const EXHAUSTIVE_MAX_K: usize = 6;

/// Minimum relabeled Hamming distance between `yhat` and `y`.
///
/// Uses exhaustive search for `k <= 6` and minimum-cost assignment above
/// that; the two agree exactly wherever both apply.
pub fn matched_hamming_error(yhat: &LabelVector, y: &LabelVector, k: usize) -> Result<ErrorReport> {
    let confusion = confusion_matrix(yhat, y, k)?;
    let perm = if k <= EXHAUSTIVE_MAX_K {
        best_permutation_exhaustive(&confusion)
    } else {
        best_permutation_assignment(&confusion)
    };
    Ok(report_from(&confusion, yhat.len(), perm))
}

/// Exhaustive-search path, exposed for cross-validation.
pub fn matched_hamming_exhaustive(
    yhat: &LabelVector,
    y: &LabelVector,
    k: usize,
) -> Result<ErrorReport> {
    let confusion = confusion_matrix(yhat, y, k)?;
    let perm = best_permutation_exhaustive(&confusion);
    Ok(report_from(&confusion, yhat.len(), perm))
}

/// Assignment-based path, exposed for cross-validation.
pub fn matched_hamming_assignment(
    yhat: &LabelVector,
    y: &LabelVector,
    k: usize,
) -> Result<ErrorReport> {
    let confusion = confusion_matrix(yhat, y, k)?;
    let perm = best_permutation_assignment(&confusion);
    Ok(report_from(&confusion, yhat.len(), perm))
}

fn report_from(confusion: &[Vec<usize>], n: usize, perm: Vec<usize>) -> ErrorReport {
    let agree: usize = perm.iter().enumerate().map(|(t, &a)| confusion[a][t]).sum();
    let hamming = n - agree;
    ErrorReport {
        hamming,
        rate: hamming as f64 / n as f64,
        best_permutation: perm.iter().map(|&a| a + 1).collect(),
    }
}

/// `confusion[a][b]` counts samples with estimated label `a+1` and true
/// label `b+1`.
fn confusion_matrix(yhat: &LabelVector, y: &LabelVector, k: usize) -> Result<Vec<Vec<usize>>> {
    if yhat.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "label vectors have lengths {} and {}",
            yhat.len(),
            y.len()
        )));
    }
    if k < 1 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    for &l in yhat.labels().iter().chain(y.labels()) {
        if l < 1 || l > k {
            return Err(Error::InvalidArgument(format!("label {l} outside 1..={k}")));
        }
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for (&a, &b) in yhat.labels().iter().zip(y.labels()) {
        confusion[a - 1][b - 1] += 1;
    }
    Ok(confusion)
}

fn best_permutation_exhaustive(confusion: &[Vec<usize>]) -> Vec<usize> {
    let k = confusion.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best_perm = perm.clone();
    let mut best_agree = agreement(confusion, &perm);
    // Heap's algorithm over permutations of 0..k.
    let mut c = vec![0usize; k];
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let a = agreement(confusion, &perm);
            if a > best_agree {
                best_agree = a;
                best_perm = perm.clone();
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best_perm
}

fn agreement(confusion: &[Vec<usize>], perm: &[usize]) -> usize {
    perm.iter().enumerate().map(|(t, &a)| confusion[a][t]).sum()
}

/// Maximum-agreement assignment via the Hungarian algorithm with potentials
/// (O(k^3)); costs are negated agreements shifted to be nonnegative.
fn best_permutation_assignment(confusion: &[Vec<usize>]) -> Vec<usize> {
    let k = confusion.len();
    let max_entry = confusion
        .iter()
        .flat_map(|r| r.iter())
        .copied()
        .max()
        .unwrap_or(0) as i64;
    // cost[t][a] of matching true class t to estimated class a.
    let cost: Vec<Vec<i64>> = (0..k)
        .map(|t| (0..k).map(|a| max_entry - confusion[a][t] as i64).collect())
        .collect();

    // Standard row-by-row shortest augmenting path formulation with 1-based
    // sentinels.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; k + 1];
    let mut v = vec![0i64; k + 1];
    let mut way = vec![0usize; k + 1];
    let mut matched_col_for = vec![0usize; k + 1]; // column -> row
    for row in 1..=k {
        matched_col_for[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![inf; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = matched_col_for[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=k {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[matched_col_for[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_col_for[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_col_for[j0] = matched_col_for[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; k];
    for j in 1..=k {
        if matched_col_for[j] > 0 {
            perm[matched_col_for[j] - 1] = j - 1;
        }
    }
    perm
}

/// Frobenius sin-theta distance between two orthonormal bases of equal
/// ambient dimension and rank: `sqrt(r - ||A'B||_F^2)`.
pub fn sin_theta_distance(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    if a.dim() != b.dim() || a.rank() != b.rank() {
        return Err(Error::InvalidArgument(format!(
            "bases are {}x{} and {}x{}",
            a.dim(),
            a.rank(),
            b.dim(),
            b.rank()
        )));
    }
    let g = a.matrix().tr_mul(b.matrix());
    let fro2: f64 = g.iter().map(|x| x * x).sum();
    Ok((a.rank() as f64 - fro2).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lv(labels: &[usize], k: usize) -> LabelVector {
        LabelVector::new(labels.to_vec(), k).unwrap()
    }

    #[test]
    fn identical_labelings_have_zero_error() {
        let y = lv(&[1, 2, 1, 2, 2], 2);
        let rep = matched_hamming_error(&y, &y, 2).unwrap();
        assert_eq!(rep.hamming, 0);
        assert_relative_eq!(rep.rate, 0.0);
    }

    #[test]
    fn swapped_labels_cost_nothing() {
        let yhat = lv(&[1, 1, 2, 2], 2);
        let y = lv(&[2, 2, 1, 1], 2);
        let rep = matched_hamming_error(&yhat, &y, 2).unwrap();
        assert_eq!(rep.hamming, 0);
        assert_eq!(rep.best_permutation, vec![2, 1]);
    }

    #[test]
    fn single_disagreement_is_counted_once() {
        // Identity permutation gives 1 mismatch, the swap gives 3.
        let yhat = lv(&[1, 2, 2, 2], 2);
        let y = lv(&[1, 1, 2, 2], 2);
        let rep = matched_hamming_error(&yhat, &y, 2).unwrap();
        assert_eq!(rep.hamming, 1);
    }

    #[test]
    fn length_mismatch_and_out_of_range_are_rejected() {
        let a = lv(&[1, 2], 2);
        let b = lv(&[1, 2, 1], 2);
        assert!(matched_hamming_error(&a, &b, 2).is_err());
        let c = lv(&[1, 2, 3], 3);
        assert!(matched_hamming_error(&c, &c, 2).is_err());
    }

    #[test]
    fn invariant_under_relabeling_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 2..=5usize {
            for _ in 0..50 {
                let n = 30;
                let yhat = lv(
                    &(0..n).map(|_| rng.random_range(1..=k)).collect::<Vec<_>>(),
                    k,
                );
                let y = lv(
                    &(0..n).map(|_| rng.random_range(1..=k)).collect::<Vec<_>>(),
                    k,
                );
                let base = matched_hamming_error(&yhat, &y, k).unwrap().hamming;
                // Relabel yhat by a rotation.
                let rotated = lv(
                    &yhat.labels().iter().map(|&l| l % k + 1).collect::<Vec<_>>(),
                    k,
                );
                assert_eq!(
                    matched_hamming_error(&rotated, &y, k).unwrap().hamming,
                    base
                );
                assert_eq!(matched_hamming_error(&y, &yhat, k).unwrap().hamming, base);
            }
        }
    }

    #[test]
    fn exhaustive_and_assignment_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 2..=6usize {
            for _ in 0..200 {
                let n = rng.random_range(5..60);
                let yhat = lv(
                    &(0..n).map(|_| rng.random_range(1..=k)).collect::<Vec<_>>(),
                    k,
                );
                let y = lv(
                    &(0..n).map(|_| rng.random_range(1..=k)).collect::<Vec<_>>(),
                    k,
                );
                let e = matched_hamming_exhaustive(&yhat, &y, k).unwrap();
                let a = matched_hamming_assignment(&yhat, &y, k).unwrap();
                assert_eq!(e.hamming, a.hamming);
            }
        }
    }

    fn basis_from_cols(cols: &[Vec<f64>]) -> SubspaceBasis {
        let d = cols[0].len();
        let m = DMatrix::from_fn(d, cols.len(), |i, j| cols[j][i]);
        SubspaceBasis::new(m).unwrap()
    }

    #[test]
    fn sin_theta_closed_forms() {
        let e1 = basis_from_cols(&[vec![1.0, 0.0]]);
        let e2 = basis_from_cols(&[vec![0.0, 1.0]]);
        assert_relative_eq!(sin_theta_distance(&e1, &e1).unwrap(), 0.0);
        assert_relative_eq!(sin_theta_distance(&e1, &e2).unwrap(), 1.0);
        let theta = 30f64.to_radians();
        let tilted = basis_from_cols(&[vec![theta.cos(), theta.sin()]]);
        assert_relative_eq!(
            sin_theta_distance(&e1, &tilted).unwrap(),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn sin_theta_rotation_invariance_and_continuity() {
        let a = basis_from_cols(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        // Right-rotate by an angle.
        let phi = 0.73f64;
        let rot = DMatrix::from_row_slice(2, 2, &[phi.cos(), -phi.sin(), phi.sin(), phi.cos()]);
        let a_rot = SubspaceBasis::new(a.matrix() * rot).unwrap();
        let b = basis_from_cols(&[vec![0.8, 0.6, 0.0], vec![0.0, 0.0, 1.0]]);
        assert_relative_eq!(
            sin_theta_distance(&a, &b).unwrap(),
            sin_theta_distance(&a_rot, &b).unwrap(),
            epsilon = 1e-12
        );
        // Small perturbations give small distances.
        for eps in [1e-3, 1e-6] {
            let perturbed = DMatrix::from_fn(3, 2, |i, j| {
                a.matrix()[(i, j)] + if i == 2 { eps } else { 0.0 }
            });
            let q = crate::engine::orthonormalize(&perturbed).unwrap();
            assert!(sin_theta_distance(&a, &q).unwrap() < 10.0 * eps);
        }
        let mismatched = basis_from_cols(&[vec![1.0, 0.0]]);
        assert!(sin_theta_distance(&a, &mismatched).is_err());
    }
}
