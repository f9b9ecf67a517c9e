//! Small dense linear-algebra helpers shared by the pipeline stages.

use nalgebra::{DMatrix, DVector};

/// Singular values this far below the largest one are treated as zero.
pub(crate) const REL_RANK_TOL: f64 = 1e-10;

pub(crate) fn column_means(a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows() as f64;
    DVector::from_iterator(a.ncols(), a.column_iter().map(|c| c.sum() / n))
}

/// Sample variance of each column (divisor n-1) about the column mean.
pub(crate) fn column_sample_variances(a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let means = column_means(a);
    DVector::from_iterator(
        a.ncols(),
        a.column_iter().enumerate().map(|(j, c)| {
            let m = means[j];
            c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n as f64 - 1.0)
        }),
    )
}

/// Frobenius norm of `b' * b - I`.
pub(crate) fn orthonormality_defect(b: &DMatrix<f64>) -> f64 {
    let g = b.tr_mul(b);
    let r = g.nrows();
    let mut sum = 0.0;
    for i in 0..r {
        for j in 0..r {
            let d = g[(i, j)] - if i == j { 1.0 } else { 0.0 };
            sum += d * d;
        }
    }
    sum.sqrt()
}

/// Thin QR orthonormalization with the sign convention that the R diagonal
/// is nonnegative, so an already-orthonormal input is reproduced exactly.
pub(crate) fn orthonormal_columns(a: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = a.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..q.ncols().min(r.nrows()) {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn sorted_symmetric_eigen(g: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = g.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Leading `r` right singular vectors of `a` together with the corresponding
/// singular values, computed from the smaller Gram matrix.
///
/// Columns are orthonormalized; callers decide how many singular values are
/// numerically nonzero.
pub(crate) fn leading_right_singular(a: &DMatrix<f64>, r: usize) -> (DMatrix<f64>, Vec<f64>) {
    let (n, c) = (a.nrows(), a.ncols());
    let r = r.min(n.min(c));
    if c <= n {
        let (values, vectors) = sorted_symmetric_eigen(a.tr_mul(a));
        let sigmas: Vec<f64> = values.iter().take(r).map(|&l| l.max(0.0).sqrt()).collect();
        (vectors.columns(0, r).into_owned(), sigmas)
    } else {
        // Work on the n x n side and map u -> a' u / sigma.
        let (values, vectors) = sorted_symmetric_eigen(a * a.transpose());
        let sigmas: Vec<f64> = values.iter().take(r).map(|&l| l.max(0.0).sqrt()).collect();
        let mut v = DMatrix::zeros(c, r);
        let top = sigmas.first().copied().unwrap_or(0.0);
        for j in 0..r {
            if sigmas[j] > REL_RANK_TOL * top && sigmas[j] > 0.0 {
                let col = a.tr_mul(&vectors.column(j).into_owned()) / sigmas[j];
                v.set_column(j, &col.column(0));
            }
        }
        // The mapped columns are orthonormal only up to roundoff; polish.
        (orthonormal_columns(&v), sigmas)
    }
}

/// Leading `r` left singular vectors of `a` with the corresponding singular
/// values.
pub(crate) fn leading_left_singular(a: &DMatrix<f64>, r: usize) -> (DMatrix<f64>, Vec<f64>) {
    let (u, s) = leading_right_singular(&a.transpose(), r);
    (u, s)
}

/// Numerical rank at the library-wide relative tolerance.
pub(crate) fn rank_from_sigmas(sigmas: &[f64]) -> usize {
    let top = sigmas.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    sigmas.iter().filter(|&&s| s > REL_RANK_TOL * top).count()
}
