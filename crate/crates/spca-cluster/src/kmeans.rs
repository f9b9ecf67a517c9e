//! Lloyd's k-means with seeded k-means++ initialization and restarts.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::LabelVector;

pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_MAX_ITER: usize = 300;

/// Outcome of a k-means run.
#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// Assignments in `1..=k`.
    pub labels: LabelVector,
    /// One centroid per row; at convergence each centroid is the mean of its
    /// assigned points.
    pub centroids: DMatrix<f64>,
    /// Within-cluster sum of squares.
    pub objective: f64,
    /// Lloyd iterations used by the winning restart.
    pub iterations: usize,
}

/// Best-of-`restarts` k-means on the rows of `points`.
///
/// Determinism contract: `restarts` 64-bit seeds are drawn from `rng` up
/// front, and restart `i` runs k-means++ seeding plus Lloyd iterations on a
/// fresh ChaCha8 stream built from seed `i`. The lowest objective wins, ties
/// going to the earliest restart, so the result does not depend on how
/// restarts would be scheduled.
///
/// An empty cluster during Lloyd is repaired by reseeding its centroid to the
/// point farthest from its current nearest centroid (smallest index on ties);
/// if every point sits exactly on a centroid the empty cluster is left alone.
pub fn kmeans<R: Rng + ?Sized>(
    points: &DMatrix<f64>,
    k: usize,
    restarts: usize,
    max_iter: usize,
    rng: &mut R,
) -> Result<KMeansResult> {
    let n = points.nrows();
    if k < 1 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!(
            "{n} points cannot form {k} clusters"
        )));
    }
    if restarts < 1 {
        return Err(Error::InvalidArgument("restarts must be >= 1".into()));
    }
    let seeds: Vec<u64> = (0..restarts).map(|_| rng.next_u64()).collect();
    let mut best: Option<(Vec<usize>, DMatrix<f64>, f64, usize)> = None;
    for seed in seeds {
        let mut local = ChaCha8Rng::seed_from_u64(seed);
        let run = lloyd_once(points, k, max_iter, &mut local);
        let better = match &best {
            None => true,
            Some((_, _, obj, _)) => run.2 < *obj,
        };
        if better {
            best = Some(run);
        }
    }
    let (assign, centroids, objective, iterations) = best.expect("at least one restart");
    let labels = LabelVector::new(assign.iter().map(|&c| c + 1).collect(), k)?;
    Ok(KMeansResult {
        labels,
        centroids,
        objective,
        iterations,
    })
}

fn lloyd_once<R: Rng + ?Sized>(
    points: &DMatrix<f64>,
    k: usize,
    max_iter: usize,
    rng: &mut R,
) -> (Vec<usize>, DMatrix<f64>, f64, usize) {
    let mut centroids = plus_plus_seeding(points, k, rng);
    let mut assign = nearest_assignment(points, &centroids);
    let mut prev_obj = f64::INFINITY;
    let mut iterations = 0;
    loop {
        iterations += 1;
        update_centroids(points, &assign, &mut centroids);
        repair_empty_clusters(points, &mut assign, &mut centroids);
        let new_assign = nearest_assignment(points, &centroids);
        let obj = wcss(points, &centroids, &new_assign);
        debug_assert!(
            obj <= prev_obj + 1e-9 * (1.0 + prev_obj.min(f64::MAX / 2.0).abs()),
            "objective increased: {prev_obj} -> {obj}"
        );
        let converged = new_assign == assign;
        assign = new_assign;
        prev_obj = obj;
        if converged || iterations >= max_iter {
            break;
        }
    }
    // Make the reported centroids the means of the final assignment.
    update_centroids(points, &assign, &mut centroids);
    let objective = wcss(points, &centroids, &assign);
    (assign, centroids, objective, iterations)
}

/// D-squared sampling: each new centroid is drawn with probability
/// proportional to the squared distance to the nearest one chosen so far.
fn plus_plus_seeding<R: Rng + ?Sized>(points: &DMatrix<f64>, k: usize, rng: &mut R) -> DMatrix<f64> {
    let n = points.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut dist2: Vec<f64> = (0..n)
        .map(|i| row_dist2(points, i, points, chosen[0]))
        .collect();
    while chosen.len() < k {
        let total: f64 = dist2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in dist2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // Fewer distinct points than k: take the first unchosen index.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for i in 0..n {
            dist2[i] = dist2[i].min(row_dist2(points, i, points, next));
        }
    }
    DMatrix::from_fn(k, points.ncols(), |c, j| points[(chosen[c], j)])
}

fn row_dist2(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    let mut s = 0.0;
    for c in 0..a.ncols() {
        let d = a[(i, c)] - b[(j, c)];
        s += d * d;
    }
    s
}

fn nearest_assignment(points: &DMatrix<f64>, centroids: &DMatrix<f64>) -> Vec<usize> {
    (0..points.nrows())
        .map(|i| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..centroids.nrows() {
                let d = row_dist2(points, i, centroids, c);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn update_centroids(points: &DMatrix<f64>, assign: &[usize], centroids: &mut DMatrix<f64>) {
    let k = centroids.nrows();
    let d = centroids.ncols();
    let mut counts = vec![0usize; k];
    let mut sums = DMatrix::<f64>::zeros(k, d);
    for (i, &c) in assign.iter().enumerate() {
        counts[c] += 1;
        for j in 0..d {
            sums[(c, j)] += points[(i, j)];
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for j in 0..d {
                centroids[(c, j)] = sums[(c, j)] / counts[c] as f64;
            }
        }
    }
}

fn repair_empty_clusters(points: &DMatrix<f64>, assign: &mut Vec<usize>, centroids: &mut DMatrix<f64>) {
    let k = centroids.nrows();
    let mut used_repairs: Vec<usize> = Vec::new();
    loop {
        let mut counts = vec![0usize; k];
        for &c in assign.iter() {
            counts[c] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        // Farthest point from its nearest centroid, skipping earlier repairs.
        let mut far_idx = None;
        let mut far_d = 0.0;
        for i in 0..points.nrows() {
            if used_repairs.contains(&i) {
                continue;
            }
            let mut d = f64::INFINITY;
            for c in 0..k {
                if counts[c] > 0 {
                    d = d.min(row_dist2(points, i, centroids, c));
                }
            }
            if d > far_d {
                far_d = d;
                far_idx = Some(i);
            }
        }
        match far_idx {
            Some(i) if far_d > 0.0 => {
                for j in 0..points.ncols() {
                    centroids[(empty, j)] = points[(i, j)];
                }
                assign[i] = empty;
                used_repairs.push(i);
            }
            // All remaining points coincide with a centroid; the data has
            // fewer distinct rows than k and the empty cluster must stay.
            _ => return,
        }
    }
}

fn wcss(points: &DMatrix<f64>, centroids: &DMatrix<f64>, assign: &[usize]) -> f64 {
    assign
        .iter()
        .enumerate()
        .map(|(i, &c)| row_dist2(points, i, centroids, c))
        .sum()
}
