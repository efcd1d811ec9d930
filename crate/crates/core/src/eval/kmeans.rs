//! Lloyd's k-means with k-means++ seeding and restarts.

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{derive_index, rng_from_seed};

pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult {
    pub assignments: Vec<usize>,
    pub centers: DMatrix<f64>,
    pub inertia: f64,
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>, c: usize) -> f64 {
    (0..points.ncols())
        .map(|d| (points[(i, d)] - centers[(c, d)]).powi(2))
        .sum()
}

fn plus_plus(points: &DMatrix<f64>, k: usize, rng: &mut crate::rng::Rng) -> DMatrix<f64> {
    let (n, dim) = points.shape();
    let mut centers = DMatrix::zeros(k, dim);
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from(&points.row(first));
    let mut best: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centers, 0)).collect();
    for c in 1..k {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &b) in best.iter().enumerate() {
                if t < b {
                    pick = i;
                    break;
                }
                t -= b;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).copy_from(&points.row(pick));
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(sq_dist(points, i, &centers, c));
        }
    }
    centers
}

fn lloyd(points: &DMatrix<f64>, mut centers: DMatrix<f64>, max_iter: usize) -> KmeansResult {
    let (n, dim) = points.shape();
    let k = centers.nrows();
    let mut assign = vec![usize::MAX; n];
    let mut d2 = vec![0.0; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for i in 0..n {
            let mut bc = 0;
            let mut bd = f64::INFINITY;
            for c in 0..k {
                let d = sq_dist(points, i, &centers, c);
                if d < bd {
                    bd = d;
                    bc = c;
                }
            }
            d2[i] = bd;
            if assign[i] != bc {
                assign[i] = bc;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = DMatrix::<f64>::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assign[i]] += 1;
            for d in 0..dim {
                sums[(assign[i], d)] += points[(i, d)];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster at the point farthest from its center.
                let far = (0..n)
                    .max_by(|&a, &b| d2[a].total_cmp(&d2[b]).then(b.cmp(&a)))
                    .expect("n >= k >= 1");
                centers.row_mut(c).copy_from(&points.row(far));
                d2[far] = 0.0;
            } else {
                for d in 0..dim {
                    centers[(c, d)] = sums[(c, d)] / counts[c] as f64;
                }
            }
        }
    }
    let inertia = (0..n).map(|i| sq_dist(points, i, &centers, assign[i])).sum();
    KmeansResult {
        assignments: assign,
        centers,
        inertia,
    }
}

/// Cluster the rows of `points`. The restart with the lowest inertia wins.
pub fn kmeans(points: &DMatrix<f64>, k: usize, restarts: usize, max_iter: usize, seed: u64) -> Result<KmeansResult> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k-means with k={k} on {n} points")));
    }
    let mut best: Option<KmeansResult> = None;
    for r in 0..restarts.max(1) {
        let mut rng = rng_from_seed(derive_index(seed, r as u64));
        let res = lloyd(points, plus_plus(points, k, &mut rng), max_iter.max(1));
        if best.as_ref().is_none_or(|b| res.inertia < b.inertia) {
            best = Some(res);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_obvious_groups() {
        let pts = DMatrix::from_row_slice(6, 1, &[0.0, 0.1, 0.2, 10.0, 10.1, 10.2]);
        let r = kmeans(&pts, 2, 10, 300, 1).unwrap();
        assert_eq!(r.assignments[0], r.assignments[2]);
        assert_eq!(r.assignments[3], r.assignments[5]);
        assert_ne!(r.assignments[0], r.assignments[3]);
        assert!((r.inertia - 0.04).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_handles_duplicates() {
        let pts = DMatrix::from_row_slice(5, 2, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
        let a = kmeans(&pts, 3, 4, 50, 7).unwrap();
        let b = kmeans(&pts, 3, 4, 50, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.inertia, 0.0);
        assert!(kmeans(&pts, 6, 1, 10, 0).is_err());
    }
}
