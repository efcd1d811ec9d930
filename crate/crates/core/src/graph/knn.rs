use super::{FeatureMatrix, Graph};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnnMetric {
    Cosine,
    Euclidean,
}

impl std::str::FromStr for KnnMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(KnnMetric::Cosine),
            "euclidean" => Ok(KnnMetric::Euclidean),
            other => Err(Error::InvalidParameter(format!(
                "unknown metric {other:?} (expected cosine or euclidean)"
            ))),
        }
    }
}

/// Connect each node to its `k` nearest neighbors (itself excluded) and
/// symmetrize by union with unit weights. Equal distances go to the lower
/// node index.
pub fn build_knn_graph(x: &FeatureMatrix, k: usize, metric: KnnMetric) -> Result<Graph> {
    let n = x.nrows();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!("knn needs 1 <= k < N (k={k}, N={n})")));
    }
    let mut rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i)).collect();
    if metric == KnnMetric::Cosine {
        for (i, r) in rows.iter_mut().enumerate() {
            let nrm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm == 0.0 {
                return Err(Error::ZeroNormRow { row: i });
            }
            r.iter_mut().for_each(|v| *v /= nrm);
        }
    }
    let sq_norms: Vec<f64> = rows.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();

    let mut edges = Vec::with_capacity(n * k);
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        dist.clear();
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = match metric {
                KnnMetric::Cosine => 1.0 - dot(&rows[i], &rows[j]),
                KnnMetric::Euclidean => (sq_norms[i] + sq_norms[j] - 2.0 * dot(&rows[i], &rows[j])).max(0.0),
            };
            dist.push((d, j));
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
        };
        dist.select_nth_unstable_by(k - 1, cmp);
        for &(_, j) in &dist[..k] {
            edges.push((i, j, 1.0));
        }
    }
    Graph::new(n, edges, false)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
