//! Spectral clustering on a graph, or on a kNN graph built from features.

use nalgebra::DMatrix;

use super::kmeans::{kmeans, KmeansResult, DEFAULT_MAX_ITER, DEFAULT_RESTARTS};
use super::matching::matched_accuracy;
use crate::error::{Error, Result};
use crate::graph::{build_knn_graph, FeatureMatrix, Graph, KnnMetric, LabelVector};
use crate::linalg::SymOperator;
use crate::spectral::{eigs_top, EigenOrdering, SolverOptions};

/// Which graph matrix supplies the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectralMatrix {
    /// Symmetrized adjacency.
    #[default]
    Adjacency,
    /// `D - A` negated, so its leading eigenvectors are the Laplacian's
    /// smallest.
    NegLaplacian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOptions {
    pub k: usize,
    pub skip_first: bool,
    pub ordering: EigenOrdering,
    pub matrix: SpectralMatrix,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl ClusterOptions {
    pub fn new(k: usize, skip_first: bool, seed: u64) -> Self {
        ClusterOptions {
            k,
            skip_first,
            ordering: EigenOrdering::ByValueDesc,
            matrix: SpectralMatrix::Adjacency,
            seed,
            solver: SolverOptions::default().with_seed(seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub assignments: Vec<usize>,
    pub accuracy: f64,
    /// Cluster id to class id.
    pub permutation: Vec<usize>,
    pub kmeans_inertia: f64,
    /// Connected components; unknown for operators.
    pub n_components: Option<usize>,
    /// Set when the graph is disconnected, which can make the embedding
    /// degenerate.
    pub warning: Option<String>,
}

struct NegLaplacian<'a, O: SymOperator + ?Sized> {
    a: &'a O,
    deg: Vec<f64>,
}

impl<O: SymOperator + ?Sized> SymOperator for NegLaplacian<'_, O> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.a.apply(x, y);
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.deg) {
            *yi -= d * xi;
        }
    }
}

fn check(n: usize, labels: &LabelVector, opts: &ClusterOptions) -> Result<()> {
    if opts.k < 2 {
        return Err(Error::InvalidParameter(format!(
            "spectral clustering needs k >= 2, got {}",
            opts.k
        )));
    }
    if labels.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} nodes", labels.len())));
    }
    Ok(())
}

fn embed_and_cluster<O: SymOperator + ?Sized>(
    a: &O,
    labels: &LabelVector,
    opts: &ClusterOptions,
) -> Result<(KmeansResult, f64, Vec<usize>)> {
    let n = a.dim();
    let skip = usize::from(opts.skip_first);
    let l = (opts.k + skip).min(n);
    let basis = match opts.matrix {
        SpectralMatrix::Adjacency => eigs_top(a, l, opts.ordering, &opts.solver)?,
        SpectralMatrix::NegLaplacian => {
            let mut deg = vec![0.0; n];
            a.apply(&vec![1.0; n], &mut deg);
            eigs_top(&NegLaplacian { a, deg }, l, EigenOrdering::ByValueDesc, &opts.solver)?
        }
    };
    let cols = l - skip;
    let emb = DMatrix::from_fn(n, cols, |i, c| basis.vectors[(i, c + skip)]);
    let km = kmeans(&emb, opts.k, DEFAULT_RESTARTS, DEFAULT_MAX_ITER, opts.seed)?;
    let (accuracy, permutation) = matched_accuracy(&km.assignments, labels.labels());
    Ok((km, accuracy, permutation))
}

/// Embed with the leading eigenvectors, run k-means on the rows, and
/// score against `labels` up to relabeling.
pub fn spectral_cluster(g: &Graph, labels: &LabelVector, opts: &ClusterOptions) -> Result<ClusteringResult> {
    check(g.n_nodes(), labels, opts)?;
    if g.n_undirected_edges() == 0 {
        return Err(Error::InvalidParameter(
            "spectral clustering needs a nonempty graph".into(),
        ));
    }
    let (km, accuracy, permutation) = embed_and_cluster(&g.adjacency(), labels, opts)?;
    let n_components = g.n_components();
    let warning = (n_components > 1).then(|| format!("graph is disconnected ({n_components} components)"));
    Ok(ClusteringResult {
        assignments: km.assignments,
        accuracy,
        permutation,
        kmeans_inertia: km.inertia,
        n_components: Some(n_components),
        warning,
    })
}

/// Spectral clustering on a symmetric operator, such as a rewired
/// adjacency iterate before sparsification.
pub fn spectral_cluster_operator<O: SymOperator + ?Sized>(
    a: &O,
    labels: &LabelVector,
    opts: &ClusterOptions,
) -> Result<ClusteringResult> {
    check(a.dim(), labels, opts)?;
    let (km, accuracy, permutation) = embed_and_cluster(a, labels, opts)?;
    Ok(ClusteringResult {
        assignments: km.assignments,
        accuracy,
        permutation,
        kmeans_inertia: km.inertia,
        n_components: None,
        warning: None,
    })
}

/// Spectral clustering on the kNN graph of the feature rows.
pub fn spectral_cluster_features(
    x: &FeatureMatrix,
    labels: &LabelVector,
    knn_k: usize,
    metric: KnnMetric,
    opts: &ClusterOptions,
) -> Result<ClusteringResult> {
    let g = build_knn_graph(x, knn_k, metric)?;
    spectral_cluster(&g, labels, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_vec, rng_from_seed};

    fn two_cliques(m: usize) -> (Graph, LabelVector) {
        let mut e = Vec::new();
        for b in 0..2 {
            for i in 0..m {
                for j in i + 1..m {
                    e.push((b * m + i, b * m + j, 1.0));
                }
            }
        }
        let y = LabelVector::new((0..2 * m).map(|i| i / m).collect(), 2).unwrap();
        (Graph::new(2 * m, e, false).unwrap(), y)
    }

    #[test]
    fn disjoint_cliques_are_recovered() {
        let (g, y) = two_cliques(10);
        // Without skipping, the two leading eigenvectors are the block indicators.
        let r = spectral_cluster(&g, &y, &ClusterOptions::new(2, false, 1)).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.n_components, Some(2));
        assert!(r.warning.is_some());
    }

    #[test]
    fn fiedler_vector_splits_joined_cliques() {
        let (g, y) = two_cliques(10);
        let mut e: Vec<_> = g.edges().iter().map(|e| (e.u, e.v, e.weight)).collect();
        e.push((9, 10, 1.0));
        let g = Graph::new(20, e, false).unwrap();
        // The constant vector leads; the Fiedler vector carries the split.
        let mut o = ClusterOptions::new(2, false, 1);
        o.matrix = SpectralMatrix::NegLaplacian;
        let r = spectral_cluster(&g, &y, &o).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert!(r.warning.is_none());
    }

    #[test]
    fn operator_and_graph_agree() {
        let (g, y) = two_cliques(10);
        let o = ClusterOptions::new(2, false, 3);
        let a = spectral_cluster(&g, &y, &o).unwrap();
        let b = spectral_cluster_operator(&g.adjacency().to_dense(), &y, &o).unwrap();
        assert_eq!(a.accuracy, b.accuracy);
        assert_eq!(b.n_components, None);
    }

    #[test]
    fn relabeling_classes_keeps_accuracy() {
        let (g, y) = two_cliques(8);
        let flipped = LabelVector::new(y.labels().iter().map(|l| 1 - l).collect(), 2).unwrap();
        let o = ClusterOptions::new(2, false, 4);
        assert_eq!(
            spectral_cluster(&g, &y, &o).unwrap().accuracy,
            spectral_cluster(&g, &flipped, &o).unwrap().accuracy
        );
    }

    #[test]
    fn separable_blobs_from_features() {
        let mut rng = rng_from_seed(2);
        let n = 60;
        let noise = normal_vec(&mut rng, 2 * n);
        let x = DMatrix::from_fn(n, 2, |i, d| if i < n / 2 { 0.0 } else { 8.0 } + 0.5 * noise[2 * i + d]);
        let y = LabelVector::new((0..n).map(|i| usize::from(i >= n / 2)).collect(), 2).unwrap();
        let r = spectral_cluster_features(
            &FeatureMatrix::dense(x).unwrap(),
            &y,
            5,
            KnnMetric::Euclidean,
            &ClusterOptions::new(2, false, 0),
        )
        .unwrap();
        assert!(r.accuracy >= 0.95, "{}", r.accuracy);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (g, y) = two_cliques(4);
        assert!(spectral_cluster(&g, &y, &ClusterOptions::new(1, false, 0)).is_err());
        assert!(spectral_cluster(&Graph::empty(8), &y, &ClusterOptions::new(2, false, 0)).is_err());
    }
}
