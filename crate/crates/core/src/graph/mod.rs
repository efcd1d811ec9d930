//! Graphs, node features and labels.
//!
//! A [`Graph`] stores a canonical edge list. Undirected graphs keep each
//! unordered pair once as `(min, max)`; directed graphs keep `(u, v)` as
//! given. Every algorithm works on the symmetrized view returned by
//! [`Graph::adjacency`], in which a directed pair `(u, v)`/`(v, u)` is
//! merged by keeping the weight of larger magnitude.

mod homophily;
mod io;
mod knn;
mod sparsify;

use std::collections::BTreeMap;

use nalgebra::DMatrix;

pub use homophily::{edge_homophily, node_homophily};
pub use io::{load_dataset, save_dataset};
pub use knn::{build_knn_graph, KnnMetric};
pub use sparsify::{top_k_sparsify, TopKSelector};

use crate::linalg::{CsrMatrix, RectOperator};
use crate::{Error, Result};

/// How the symmetrized view merges `(u, v)` and `(v, u)` in directed input.
pub const SYMMETRIZATION_RULE: &str = "max_abs";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<Edge>,
    directed: bool,
}

/// Keep the weight of larger magnitude; on equal magnitude keep the larger
/// signed value so the merge is order independent.
pub(crate) fn merge_weight(a: f64, b: f64) -> f64 {
    if b.abs() > a.abs() || (b.abs() == a.abs() && b > a) {
        b
    } else {
        a
    }
}

impl Graph {
    pub fn new<I>(n_nodes: usize, edges: I, directed: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, w) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u}, {v}) out of range for {n_nodes} nodes"
                )));
            }
            if !w.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u}, {v}) has non-finite weight {w}"
                )));
            }
            let key = if directed { (u, v) } else { (u.min(v), u.max(v)) };
            map.entry(key)
                .and_modify(|old| *old = merge_weight(*old, w))
                .or_insert(w);
        }
        let edges = map.into_iter().map(|((u, v), weight)| Edge { u, v, weight }).collect();
        Ok(Graph {
            n_nodes,
            edges,
            directed,
        })
    }

    pub fn empty(n_nodes: usize) -> Self {
        Graph {
            n_nodes,
            edges: Vec::new(),
            directed: false,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Canonical stored entries.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Unordered pairs `(u <= v, w)` of the symmetrized view.
    pub fn undirected_edges(&self) -> Vec<Edge> {
        if !self.directed {
            return self.edges.clone();
        }
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for e in &self.edges {
            map.entry((e.u.min(e.v), e.u.max(e.v)))
                .and_modify(|old| *old = merge_weight(*old, e.weight))
                .or_insert(e.weight);
        }
        map.into_iter().map(|((u, v), weight)| Edge { u, v, weight }).collect()
    }

    /// Number of unordered pairs in the symmetrized view, self-loops included.
    pub fn n_undirected_edges(&self) -> usize {
        if self.directed {
            self.undirected_edges().len()
        } else {
            self.edges.len()
        }
    }

    /// Symmetric sparse adjacency matrix.
    pub fn adjacency(&self) -> CsrMatrix {
        let mut trip = Vec::with_capacity(2 * self.edges.len());
        for e in self.undirected_edges() {
            trip.push((e.u, e.v, e.weight));
            if e.u != e.v {
                trip.push((e.v, e.u, e.weight));
            }
        }
        CsrMatrix::from_triplets(self.n_nodes, self.n_nodes, &trip)
    }

    /// Same graph, marked undirected, with directed pairs merged.
    pub fn to_undirected(&self) -> Graph {
        Graph {
            n_nodes: self.n_nodes,
            edges: self.undirected_edges(),
            directed: false,
        }
    }

    /// Neighbor counts in the symmetrized view (self-loops excluded).
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n_nodes];
        for e in self.undirected_edges() {
            if e.u != e.v {
                deg[e.u] += 1;
                deg[e.v] += 1;
            }
        }
        deg
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// Weight of `(u, v)` in the symmetrized view, zero when absent.
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        let key = (u.min(v), u.max(v));
        if !self.directed {
            return self
                .edges
                .binary_search_by(|e| (e.u, e.v).cmp(&key))
                .map(|p| self.edges[p].weight)
                .unwrap_or(0.0);
        }
        let fwd = self.edges.iter().find(|e| (e.u, e.v) == (u, v)).map(|e| e.weight);
        let bwd = self.edges.iter().find(|e| (e.u, e.v) == (v, u)).map(|e| e.weight);
        match (fwd, bwd) {
            (Some(a), Some(b)) => merge_weight(a, b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 0.0,
        }
    }

    /// Number of connected components of the symmetrized view.
    pub fn n_components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.n_nodes).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut count = self.n_nodes;
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
            if a != b {
                parent[a] = b;
                count -= 1;
            }
        }
        count
    }
}

/// Node feature matrix, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMatrix {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix),
}

impl FeatureMatrix {
    pub fn dense(m: DMatrix<f64>) -> Result<Self> {
        if let Some(p) = m.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "feature entry ({}, {}) is not finite",
                p % m.nrows(),
                p / m.nrows()
            )));
        }
        Ok(FeatureMatrix::Dense(m))
    }

    pub fn sparse(m: CsrMatrix) -> Result<Self> {
        if let Some((i, j, _)) = m.triplets().find(|t| !t.2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "feature entry ({i}, {j}) is not finite"
            )));
        }
        Ok(FeatureMatrix::Sparse(m))
    }

    pub fn nrows(&self) -> usize {
        match self {
            FeatureMatrix::Dense(m) => m.nrows(),
            FeatureMatrix::Sparse(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            FeatureMatrix::Dense(m) => m.ncols(),
            FeatureMatrix::Sparse(m) => m.ncols(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            FeatureMatrix::Dense(m) => m.clone(),
            FeatureMatrix::Sparse(m) => m.to_dense(),
        }
    }

    pub fn is_all_zero(&self) -> bool {
        match self {
            FeatureMatrix::Dense(m) => m.iter().all(|&v| v == 0.0),
            FeatureMatrix::Sparse(m) => m.triplets().all(|t| t.2 == 0.0),
        }
    }

    /// Row `i` as a dense vector.
    pub fn row(&self, i: usize) -> Vec<f64> {
        match self {
            FeatureMatrix::Dense(m) => m.row(i).iter().copied().collect(),
            FeatureMatrix::Sparse(m) => {
                let mut out = vec![0.0; m.ncols()];
                m.row_into(i, &mut out);
                out
            }
        }
    }
}

impl RectOperator for FeatureMatrix {
    fn nrows(&self) -> usize {
        FeatureMatrix::nrows(self)
    }

    fn ncols(&self) -> usize {
        FeatureMatrix::ncols(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self {
            FeatureMatrix::Dense(m) => RectOperator::apply(m, x, y),
            FeatureMatrix::Sparse(m) => RectOperator::apply(m, x, y),
        }
    }

    fn apply_t(&self, x: &[f64], y: &mut [f64]) {
        match self {
            FeatureMatrix::Dense(m) => m.apply_t(x, y),
            FeatureMatrix::Sparse(m) => m.apply_t(x, y),
        }
    }
}

/// Class id per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if let Some((i, &c)) = labels.iter().enumerate().find(|(_, &c)| c >= n_classes) {
            return Err(Error::InvalidParameter(format!(
                "label {c} of node {i} is not below class count {n_classes}"
            )));
        }
        Ok(LabelVector { labels, n_classes })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn one_hot(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.labels.len(), self.n_classes);
        for (i, &c) in self.labels.iter().enumerate() {
            m[(i, c)] = 1.0;
        }
        m
    }

    /// `+1` / `-1` encoding for two-class labels (class 1 is `+1`).
    pub fn signs(&self) -> Vec<f64> {
        self.labels.iter().map(|&c| if c == 1 { 1.0 } else { -1.0 }).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: Option<LabelVector>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        features: FeatureMatrix,
        labels: Option<LabelVector>,
    ) -> Result<Self> {
        let n = graph.n_nodes();
        if features.nrows() != n {
            return Err(Error::Dimension(format!(
                "features have {} rows but graph has {n} nodes",
                features.nrows()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Dimension(format!("{} labels for {n} nodes", l.len())));
            }
        }
        Ok(Dataset {
            name: name.into(),
            graph,
            features,
            labels,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.graph.n_nodes()
    }

    pub fn n_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| l.n_classes())
    }
}
