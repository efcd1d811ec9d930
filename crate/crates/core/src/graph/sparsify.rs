use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{merge_weight, Graph};

/// Streaming per-row top-k selection followed by union symmetrization.
///
/// For each row, the `k` off-diagonal entries with the largest signed value
/// are retained (ties go to the lower column index). Exact zeros are not
/// edges and are discarded after selection. Each unordered pair kept by
/// either endpoint becomes an edge; when both endpoints kept it with
/// different values, the value of larger magnitude wins.
#[derive(Debug)]
pub struct TopKSelector {
    n: usize,
    k: usize,
    kept: BTreeMap<(usize, usize), f64>,
}

impl TopKSelector {
    /// `k` is clamped to `n - 1`, the number of off-diagonal candidates.
    pub fn new(n: usize, k: usize) -> Self {
        TopKSelector {
            n,
            k: k.min(n.saturating_sub(1)),
            kept: BTreeMap::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Indices of the retained entries of `row` (row index `i`).
    pub fn select(&self, i: usize, row: &[f64]) -> Vec<usize> {
        debug_assert_eq!(row.len(), self.n);
        let mut cols: Vec<usize> = (0..self.n).filter(|&j| j != i).collect();
        let by_value_then_index = |a: &usize, b: &usize| {
            row[*b]
                .partial_cmp(&row[*a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(b))
        };
        if self.k < cols.len() {
            cols.select_nth_unstable_by(self.k, by_value_then_index);
            cols.truncate(self.k);
        }
        cols.sort_by(by_value_then_index);
        cols
    }

    pub fn push_row(&mut self, i: usize, row: &[f64]) {
        for j in self.select(i, row) {
            let w = row[j];
            if w == 0.0 {
                continue;
            }
            self.kept
                .entry((i.min(j), i.max(j)))
                .and_modify(|old| *old = merge_weight(*old, w))
                .or_insert(w);
        }
    }

    pub fn finish(self) -> Graph {
        let n = self.n;
        Graph::new(n, self.kept.into_iter().map(|((u, v), w)| (u, v, w)), false)
            .expect("selected entries are in range and finite")
    }
}

/// Keep the `k` largest entries per row of a dense square matrix, then
/// symmetrize by union. `k > N` is clamped.
pub fn top_k_sparsify(dense: &DMatrix<f64>, k: usize) -> Graph {
    assert_eq!(dense.nrows(), dense.ncols(), "top_k_sparsify needs a square matrix");
    assert!(k >= 1, "top_k_sparsify needs k >= 1");
    let n = dense.nrows();
    let mut sel = TopKSelector::new(n, k);
    let mut row = vec![0.0; n];
    for i in 0..n {
        for (j, r) in row.iter_mut().enumerate() {
            *r = dense[(i, j)];
        }
        sel.push_row(i, &row);
    }
    sel.finish()
}
