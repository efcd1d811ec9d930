use super::{Graph, LabelVector};
use crate::{Error, Result};

fn check_cover(g: &Graph, y: &LabelVector) -> Result<()> {
    if y.len() != g.n_nodes() {
        return Err(Error::Dimension(format!(
            "{} labels for {} nodes",
            y.len(),
            g.n_nodes()
        )));
    }
    Ok(())
}

/// Fraction of symmetrized, deduplicated edges whose endpoints share a
/// label. Self-loops are not counted.
pub fn edge_homophily(g: &Graph, y: &LabelVector) -> Result<f64> {
    check_cover(g, y)?;
    let labels = y.labels();
    let (mut same, mut total) = (0usize, 0usize);
    for e in g.undirected_edges() {
        if e.u == e.v {
            continue;
        }
        total += 1;
        if labels[e.u] == labels[e.v] {
            same += 1;
        }
    }
    if total == 0 {
        return Err(Error::UndefinedHomophily);
    }
    Ok(same as f64 / total as f64)
}

/// Mean over non-isolated nodes of the fraction of same-label neighbors.
pub fn node_homophily(g: &Graph, y: &LabelVector) -> Result<f64> {
    check_cover(g, y)?;
    let labels = y.labels();
    let n = g.n_nodes();
    let mut same = vec![0usize; n];
    let mut deg = vec![0usize; n];
    for e in g.undirected_edges() {
        if e.u == e.v {
            continue;
        }
        let s = (labels[e.u] == labels[e.v]) as usize;
        for x in [e.u, e.v] {
            deg[x] += 1;
            same[x] += s;
        }
    }
    let ratios: Vec<f64> = (0..n)
        .filter(|&i| deg[i] > 0)
        .map(|i| same[i] as f64 / deg[i] as f64)
        .collect();
    if ratios.is_empty() {
        return Err(Error::UndefinedHomophily);
    }
    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clique_edges(nodes: &[usize]) -> Vec<(usize, usize, f64)> {
        let mut e = Vec::new();
        for (a, &u) in nodes.iter().enumerate() {
            for &v in &nodes[a + 1..] {
                e.push((u, v, 1.0));
            }
        }
        e
    }

    #[test]
    fn disjoint_same_label_cliques() {
        let mut e = clique_edges(&[0, 1, 2]);
        e.extend(clique_edges(&[3, 4, 5]));
        let g = Graph::new(6, e, false).unwrap();
        let y = LabelVector::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        assert_eq!(edge_homophily(&g, &y).unwrap(), 1.0);
        assert_eq!(node_homophily(&g, &y).unwrap(), 1.0);
    }

    #[test]
    fn complete_bipartite_across_classes() {
        let mut e = Vec::new();
        for u in 0..3 {
            for v in 3..7 {
                e.push((u, v, 1.0));
            }
        }
        let g = Graph::new(7, e, false).unwrap();
        let y = LabelVector::new(vec![0, 0, 0, 1, 1, 1, 1], 2).unwrap();
        assert_eq!(edge_homophily(&g, &y).unwrap(), 0.0);
    }

    #[test]
    fn edgeless_graph_is_an_error() {
        let g = Graph::empty(3);
        let y = LabelVector::new(vec![0, 1, 0], 2).unwrap();
        assert!(matches!(edge_homophily(&g, &y), Err(Error::UndefinedHomophily)));
    }

    proptest! {
        #[test]
        fn invariant_under_class_relabeling(
            edges in proptest::collection::vec((0usize..12, 0usize..12), 1..40),
            labels in proptest::collection::vec(0usize..3, 12),
            perm_seed in 0usize..6,
        ) {
            let g = Graph::new(12, edges.into_iter().map(|(u, v)| (u, v, 1.0)), false).unwrap();
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let p = perms[perm_seed];
            let y = LabelVector::new(labels.clone(), 3).unwrap();
            let z = LabelVector::new(labels.iter().map(|&c| p[c]).collect(), 3).unwrap();
            match (edge_homophily(&g, &y), edge_homophily(&g, &z)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false),
            }
        }
    }
}
