mod common;

use jdr_core::graph::{edge_homophily, load_dataset, save_dataset, Dataset, FeatureMatrix, Graph, LabelVector};
use jdr_core::jdr::{jdr_run, JdrConfig};
use jdr_core::linalg::CsrMatrix;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn canonical(g: &Graph) -> Vec<(usize, usize, u64)> {
    g.undirected_edges()
        .iter()
        .map(|e| (e.u, e.v, e.weight.to_bits()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weighted_graph_and_dense_features_round_trip(
        edges in proptest::collection::vec((0usize..50, 0usize..50, -5.0f64..5.0), 0..200),
        feats in proptest::collection::vec(-1e3f64..1e3, 50 * 3),
    ) {
        let edges: Vec<_> = edges.into_iter().filter(|e| e.0 != e.1 && e.2 != 0.0).collect();
        let g = Graph::new(50, edges, false).unwrap();
        let x = FeatureMatrix::dense(DMatrix::from_vec(50, 3, feats)).unwrap();
        let y = LabelVector::new((0..50).map(|i| i % 3).collect(), 3).unwrap();
        let d = Dataset::new("rt", g, x, Some(y)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&d, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        prop_assert_eq!(canonical(&back.graph), canonical(&d.graph));
        prop_assert!((back.features.to_dense() - d.features.to_dense()).amax() < 1e-15);
        prop_assert_eq!(back, d);
    }
}

#[test]
fn sparse_features_round_trip() {
    let x = CsrMatrix::from_triplets(4, 6, &[(0, 1, 0.5), (2, 5, -1.25), (3, 0, 3.0)]);
    let g = Graph::new(4, vec![(0, 1, 1.0), (2, 3, 1.0)], false).unwrap();
    let d = Dataset::new("sparse", g, FeatureMatrix::sparse(x).unwrap(), None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&d, dir.path()).unwrap();
    assert_eq!(load_dataset(dir.path()).unwrap(), d);
}

#[test]
fn jdr_output_is_unchanged_by_a_save_load_cycle() {
    let d = common::csbm(300, 120, 0.5, 8);
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&d, dir.path()).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    let cfg = JdrConfig::new(3, 2, 2, 0.4, 0.3, 0.6);
    let a = jdr_run(&d, &cfg).unwrap();
    let b = jdr_run(&back, &cfg).unwrap();
    assert_eq!(a.rewired_graph, b.rewired_graph);
    assert_eq!(a.denoised_features, b.denoised_features);
}

/// Runs only when `JDR_CORA_DIR` points at a Cora export in the text format.
#[test]
fn cora_export_matches_published_counts() {
    let Ok(dir) = std::env::var("JDR_CORA_DIR") else {
        eprintln!("JDR_CORA_DIR not set; skipping");
        return;
    };
    let d = load_dataset(dir).unwrap();
    assert_eq!(d.n_nodes(), 2708);
    assert_eq!(d.graph.n_undirected_edges(), 5278);
    assert_eq!(d.features.ncols(), 1433);
    let h = edge_homophily(&d.graph, d.labels.as_ref().unwrap()).unwrap();
    assert!((h - 0.810).abs() <= 0.005, "edge homophily {h}");
}
