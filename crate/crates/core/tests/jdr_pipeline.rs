mod common;

use jdr_core::jdr::{denoise_step, jdr_iterate, jdr_run, FeatureIterate, JdrConfig};
use jdr_core::spectral::{eigs_top, svd_top, EigenOrdering, SolverMethod, SolverOptions};

fn lanczos(mut cfg: JdrConfig) -> JdrConfig {
    cfg.solver = cfg.solver.with_method(SolverMethod::Lanczos);
    cfg
}

#[test]
fn zero_graph_rate_keeps_the_whole_operator() {
    let d = common::csbm(600, 240, 0.5, 1);
    let cfg = lanczos(JdrConfig::new(3, 4, 2, 0.0, 0.3, 0.0));
    let it = jdr_iterate(&d, &cfg).unwrap();
    let a0 = d.graph.adjacency().to_dense();
    assert!((it.adjacency.to_dense() - a0).amax() < 1e-12);
}

#[test]
fn rewired_operator_is_symmetric() {
    let d = common::csbm(600, 240, 0.5, 2);
    let it = jdr_iterate(&d, &lanczos(JdrConfig::new(4, 3, 3, 0.4, 0.3, 0.5))).unwrap();
    let a = it.adjacency.to_dense();
    assert!((&a - a.transpose()).amax() < 1e-10);
    let g = jdr_run(&d, &JdrConfig::new(4, 3, 3, 0.4, 0.3, 0.5))
        .unwrap()
        .rewired_graph;
    for e in g.edges() {
        assert_eq!(g.weight(e.u, e.v), g.weight(e.v, e.u));
    }
}

#[test]
fn identity_config_returns_the_sample() {
    let d = common::csbm(700, 280, -0.5, 3);
    let mut cfg = JdrConfig::identity();
    cfg.k = 2;
    let out = jdr_run(&d, &cfg).unwrap();
    assert_eq!(out.rewired_graph, d.graph);
    assert_eq!(out.denoised_features, d.features);
}

#[test]
fn weak_graph_trace_rises_at_first() {
    // phi = 0 row: K = 80, L_A = 1, eta_A = 1, features inactive; truncated.
    let d = common::csbm(1000, 400, 0.0, 4);
    let it = jdr_iterate(&d, &JdrConfig::new(4, 1, 0, 1.0, 0.0, 0.0)).unwrap();
    let t = &it.alignment_trace;
    assert!(t.windows(2).take(3).all(|w| w[1] > w[0]), "{t:?}");
}

#[test]
fn one_denoise_step_raises_label_overlap() {
    let (mut before, mut after) = (0.0, 0.0);
    let opts = SolverOptions::default();
    for s in 0..20 {
        let d = common::csbm(400, 160, 0.5, 100 + s);
        let y = d.labels.as_ref().unwrap().signs();
        let a = eigs_top(&d.graph.adjacency(), 2, EigenOrdering::ByValueDesc, &opts).unwrap();
        let xb = svd_top(&d.features, 2, &opts).unwrap();
        before += common::overlap_sq(xb.left.column(0).as_slice(), &y).sqrt();
        let mut x = FeatureIterate::new(d.features.clone());
        denoise_step(&mut x, &xb, &a, 2, 0.3);
        let u = svd_top(&x.to_dense(), 1, &opts).unwrap();
        after += common::overlap_sq(u.left.column(0).as_slice(), &y).sqrt();
    }
    assert!(
        after > before,
        "mean |<u, y>| before {} after {}",
        before / 20.0,
        after / 20.0
    );
}

#[test]
fn reruns_are_identical() {
    let d = common::csbm(600, 240, 0.75, 5);
    let cfg = JdrConfig::new(3, 2, 2, 0.3, 0.3, 0.5);
    let a = jdr_run(&d, &cfg).unwrap();
    let b = jdr_run(&d, &cfg).unwrap();
    assert_eq!(a.rewired_graph, b.rewired_graph);
    assert_eq!(a.denoised_features, b.denoised_features);
    assert_eq!(a.alignment_trace, b.alignment_trace);
}
