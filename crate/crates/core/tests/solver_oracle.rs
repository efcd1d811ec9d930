use jdr_core::graph::Graph;
use jdr_core::linalg::SymOperator;
use jdr_core::rng::{normal_vec, rng_from_seed};
use jdr_core::spectral::{eigs_top, svd_top, EigenOrdering, SolverMethod, SolverOptions};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Sparse symmetric matrix with Gaussian weights, about `deg` entries per row.
fn random_graph(n: usize, deg: usize, seed: u64) -> Graph {
    let mut rng = rng_from_seed(seed);
    let pick = normal_vec(&mut rng, n * deg * 3);
    let mut e = Vec::new();
    for k in 0..n * deg / 2 {
        let u = ((pick[3 * k].abs() * 1e6) as usize) % n;
        let v = ((pick[3 * k + 1].abs() * 1e6) as usize) % n;
        if u != v {
            e.push((u, v, pick[3 * k + 2]));
        }
    }
    Graph::new(n, e, false).unwrap()
}

fn opts(method: SolverMethod, seed: u64) -> SolverOptions {
    SolverOptions::default().with_method(method).with_seed(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn truncated_eigensolver_matches_dense(n in 20usize..=512, l in 1usize..=5, seed in any::<u64>(), abs in any::<bool>()) {
        let a = random_graph(n, 6, seed).adjacency();
        let ord = if abs { EigenOrdering::ByAbsDesc } else { EigenOrdering::ByValueDesc };
        let lz = eigs_top(&a, l, ord, &opts(SolverMethod::Lanczos, seed)).unwrap();
        let dn = eigs_top(&a, l, ord, &opts(SolverMethod::Dense, seed)).unwrap();
        for (x, y) in lz.values.iter().zip(&dn.values) {
            prop_assert!((x - y).abs() < 1e-8, "{:?} vs {:?}", lz.values, dn.values);
        }
        let mut av = vec![0.0; n];
        for (c, lam) in lz.values.iter().enumerate() {
            let v = lz.vectors.column(c);
            a.apply(v.as_slice(), &mut av);
            let r = av.iter().zip(v.iter()).map(|(p, q)| (p - lam * q).powi(2)).sum::<f64>().sqrt();
            prop_assert!(r < 1e-6 * lam.abs().max(1.0), "residual {r}");
        }
    }

    #[test]
    fn truncated_svd_matches_dense(n in 10usize..=300, f in 10usize..=200, l in 1usize..=5, seed in any::<u64>()) {
        let x = DMatrix::from_vec(n, f, normal_vec(&mut rng_from_seed(seed), n * f));
        let lz = svd_top(&x, l, &opts(SolverMethod::Lanczos, seed)).unwrap();
        let dn = svd_top(&x, l, &opts(SolverMethod::Dense, seed)).unwrap();
        let scale = dn.values[0];
        for (a, b) in lz.values.iter().zip(&dn.values) {
            prop_assert!((a - b).abs() < 1e-8 * scale, "{:?} vs {:?}", lz.values, dn.values);
        }
    }
}
