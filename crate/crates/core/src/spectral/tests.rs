use super::*;
use crate::linalg::CsrMatrix;
use crate::rng::{normal_vec, rng_from_seed};

/// Cyclic Jacobi rotations. Independent of nalgebra's QR-based solver.
fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut d: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    d.sort_by(|a, b| b.total_cmp(a));
    d
}

fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    let g = DMatrix::from_vec(n, n, normal_vec(&mut rng, n * n));
    (&g + g.transpose()) * 0.5
}

fn lanczos_opts() -> SolverOptions {
    SolverOptions::default().with_method(SolverMethod::Lanczos)
}

fn assert_orthonormal(v: &DMatrix<f64>, tol: f64) {
    let g = v.transpose() * v;
    let id = DMatrix::<f64>::identity(v.ncols(), v.ncols());
    assert!((g - id).amax() < tol);
}

#[test]
fn diagonal_by_value_and_by_abs() {
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -5.0, 1.0]));
    for opts in [SolverOptions::default(), lanczos_opts()] {
        let b = eigs_top(&d, 2, EigenOrdering::ByValueDesc, &opts).unwrap();
        assert!((b.values[0] - 3.0).abs() < 1e-12 && (b.values[1] - 1.0).abs() < 1e-12);
        assert!((b.vectors[(0, 0)] - 1.0).abs() < 1e-10);
        assert!((b.vectors[(2, 1)] - 1.0).abs() < 1e-10);
        let b = eigs_top(&d, 2, EigenOrdering::ByAbsDesc, &opts).unwrap();
        assert!((b.values[0] + 5.0).abs() < 1e-12 && (b.values[1] - 3.0).abs() < 1e-12);
        // Sign convention: largest-magnitude entry is positive.
        assert!((b.vectors[(1, 0)] - 1.0).abs() < 1e-10);
    }
}

#[test]
fn lanczos_matches_jacobi_on_random_symmetric() {
    for seed in 0..3 {
        let m = random_symmetric(30, seed);
        let oracle = jacobi_eigenvalues(&m);
        let b = eigs_top(&m, 5, EigenOrdering::ByValueDesc, &lanczos_opts().with_seed(seed)).unwrap();
        for k in 0..5 {
            assert!(
                (b.values[k] - oracle[k]).abs() < 1e-8,
                "{k}: {} vs {}",
                b.values[k],
                oracle[k]
            );
        }
        assert_orthonormal(&b.vectors, 1e-10);
        let mut by_abs = oracle.clone();
        by_abs.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
        let b = eigs_top(&m, 4, EigenOrdering::ByAbsDesc, &lanczos_opts()).unwrap();
        for k in 0..4 {
            assert!((b.values[k] - by_abs[k]).abs() < 1e-8);
        }
    }
}

#[test]
fn lanczos_with_restarts_matches_dense_on_sparse_graph() {
    // Ring with chords, N = 400: large enough to force restarts.
    let n = 400;
    let mut t = Vec::new();
    for i in 0..n {
        for s in [1usize, 7, 31] {
            let j = (i + s) % n;
            t.push((i, j, 1.0 + (i % 3) as f64 * 0.1));
            t.push((j, i, 1.0 + (i % 3) as f64 * 0.1));
        }
    }
    let a = CsrMatrix::from_triplets(n, n, &t);
    let dense = a.to_dense();
    let oracle = jacobi_eigenvalues(&dense);
    let opts = lanczos_opts().with_seed(4);
    let b = eigs_top(&a, 6, EigenOrdering::ByValueDesc, &opts).unwrap();
    for k in 0..6 {
        assert!(
            (b.values[k] - oracle[k]).abs() < 1e-8,
            "{k}: {} vs {}",
            b.values[k],
            oracle[k]
        );
    }
    let d = eigs_top(&a, 6, EigenOrdering::ByValueDesc, &SolverOptions::default()).unwrap();
    for k in 0..6 {
        assert!((b.values[k] - d.values[k]).abs() < 1e-8);
    }
}

#[test]
fn repeated_eigenvalues_are_all_found() {
    // Two disjoint 5-cliques: eigenvalue 4 twice.
    let n = 10;
    let mut t = Vec::new();
    for blk in 0..2 {
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    t.push((blk * 5 + i, blk * 5 + j, 1.0));
                }
            }
        }
    }
    let a = CsrMatrix::from_triplets(n, n, &t);
    let b = eigs_top(&a, 2, EigenOrdering::ByValueDesc, &lanczos_opts()).unwrap();
    assert!((b.values[0] - 4.0).abs() < 1e-10 && (b.values[1] - 4.0).abs() < 1e-10);
    assert_orthonormal(&b.vectors, 1e-10);
}

#[test]
fn by_abs_equals_by_value_on_psd() {
    let mut rng = rng_from_seed(9);
    let g = DMatrix::from_vec(40, 40, normal_vec(&mut rng, 1600));
    let m = &g * g.transpose();
    let a = eigs_top(&m, 3, EigenOrdering::ByValueDesc, &lanczos_opts()).unwrap();
    let b = eigs_top(&m, 3, EigenOrdering::ByAbsDesc, &lanczos_opts()).unwrap();
    for k in 0..3 {
        assert!((a.values[k] - b.values[k]).abs() < 1e-8 * a.values[0]);
    }
}

#[test]
fn rejects_bad_requests_and_asymmetry() {
    let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
    assert!(matches!(
        eigs_top(&m, 1, EigenOrdering::ByValueDesc, &SolverOptions::default()),
        Err(Error::InvalidParameter(_))
    ));
    assert!(matches!(
        eigs_top(&m, 1, EigenOrdering::ByValueDesc, &lanczos_opts()),
        Err(Error::InvalidParameter(_))
    ));
    let s = DMatrix::<f64>::identity(3, 3);
    assert!(eigs_top(&s, 0, EigenOrdering::ByValueDesc, &SolverOptions::default()).is_err());
    assert!(eigs_top(&s, 4, EigenOrdering::ByValueDesc, &SolverOptions::default()).is_err());
}

#[test]
fn tiny_budget_reports_nonconvergence() {
    let m = random_symmetric(200, 2);
    let opts = SolverOptions {
        max_iter: Some(12),
        ..lanczos_opts()
    };
    assert!(matches!(
        eigs_top(&m, 3, EigenOrdering::ByValueDesc, &opts),
        Err(Error::NonConvergence { .. })
    ));
}

#[test]
fn deterministic_for_fixed_seed() {
    let m = random_symmetric(120, 5);
    let a = eigs_top(&m, 4, EigenOrdering::ByAbsDesc, &lanczos_opts().with_seed(3)).unwrap();
    let b = eigs_top(&m, 4, EigenOrdering::ByAbsDesc, &lanczos_opts().with_seed(3)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn svd_matches_gram_eigenvalues() {
    let mut rng = rng_from_seed(11);
    let x = DMatrix::from_vec(40, 25, normal_vec(&mut rng, 1000));
    let oracle = jacobi_eigenvalues(&(x.transpose() * &x));
    for opts in [SolverOptions::default(), lanczos_opts()] {
        let s = svd_top(&x, 5, &opts).unwrap();
        for k in 0..5 {
            assert!((s.values[k] - oracle[k].sqrt()).abs() < 1e-8, "{k}");
            let xw = &x * s.right.column(k);
            assert!((xw - s.left.column(k) * s.values[k]).norm() < 1e-8 * s.values[0]);
        }
        assert_orthonormal(&s.left, 1e-9);
        assert_orthonormal(&s.right, 1e-9);
        assert!(!s.degenerate);
    }
    // Wide matrix goes through the other Gram side.
    let xt = x.transpose();
    let s = svd_top(&xt, 3, &lanczos_opts()).unwrap();
    for k in 0..3 {
        assert!((s.values[k] - oracle[k].sqrt()).abs() < 1e-8);
    }
}

#[test]
fn svd_rank_one() {
    let u = nalgebra::DVector::from_vec(vec![1.0, 2.0, 2.0]) / 3.0;
    let w = nalgebra::DVector::from_vec(vec![0.0, 0.6, 0.8, 0.0]);
    let x = &u * w.transpose() * 7.0;
    for opts in [SolverOptions::default(), lanczos_opts()] {
        let s = svd_top(&x, 1, &opts).unwrap();
        assert!((s.values[0] - 7.0).abs() < 1e-10);
        assert!((s.left.column(0) - &u).norm() < 1e-10);
        assert!((s.right.column(0) - &w).norm() < 1e-10);
    }
}

#[test]
fn svd_of_zero_matrix_is_flagged() {
    let x = DMatrix::<f64>::zeros(6, 4);
    for opts in [SolverOptions::default(), lanczos_opts()] {
        let s = svd_top(&x, 2, &opts).unwrap();
        assert_eq!(s.values, vec![0.0, 0.0]);
        assert!(s.degenerate);
        assert!((s.left.column(0).norm() - 1.0).abs() < 1e-12);
        assert_orthonormal(&s.left, 1e-12);
    }
}

#[test]
fn synthesize_is_exactly_symmetric() {
    let m = random_symmetric(12, 1);
    let b = eigs_top(&m, 12, EigenOrdering::ByValueDesc, &SolverOptions::default()).unwrap();
    let r = synthesize(&b.vectors, &b.values);
    assert_eq!(r, r.transpose());
    assert!((r - m).amax() < 1e-10);
}
