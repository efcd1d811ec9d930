//! Alignment between the leading eigenspace of a graph and the leading
//! left singular space of its features.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::Dataset;
use crate::jdr::{jdr_iterate, JdrConfig};
use crate::linalg::SymOperator;
use crate::spectral::{eigs_top, svd_top, EigenOrdering, SolverOptions, SpectralBasis, SvdBasis};

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    pub l: usize,
    /// Largest principal-angle cosine, i.e. `||V_L^T U_L||_2`.
    pub value: f64,
    /// All `L` cosines, descending.
    pub principal_angle_cosines: Vec<f64>,
}

fn orthonormal_copy(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

/// Principal-angle cosines between the spans of the first `l` columns of
/// `v` and `u`. Both inputs are orthonormalized first.
pub fn alignment_of_columns(v: &DMatrix<f64>, u: &DMatrix<f64>, l: usize) -> Result<AlignmentReport> {
    if v.nrows() != u.nrows() {
        return Err(Error::Dimension(format!(
            "bases have {} and {} rows",
            v.nrows(),
            u.nrows()
        )));
    }
    if l == 0 || l > v.ncols() || l > u.ncols() || l > v.nrows() {
        return Err(Error::InvalidParameter(format!(
            "alignment at L={l} needs that many columns (have {} and {})",
            v.ncols(),
            u.ncols()
        )));
    }
    let vq = orthonormal_copy(&v.columns(0, l).into_owned());
    let uq = orthonormal_copy(&u.columns(0, l).into_owned());
    let m = vq.transpose() * uq;
    let mut cos: Vec<f64> = m.singular_values().iter().copied().collect();
    cos.sort_by(|a, b| b.total_cmp(a));
    Ok(AlignmentReport {
        l,
        value: cos[0],
        principal_angle_cosines: cos,
    })
}

pub fn alignment(va: &SpectralBasis, ux: &SvdBasis, l: usize) -> Result<AlignmentReport> {
    alignment_of_columns(&va.vectors, &ux.left, l)
}

/// Alignment of a graph operator with a feature operator at `l`.
pub fn operator_alignment<A, X>(
    a: &A,
    x: &X,
    l: usize,
    ordering: EigenOrdering,
    opts: &SolverOptions,
) -> Result<AlignmentReport>
where
    A: SymOperator + ?Sized,
    X: crate::linalg::RectOperator + ?Sized,
{
    let va = eigs_top(a, l, ordering, opts)?;
    let ux = svd_top(x, l, opts)?;
    alignment(&va, &ux, l)
}

/// Alignment of a dataset's adjacency and features.
pub fn dataset_alignment(
    d: &Dataset,
    l: usize,
    ordering: EigenOrdering,
    opts: &SolverOptions,
) -> Result<AlignmentReport> {
    let a = d.graph.to_undirected().adjacency();
    operator_alignment(&a, &d.features, l, ordering, opts)
}

/// Alignment before and, when a configuration is given, after JDR. The
/// "after" value is measured on the final iterates, before sparsification,
/// and both values come from the run's own alignment trace.
pub fn alignment_sweep(d: &Dataset, l: usize, cfg: Option<&JdrConfig>) -> Result<Vec<(String, f64)>> {
    let Some(cfg) = cfg else {
        let before = dataset_alignment(d, l, EigenOrdering::ByValueDesc, &SolverOptions::default())?;
        return Ok(vec![("before".to_string(), before.value)]);
    };
    let n = d.n_nodes();
    if l == 0 || l > n.min(d.features.ncols()) {
        return Err(Error::InvalidParameter(format!(
            "alignment at L={l} on a {n}x{} problem",
            d.features.ncols()
        )));
    }
    let mut cfg = cfg.clone();
    cfg.trace_l = Some(l);
    let it = jdr_iterate(d, &cfg)?;
    let trace = &it.alignment_trace;
    Ok(vec![
        ("before".to_string(), trace[0]),
        ("after".to_string(), *trace.last().expect("trace has K + 1 entries")),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_vec, rng_from_seed};
    use proptest::prelude::*;

    fn e(n: usize, i: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, 1);
        m[(i, 0)] = 1.0;
        m
    }

    #[test]
    fn analytic_angles() {
        let id = DMatrix::<f64>::identity(4, 2);
        assert!((alignment_of_columns(&id, &id, 2).unwrap().value - 1.0).abs() < 1e-15);
        assert!(alignment_of_columns(&e(3, 0), &e(3, 1), 1).unwrap().value.abs() < 1e-15);
        let u = (e(3, 0) + e(3, 1)) / 2f64.sqrt();
        let r = alignment_of_columns(&e(3, 0), &u, 1).unwrap();
        assert!((r.value - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn reports_all_cosines() {
        // span{e0, e1} vs span{e0, (e1 + e2)/sqrt2}: cosines 1 and 1/sqrt2.
        let v = DMatrix::<f64>::identity(3, 2);
        let mut u = DMatrix::zeros(3, 2);
        u[(0, 0)] = 1.0;
        u[(1, 1)] = std::f64::consts::FRAC_1_SQRT_2;
        u[(2, 1)] = std::f64::consts::FRAC_1_SQRT_2;
        let r = alignment_of_columns(&v, &u, 2).unwrap();
        assert!((r.principal_angle_cosines[0] - 1.0).abs() < 1e-12);
        assert!((r.principal_angle_cosines[1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn too_many_columns_is_an_error() {
        let v = DMatrix::<f64>::identity(4, 2);
        assert!(alignment_of_columns(&v, &v, 3).is_err());
        assert!(alignment_of_columns(&v, &DMatrix::identity(5, 2), 1).is_err());
    }

    #[test]
    fn non_orthonormal_inputs_stay_in_range() {
        let mut rng = rng_from_seed(3);
        let v = DMatrix::from_vec(10, 3, normal_vec(&mut rng, 30));
        let r = alignment_of_columns(&v, &(&v * 2.5), 3).unwrap();
        assert!(r.principal_angle_cosines.iter().all(|c| (c - 1.0).abs() < 1e-10));
    }

    fn random_orthogonal(l: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng_from_seed(seed);
        DMatrix::from_vec(l, l, normal_vec(&mut rng, l * l)).qr().q()
    }

    proptest! {
        #[test]
        fn rotation_invariant(seed in 0u64..10_000, l in 1usize..5) {
            let mut rng = rng_from_seed(seed);
            let n = 12;
            let v = DMatrix::from_vec(n, l, normal_vec(&mut rng, n * l)).qr().q();
            let u = DMatrix::from_vec(n, l, normal_vec(&mut rng, n * l)).qr().q();
            let a = alignment_of_columns(&v, &u, l).unwrap();
            let q = random_orthogonal(l, seed ^ 0xabc);
            let r = random_orthogonal(l, seed ^ 0xdef);
            let b = alignment_of_columns(&(&v * q), &(&u * r), l).unwrap();
            prop_assert!((a.value - b.value).abs() < 1e-10);
            prop_assert!(a.value >= 0.0 && a.value <= 1.0 + 1e-10);
        }
    }
}
