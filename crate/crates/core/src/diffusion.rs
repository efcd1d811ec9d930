//! Personalized PageRank diffusion followed by top-k sparsification.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, TopKSelector};
use crate::jdr::DEFAULT_TOP_K;
use crate::linalg::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DiglConfig {
    /// Teleport probability, in `(0, 1]`.
    pub alpha: f64,
    pub top_k: usize,
    /// Stop when successive iterates differ by at most this much (max norm).
    pub tol: f64,
    pub max_iter: usize,
}

impl DiglConfig {
    pub fn new(alpha: f64) -> Self {
        DiglConfig {
            alpha,
            top_k: DEFAULT_TOP_K,
            tol: 1e-12,
            max_iter: 100_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {} is outside (0, 1]; the PPR kernel is undefined",
                self.alpha
            )));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidParameter("top_k must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiglOutput {
    pub graph: Graph,
    /// `alpha = 1`: the kernel is the identity and nothing survives the
    /// diagonal drop.
    pub identity_kernel: bool,
    /// Off-diagonal nonzeros of the kernel before sparsification.
    pub kernel_offdiag_nnz: usize,
    pub max_residual: f64,
}

/// `D^{-1/2} A D^{-1/2}`, with a unit self-loop on isolated nodes.
struct Transition {
    a: CsrMatrix,
    isolated: Vec<bool>,
}

impl Transition {
    fn new(g: &Graph) -> Result<Self> {
        let n = g.n_nodes();
        let a = g.to_undirected().adjacency();
        let mut deg = vec![0.0; n];
        for (i, j, w) in a.triplets() {
            if w < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "PPR diffusion needs nonnegative weights; edge ({i}, {j}) has {w}"
                )));
            }
            deg[i] += w;
        }
        let isolated: Vec<bool> = deg.iter().map(|&d| d == 0.0).collect();
        let inv_sqrt: Vec<f64> = deg
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect();
        let t: Vec<(usize, usize, f64)> = a
            .triplets()
            .map(|(i, j, w)| (i, j, w * inv_sqrt[i] * inv_sqrt[j]))
            .collect();
        Ok(Transition {
            a: CsrMatrix::from_triplets(n, n, &t),
            isolated,
        })
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.a.mul_vec(x, y);
        for (i, &iso) in self.isolated.iter().enumerate() {
            if iso {
                y[i] += x[i];
            }
        }
    }
}

/// Column `j` of `alpha (I - (1 - alpha) T)^-1` by fixed-point iteration.
fn kernel_column(t: &Transition, j: usize, cfg: &DiglConfig) -> Result<(Vec<f64>, f64)> {
    let n = t.isolated.len();
    let mut s = vec![0.0; n];
    s[j] = cfg.alpha;
    let mut ts = vec![0.0; n];
    let mut step = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        t.apply(&s, &mut ts);
        step = 0.0f64;
        for (i, (si, &tsi)) in s.iter_mut().zip(&ts).enumerate() {
            let e = if i == j { cfg.alpha } else { 0.0 };
            let next = e + (1.0 - cfg.alpha) * tsi;
            step = step.max((next - *si).abs());
            *si = next;
        }
        if step <= cfg.tol {
            return Ok((s, step));
        }
    }
    Err(Error::NonConvergence {
        matvecs: cfg.max_iter,
        worst_residual: step,
    })
}

/// The dense PPR kernel. Meant for small graphs and tests.
pub fn ppr_kernel(g: &Graph, cfg: &DiglConfig) -> Result<nalgebra::DMatrix<f64>> {
    cfg.validate()?;
    let t = Transition::new(g)?;
    let n = g.n_nodes();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| kernel_column(&t, j, cfg).map(|c| c.0))
        .collect::<Result<_>>()?;
    Ok(nalgebra::DMatrix::from_fn(n, n, |i, j| cols[j][i]))
}

/// Diffuse `g` with the PPR kernel and keep the `top_k` largest entries per
/// node. The kernel is symmetric, so each column doubles as a row.
pub fn ppr_diffuse(g: &Graph, cfg: &DiglConfig) -> Result<DiglOutput> {
    cfg.validate()?;
    let n = g.n_nodes();
    if cfg.alpha == 1.0 {
        return Ok(DiglOutput {
            graph: Graph::empty(n),
            identity_kernel: true,
            kernel_offdiag_nnz: 0,
            max_residual: 0.0,
        });
    }
    let t = Transition::new(g)?;
    let cols: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|j| kernel_column(&t, j, cfg))
        .collect::<Result<_>>()?;
    let mut sel = TopKSelector::new(n, cfg.top_k);
    let mut nnz = 0;
    let mut max_residual = 0.0f64;
    for (j, (col, res)) in cols.iter().enumerate() {
        nnz += col.iter().enumerate().filter(|&(i, &v)| i != j && v != 0.0).count();
        max_residual = max_residual.max(*res);
        sel.push_row(j, col);
    }
    Ok(DiglOutput {
        graph: sel.finish(),
        identity_kernel: false,
        kernel_offdiag_nnz: nnz,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn edge() -> Graph {
        Graph::new(2, [(0, 1, 1.0)], false).unwrap()
    }

    #[test]
    fn two_nodes_match_closed_form() {
        // T = [[0,1],[1,0]]; alpha (I - (1-alpha) T)^-1 = alpha/(1-b^2) [[1,b],[b,1]], b = 1-alpha.
        for alpha in [0.5, 0.15, 0.9] {
            let b = 1.0 - alpha;
            let c = alpha / (1.0 - b * b);
            let want = DMatrix::from_row_slice(2, 2, &[c, c * b, c * b, c]);
            let s = ppr_kernel(&edge(), &DiglConfig::new(alpha)).unwrap();
            assert!((s - want).amax() < 1e-10);
        }
        let out = ppr_diffuse(&edge(), &DiglConfig::new(0.5)).unwrap();
        assert!((out.graph.weight(0, 1) - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn unit_teleport_is_the_identity() {
        let out = ppr_diffuse(&edge(), &DiglConfig::new(1.0)).unwrap();
        assert!(out.identity_kernel);
        assert_eq!(out.graph.n_undirected_edges(), 0);
        assert_eq!(
            ppr_kernel(&edge(), &DiglConfig::new(1.0)).unwrap(),
            DMatrix::identity(2, 2)
        );
    }

    #[test]
    fn rejects_zero_alpha() {
        assert!(matches!(
            ppr_diffuse(&edge(), &DiglConfig::new(0.0)),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn reports_non_convergence() {
        let mut cfg = DiglConfig::new(0.01);
        cfg.max_iter = 3;
        assert!(matches!(ppr_diffuse(&edge(), &cfg), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn isolated_nodes_keep_their_mass() {
        let g = Graph::new(3, [(0, 1, 1.0)], false).unwrap();
        let s = ppr_kernel(&g, &DiglConfig::new(0.3)).unwrap();
        assert!((s[(2, 2)] - 1.0).abs() < 1e-10);
        assert_eq!(s[(0, 2)], 0.0);
    }

    fn sbm(n: usize, p_in: f64, p_out: f64, seed: u64) -> Graph {
        let mut rng = rng_from_seed(seed);
        let mut e = Vec::new();
        for i in 0..n {
            for j in 0..i {
                let p = if (i < n / 2) == (j < n / 2) { p_in } else { p_out };
                if rng.random_bool(p) {
                    e.push((j, i, 1.0));
                }
            }
        }
        Graph::new(n, e, false).unwrap()
    }

    #[test]
    fn diffusion_densifies_and_stays_nonnegative() {
        let g = sbm(100, 0.15, 0.03, 9);
        assert_eq!(g.n_components(), 1);
        let cfg = DiglConfig::new(0.05);
        let s = ppr_kernel(&g, &cfg).unwrap();
        assert!(s.iter().all(|&v| v >= 0.0));
        assert!((&s - s.transpose()).amax() < 1e-10);
        let out = ppr_diffuse(&g, &cfg).unwrap();
        assert!(out.kernel_offdiag_nnz > 2 * g.n_undirected_edges());
        assert!(out.graph.degrees().iter().all(|&d| d >= 64));
        assert!(out.graph.edges().iter().all(|e| e.weight > 0.0));
    }
}
