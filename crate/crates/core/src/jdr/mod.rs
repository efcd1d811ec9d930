//! Joint denoising and rewiring.
//!
//! Each iteration takes the leading eigenvectors of the adjacency iterate
//! and the leading left singular vectors of the feature iterate, pulls
//! every vector of one set toward its best-matching vector in the other,
//! and swaps the old vectors for the interpolated ones. The part of each
//! spectrum that is not touched stays exactly as it was, so an iterate is
//! always its input plus a low-rank correction.

use nalgebra::DMatrix;

use crate::alignment::alignment;
use crate::error::{Error, Result};
use crate::graph::{Dataset, FeatureMatrix, Graph, TopKSelector};
use crate::linalg::{CsrMatrix, LowRank, RectOperator, SymLowRank, SymOperator};
use crate::rng::{derive_index, derive_seed};
use crate::spectral::{eigs_top, eigs_top_from, svd_top_from, EigenOrdering, SolverOptions, SpectralBasis, SvdBasis};

/// Default number of entries kept per node when sparsifying the rewired graph.
pub const DEFAULT_TOP_K: usize = 64;
/// Rows densified at a time by [`update_a`].
pub const DEFAULT_BLOCK_SIZE: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct JdrConfig {
    pub k: usize,
    pub l_a: usize,
    pub l_x: usize,
    pub eta_a: f64,
    /// Interpolation rate for features inside the loop.
    pub eta_x1: f64,
    /// Blend between original and denoised features after the loop.
    pub eta_x2: f64,
    pub top_k: usize,
    pub ordering: EigenOrdering,
    pub binarize_features: bool,
    pub solver: SolverOptions,
    /// Number of eigen/singular vectors used for the alignment trace.
    /// `None` picks the number of classes, or `min(max(L_A, L_X), 16)`
    /// without labels.
    pub trace_l: Option<usize>,
    /// Rewire first and let denoising read the rewired graph.
    pub gauss_seidel: bool,
    pub block_size: usize,
}

impl JdrConfig {
    pub fn new(k: usize, l_a: usize, l_x: usize, eta_a: f64, eta_x1: f64, eta_x2: f64) -> Self {
        JdrConfig {
            k,
            l_a,
            l_x,
            eta_a,
            eta_x1,
            eta_x2,
            top_k: DEFAULT_TOP_K,
            ordering: EigenOrdering::ByValueDesc,
            binarize_features: false,
            solver: SolverOptions::default(),
            trace_l: None,
            gauss_seidel: false,
            block_size: DEFAULT_BLOCK_SIZE,
        }
    }

    /// Does nothing: all rates zero.
    pub fn identity() -> Self {
        JdrConfig::new(0, 0, 0, 0.0, 0.0, 0.0)
    }

    pub fn graph_active(&self) -> bool {
        self.eta_a > 0.0 && self.l_a > 0
    }

    pub fn features_active(&self) -> bool {
        self.eta_x1 > 0.0 && self.l_x > 0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, eta) in [("eta_A", self.eta_a), ("eta_X1", self.eta_x1), ("eta_X2", self.eta_x2)] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidParameter(format!("{name} = {eta} is outside [0, 1]")));
            }
        }
        if self.top_k == 0 {
            return Err(Error::InvalidParameter("top_k must be at least 1".into()));
        }
        if self.block_size == 0 {
            return Err(Error::InvalidParameter("block_size must be at least 1".into()));
        }
        if self.trace_l == Some(0) {
            return Err(Error::InvalidParameter("trace L must be at least 1".into()));
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::InvalidParameter("solver tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// A graph eigenvector pulled toward a feature singular vector.
    Graph,
    /// A feature singular vector pulled toward a graph eigenvector.
    Features,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchRecord {
    pub iteration: usize,
    pub side: Side,
    pub target: usize,
    pub source: usize,
    pub sign: i8,
}

/// Sparse adjacency plus a symmetric low-rank correction.
#[derive(Debug, Clone)]
pub struct AdjacencyIterate {
    pub base: CsrMatrix,
    pub correction: SymLowRank,
}

impl AdjacencyIterate {
    pub fn new(base: CsrMatrix) -> Self {
        let n = base.nrows();
        AdjacencyIterate {
            base,
            correction: SymLowRank::empty(n),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.base.nrows();
        let mut d = self.base.to_dense();
        if !self.correction.is_empty() {
            d += self.correction.dense_rows(0, n);
        }
        d
    }
}

impl SymOperator for AdjacencyIterate {
    fn dim(&self) -> usize {
        self.base.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        crate::linalg::SymPlusLowRank {
            base: &self.base,
            correction: &self.correction,
        }
        .apply(x, y)
    }
}

/// Feature matrix plus a low-rank correction.
#[derive(Debug, Clone)]
pub struct FeatureIterate {
    pub base: FeatureMatrix,
    pub correction: LowRank,
}

impl FeatureIterate {
    pub fn new(base: FeatureMatrix) -> Self {
        let (n, f) = (base.nrows(), base.ncols());
        FeatureIterate {
            base,
            correction: LowRank::empty(n, f),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = self.base.to_dense();
        if !self.correction.is_empty() {
            d += self.correction.to_dense();
        }
        d
    }
}

impl RectOperator for FeatureIterate {
    fn nrows(&self) -> usize {
        self.base.nrows()
    }

    fn ncols(&self) -> usize {
        self.base.ncols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        crate::linalg::RectPlusLowRank {
            base: &self.base,
            correction: &self.correction,
        }
        .apply(x, y)
    }

    fn apply_t(&self, x: &[f64], y: &mut [f64]) {
        crate::linalg::RectPlusLowRank {
            base: &self.base,
            correction: &self.correction,
        }
        .apply_t(x, y)
    }
}

/// Interpolate each target column toward the source column it overlaps
/// most, `(1 - eta) t_i + eta sign(<t_i, s_j>) s_j`. A source column may
/// serve several targets. Results are not renormalized.
pub fn interpolate_basis(
    target: &DMatrix<f64>,
    source: &DMatrix<f64>,
    eta: f64,
) -> (DMatrix<f64>, Vec<(usize, usize, i8)>) {
    assert_eq!(target.nrows(), source.nrows(), "bases must have the same length");
    let mut out = target.clone();
    let mut matches = Vec::with_capacity(target.ncols());
    for i in 0..target.ncols() {
        let t = target.column(i);
        let mut best = 0usize;
        let mut best_ip = 0.0f64;
        for j in 0..source.ncols() {
            let ip = t.dot(&source.column(j));
            if ip.abs() > best_ip.abs() {
                best = j;
                best_ip = ip;
            }
        }
        let sign: i8 = if best_ip < 0.0 { -1 } else { 1 };
        matches.push((i, best, sign));
        if source.ncols() == 0 {
            continue;
        }
        let s = source.column(best);
        for (o, (&tv, &sv)) in out.column_mut(i).iter_mut().zip(t.iter().zip(s.iter())) {
            *o = (1.0 - eta) * tv + eta * f64::from(sign) * sv;
        }
    }
    (out, matches)
}

/// Terms `lambda_i (v~_i v~_i^T - v_i v_i^T)` added to the adjacency
/// correction. Nothing is added when `eta = 0`.
pub fn rewire_step(
    adjacency: &mut AdjacencyIterate,
    a_basis: &SpectralBasis,
    x_basis: &SvdBasis,
    l_a: usize,
    eta: f64,
) -> Vec<(usize, usize, i8)> {
    let l = l_a.min(a_basis.len());
    if eta == 0.0 || l == 0 {
        return Vec::new();
    }
    let v = a_basis.vectors.columns(0, l).into_owned();
    let src = x_basis.left.columns(0, l.min(x_basis.len())).into_owned();
    let (vt, matches) = interpolate_basis(&v, &src, eta);
    let lam = &a_basis.values[..l];
    adjacency.correction.push_terms(&vt, lam);
    let neg: Vec<f64> = lam.iter().map(|x| -x).collect();
    adjacency.correction.push_terms(&v, &neg);
    adjacency.correction.compress();
    matches
}

/// Terms `sigma_i (u~_i - u_i) w_i^T` added to the feature correction.
/// Nothing is added when `eta = 0`.
pub fn denoise_step(
    features: &mut FeatureIterate,
    x_basis: &SvdBasis,
    a_basis: &SpectralBasis,
    l_x: usize,
    eta: f64,
) -> Vec<(usize, usize, i8)> {
    let Some((left, right, matches)) = denoise_terms(x_basis, a_basis, l_x, eta) else {
        return Vec::new();
    };
    features.correction.push_terms(&left, &right);
    features.correction.compress();
    matches
}

type Terms = (DMatrix<f64>, DMatrix<f64>, Vec<(usize, usize, i8)>);

fn denoise_terms(x_basis: &SvdBasis, a_basis: &SpectralBasis, l_x: usize, eta: f64) -> Option<Terms> {
    let l = l_x.min(x_basis.len());
    if eta == 0.0 || l == 0 {
        return None;
    }
    let u = x_basis.left.columns(0, l).into_owned();
    let src = a_basis.vectors.columns(0, l.min(a_basis.len())).into_owned();
    let (ut, matches) = interpolate_basis(&u, &src, eta);
    let mut left = ut - &u;
    for (i, mut c) in left.column_iter_mut().enumerate() {
        c *= x_basis.values[i];
    }
    let right = x_basis.right.columns(0, l).into_owned();
    Some((left, right, matches))
}

/// [`denoise_step`] that also keeps a cached Gram matrix in sync.
fn denoise_tracked(
    features: &mut FeatureIterate,
    gram: &mut Option<GramCache>,
    x_basis: &SvdBasis,
    a_basis: &SpectralBasis,
    l_x: usize,
    eta: f64,
) -> Vec<(usize, usize, i8)> {
    match gram {
        None => denoise_step(features, x_basis, a_basis, l_x, eta),
        Some(g) => {
            let Some((left, right, matches)) = denoise_terms(x_basis, a_basis, l_x, eta) else {
                return Vec::new();
            };
            g.update(features, &left, &right);
            features.correction.push_terms(&left, &right);
            features.correction.compress();
            matches
        }
    }
}

/// Final iterates before the update steps.
#[derive(Debug, Clone)]
pub struct JdrIterates {
    pub adjacency: AdjacencyIterate,
    pub features: FeatureIterate,
    pub alignment_trace: Vec<f64>,
    pub matches: Vec<MatchRecord>,
}

#[derive(Debug, Clone)]
pub struct JdrOutput {
    pub rewired_graph: Graph,
    pub denoised_features: FeatureMatrix,
    pub alignment_trace: Vec<f64>,
    pub per_iteration_matching: Vec<MatchRecord>,
}

fn trace_l(d: &Dataset, cfg: &JdrConfig) -> usize {
    let n = d.n_nodes();
    let f = d.features.ncols();
    let l = cfg.trace_l.unwrap_or_else(|| match &d.labels {
        Some(y) => y.n_classes(),
        None => cfg.l_a.max(cfg.l_x).min(16),
    });
    l.max(1).min(n.min(f))
}

fn records(iteration: usize, side: Side, m: Vec<(usize, usize, i8)>) -> impl Iterator<Item = MatchRecord> {
    m.into_iter().map(move |(target, source, sign)| MatchRecord {
        iteration,
        side,
        target,
        source,
        sign,
    })
}

/// `X~^T X~` for a tall dense feature iterate, kept up to date by rank
/// updates. Applying it costs `F^2` instead of two passes over `X~`.
struct GramCache {
    g: DMatrix<f64>,
}

impl GramCache {
    fn new(x: &FeatureMatrix, cfg: &JdrConfig) -> Option<Self> {
        let (n, f) = (x.nrows(), x.ncols());
        match x {
            FeatureMatrix::Dense(m) if f <= n && !cfg.solver.use_dense(n) => Some(Self::of(m)),
            _ => None,
        }
    }

    fn of(m: &DMatrix<f64>) -> Self {
        let g = m.tr_mul(m);
        GramCache {
            g: (&g + g.transpose()) * 0.5,
        }
    }

    /// Account for `X~ <- X~ + L R^T`, with `x` the iterate before the update.
    fn update(&mut self, x: &FeatureIterate, left: &DMatrix<f64>, right: &DMatrix<f64>) {
        let f = self.g.nrows();
        let mut q = DMatrix::zeros(f, left.ncols());
        let mut col = vec![0.0; f];
        for k in 0..left.ncols() {
            x.apply_t(left.column(k).as_slice(), &mut col);
            q.column_mut(k).copy_from_slice(&col);
        }
        let qr = &q * right.transpose();
        let ll = left.tr_mul(left);
        self.g += &qr + qr.transpose() + right * ll * right.transpose();
        let sym = (&self.g + self.g.transpose()) * 0.5;
        self.g = sym;
    }
}

struct Decomposition {
    eig: SpectralBasis,
    svd: SvdBasis,
    /// The cached Gram failed the residual check against the iterate.
    gram_stale: bool,
}

fn decompose(
    a: &AdjacencyIterate,
    x: &FeatureIterate,
    l_eig: usize,
    l_svd: usize,
    cfg: &JdrConfig,
    gram: Option<&GramCache>,
    iteration: usize,
    prev: Option<&Decomposition>,
) -> Result<Decomposition> {
    let seed = derive_index(cfg.solver.seed, iteration as u64);
    let eig_opts = cfg.solver.clone().with_seed(derive_seed(seed, "eigs"));
    let eig = eigs_top_from(a, l_eig, cfg.ordering, &eig_opts, prev.map(|p| &p.eig.vectors))?;
    let svd_opts = cfg.solver.clone().with_seed(derive_seed(seed, "svd"));
    // Warm starts live in the Gram space: right vectors when F <= N.
    let start = prev.map(|p| {
        if x.ncols() <= x.nrows() {
            &p.svd.right
        } else {
            &p.svd.left
        }
    });
    let exact = || svd_top_from(x, None::<&DMatrix<f64>>, l_svd, &svd_opts, start);
    let mut gram_stale = false;
    let svd = match gram {
        // Rounding in the cached Gram accumulates over iterations; the
        // residual check is against the iterate itself.
        Some(c) => match svd_top_from(x, Some(&c.g), l_svd, &svd_opts, start) {
            Err(Error::NonConvergence { .. }) => {
                gram_stale = true;
                exact()?
            }
            r => r?,
        },
        None => exact()?,
    };
    Ok(Decomposition { eig, svd, gram_stale })
}

/// Run the main loop and return the iterates without the update steps.
pub fn jdr_iterate(d: &Dataset, cfg: &JdrConfig) -> Result<JdrIterates> {
    cfg.validate()?;
    if d.features.is_all_zero() {
        return Err(Error::InvalidParameter("feature matrix is all zero".into()));
    }
    let n = d.n_nodes();
    let f = d.features.ncols();
    let lt = trace_l(d, cfg);
    let graph_on = cfg.graph_active();
    let feat_on = cfg.features_active();
    // Rewiring needs L_A pairs of A and L_A columns of U; denoising needs
    // L_X triplets of X and L_X columns of V.
    let mut l_eig = lt;
    let mut l_svd = lt;
    if graph_on {
        l_eig = l_eig.max(cfg.l_a);
        l_svd = l_svd.max(cfg.l_a);
    }
    if feat_on {
        l_eig = l_eig.max(cfg.l_x);
        l_svd = l_svd.max(cfg.l_x);
    }
    let l_eig = l_eig.min(n);
    let l_svd = l_svd.min(n.min(f));

    let mut a = AdjacencyIterate::new(d.graph.to_undirected().adjacency());
    let mut x = FeatureIterate::new(d.features.clone());
    let mut trace = Vec::with_capacity(cfg.k + 1);
    let mut matches = Vec::new();
    let mut gram = GramCache::new(&d.features, cfg);

    let wrap = |iteration: usize| {
        move |e: Error| Error::Iteration {
            iteration,
            source: Box::new(e),
        }
    };

    let mut prev: Option<Decomposition> = None;
    for it in 0..cfg.k {
        let dec = decompose(&a, &x, l_eig, l_svd, cfg, gram.as_ref(), it, prev.as_ref()).map_err(wrap(it))?;
        if dec.gram_stale {
            gram = Some(GramCache::of(&x.to_dense()));
        }
        trace.push(alignment(&dec.eig, &dec.svd, lt)?.value);
        if !graph_on && !feat_on {
            prev = Some(dec);
            continue;
        }
        if cfg.gauss_seidel {
            let m = rewire_step(
                &mut a,
                &dec.eig,
                &dec.svd,
                cfg.l_a,
                if graph_on { cfg.eta_a } else { 0.0 },
            );
            matches.extend(records(it, Side::Graph, m));
            if feat_on {
                let eig = if graph_on {
                    let seed = derive_seed(derive_index(cfg.solver.seed, it as u64), "eigs-gs");
                    eigs_top(&a, l_eig, cfg.ordering, &cfg.solver.clone().with_seed(seed)).map_err(wrap(it))?
                } else {
                    dec.eig.clone()
                };
                let m = denoise_tracked(&mut x, &mut gram, &dec.svd, &eig, cfg.l_x, cfg.eta_x1);
                matches.extend(records(it, Side::Features, m));
            }
        } else {
            // Both steps read the same iterate.
            if graph_on {
                let m = rewire_step(&mut a, &dec.eig, &dec.svd, cfg.l_a, cfg.eta_a);
                matches.extend(records(it, Side::Graph, m));
            }
            if feat_on {
                let m = denoise_tracked(&mut x, &mut gram, &dec.svd, &dec.eig, cfg.l_x, cfg.eta_x1);
                matches.extend(records(it, Side::Features, m));
            }
        }
        prev = Some(dec);
    }
    let dec = decompose(&a, &x, lt.min(n), lt, cfg, gram.as_ref(), cfg.k, None).map_err(wrap(cfg.k))?;
    trace.push(alignment(&dec.eig, &dec.svd, lt)?.value);

    Ok(JdrIterates {
        adjacency: a,
        features: x,
        alignment_trace: trace,
        matches,
    })
}

/// Densify the iterate in row blocks and keep the `top_k` largest entries
/// per node. An unchanged iterate whose degrees already fit is returned
/// as is.
pub fn update_a(a: &AdjacencyIterate, top_k: usize, block_size: usize) -> Graph {
    let n = a.base.nrows();
    let max_deg = (0..n)
        .map(|i| a.base.row(i).0.iter().filter(|&&j| j != i).count())
        .max()
        .unwrap_or(0);
    if a.correction.is_empty() && top_k >= max_deg {
        let mut t: Vec<(usize, usize, f64)> = a.base.triplets().filter(|&(i, j, _)| i <= j).collect();
        t.sort_by(|p, q| (p.0, p.1).cmp(&(q.0, q.1)));
        return Graph::new(n, t, false).expect("adjacency entries are valid");
    }
    let mut sel = TopKSelector::new(n, top_k);
    let mut row = vec![0.0; n];
    let block = block_size.max(1);
    let mut r0 = 0;
    while r0 < n {
        let r1 = (r0 + block).min(n);
        let corr = a.correction.dense_rows(r0, r1);
        for i in r0..r1 {
            a.base.row_into(i, &mut row);
            for (j, r) in row.iter_mut().enumerate() {
                *r += corr[(i - r0, j)];
            }
            sel.push_row(i, &row);
        }
        r0 = r1;
    }
    sel.finish()
}

/// `(1 - eta) X_original + eta X~`, optionally thresholded at 0.5.
pub fn update_x(x: &FeatureIterate, original: &FeatureMatrix, eta_x2: f64, binarize: bool) -> FeatureMatrix {
    let unchanged = eta_x2 == 0.0 || x.correction.is_empty();
    if unchanged && !binarize {
        return original.clone();
    }
    let x0 = original.to_dense();
    let blended = if unchanged {
        x0
    } else {
        let xt = x.to_dense();
        x0.zip_map(&xt, |a, b| (1.0 - eta_x2) * a + eta_x2 * b)
    };
    if binarize {
        let (n, f) = blended.shape();
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..f {
                if blended[(i, j)] >= 0.5 {
                    t.push((i, j, 1.0));
                }
            }
        }
        FeatureMatrix::sparse(CsrMatrix::from_triplets(n, f, &t)).expect("binary entries are finite")
    } else {
        FeatureMatrix::dense(blended).expect("blend of finite matrices is finite")
    }
}

/// Full pipeline: main loop, then the feature and graph update steps.
pub fn jdr_run(d: &Dataset, cfg: &JdrConfig) -> Result<JdrOutput> {
    let it = jdr_iterate(d, cfg)?;
    let rewired_graph = update_a(&it.adjacency, cfg.top_k, cfg.block_size);
    let denoised_features = update_x(&it.features, &d.features, cfg.eta_x2, cfg.binarize_features);
    Ok(JdrOutput {
        rewired_graph,
        denoised_features,
        alignment_trace: it.alignment_trace,
        per_iteration_matching: it.matches,
    })
}

/// Apply a JDR output to a dataset, keeping its labels and name.
pub fn apply_to_dataset(d: &Dataset, out: &JdrOutput) -> Result<Dataset> {
    Dataset::new(
        d.name.clone(),
        out.rewired_graph.clone(),
        out.denoised_features.clone(),
        d.labels.clone(),
    )
}
