//! Truncated symmetric eigendecomposition and SVD.
//!
//! Both routes share one matrix-free Lanczos driver. Small problems (and
//! callers that ask for it) go through a dense nalgebra decomposition
//! instead, which also serves as the oracle in tests.

mod lanczos;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, rect_to_dense, sym_to_dense, RectOperator, SymOperator};
use crate::rng::{derive_index, derive_seed, normal_vec, rng_from_seed};
use lanczos::{Ends, Lanczos};

/// Problems up to this dimension are solved densely under [`SolverMethod::Auto`].
pub const DENSE_AUTO_MAX: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenOrdering {
    /// Largest signed eigenvalues first.
    #[default]
    ByValueDesc,
    /// Largest magnitude first; ties put the larger signed value first.
    ByAbsDesc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMethod {
    #[default]
    Auto,
    Lanczos,
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    /// Budget in operator applications. `None` means `10 * L * ceil(sqrt(N))`.
    pub max_iter: Option<usize>,
    pub seed: u64,
    pub method: SolverMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: None,
            seed: 0,
            method: SolverMethod::Auto,
        }
    }
}

impl SolverOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_method(mut self, method: SolverMethod) -> Self {
        self.method = method;
        self
    }

    fn budget(&self, l: usize, n: usize) -> usize {
        self.max_iter
            .unwrap_or_else(|| 10 * l * (n as f64).sqrt().ceil() as usize)
            .max(1)
    }

    pub(crate) fn use_dense(&self, n: usize) -> bool {
        match self.method {
            SolverMethod::Dense => true,
            SolverMethod::Lanczos => false,
            SolverMethod::Auto => n <= DENSE_AUTO_MAX,
        }
    }
}

/// Leading eigenpairs. Columns of `vectors` are orthonormal and each has
/// its largest-magnitude entry nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub ordering: EigenOrdering,
}

impl SpectralBasis {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Leading singular triplets, `X w_i = sigma_i u_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdBasis {
    pub left: DMatrix<f64>,
    pub values: Vec<f64>,
    pub right: DMatrix<f64>,
    /// Some requested singular value is zero, so the corresponding left
    /// vector is an arbitrary unit vector.
    pub degenerate: bool,
}

impl SvdBasis {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn canonical_sign(v: &mut [f64]) -> bool {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
        true
    } else {
        false
    }
}

fn sort_key(ordering: EigenOrdering) -> impl Fn(&f64, &f64) -> std::cmp::Ordering {
    move |a, b| match ordering {
        EigenOrdering::ByValueDesc => b.total_cmp(a),
        EigenOrdering::ByAbsDesc => b.abs().total_cmp(&a.abs()).then(b.total_cmp(a)),
    }
}

fn key(ordering: EigenOrdering, v: f64) -> f64 {
    match ordering {
        EigenOrdering::ByValueDesc => v,
        EigenOrdering::ByAbsDesc => v.abs(),
    }
}

/// Sort `(values, vectors)` by `ordering` and keep the first `l`.
fn select(values: &[f64], vectors: &DMatrix<f64>, l: usize, ordering: EigenOrdering) -> (Vec<f64>, DMatrix<f64>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let cmp = sort_key(ordering);
    idx.sort_by(|&a, &b| cmp(&values[a], &values[b]).then(a.cmp(&b)));
    idx.truncate(l);
    let vals = idx.iter().map(|&i| values[i]).collect();
    let vecs = DMatrix::from_fn(vectors.nrows(), idx.len(), |r, c| vectors[(r, idx[c])]);
    (vals, vecs)
}

/// Lanczos for the `l` leading eigenpairs, followed by deflated check
/// runs that catch eigenvalues missed because of multiplicity.
fn lanczos_leading<O: SymOperator + ?Sized>(
    op: &O,
    l: usize,
    ordering: EigenOrdering,
    accept: lanczos::Accept<'_>,
    opts: &SolverOptions,
    start: Option<&DMatrix<f64>>,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = op.dim();
    let ends = match ordering {
        EigenOrdering::ByValueDesc => Ends::Largest,
        EigenOrdering::ByAbsDesc => Ends::Both,
    };
    let budget = opts.budget(l, n);
    let main = Lanczos {
        op,
        deflate: None,
        ends,
        count: l,
        max_matvecs: budget,
        seed: derive_seed(opts.seed, "lanczos"),
        start,
        accept,
    }
    .run()
    .map_err(|u| Error::NonConvergence {
        matvecs: u.matvecs,
        worst_residual: u.worst_residual,
    })?;
    let (mut values, mut vectors) = select(&main.values, &main.vectors, l, ordering);

    // The leading eigenvalue is always found; at most l - 1 copies of found
    // values can hide behind it. A check run only has to decide whether its
    // candidate beats the current worst value, so it first runs loose and is
    // repeated at full accuracy only when the answer is not clear.
    let check_budget = main.matvecs.max(50);
    let loose = |t: f64, r: f64, s: f64| accept(t, r * LOOSE_CHECK, s);
    for round in 0..l - 1 {
        if vectors.ncols() >= n {
            break;
        }
        let seed = derive_index(derive_seed(opts.seed, "lanczos-check"), round as u64);
        let check = |accept: lanczos::Accept<'_>| {
            Lanczos {
                op,
                deflate: Some(&vectors),
                ends,
                count: 1,
                max_matvecs: check_budget,
                seed,
                start: None,
                accept,
            }
            .run()
            .ok()
            .and_then(|extra| {
                let best = (0..extra.values.len())
                    .max_by(|&a, &b| key(ordering, extra.values[a]).total_cmp(&key(ordering, extra.values[b])))?;
                Some((extra, best))
            })
        };
        let worst = *values.last().expect("l >= 1");
        let bar = key(ordering, worst) + opts.tol * worst.abs().max(1.0);
        // Nothing converging within the budget means no eigenvalue outside
        // the found set stands clear of the rest of the spectrum.
        let Some((rough, best)) = check(&loose) else {
            break;
        };
        if key(ordering, rough.values[best]) + rough.residuals[best] <= bar {
            break;
        }
        let Some((extra, best)) = check(accept) else {
            break;
        };
        let cand = extra.values[best];
        if key(ordering, cand) <= bar {
            break;
        }
        let last = values.len() - 1;
        values[last] = cand;
        vectors.column_mut(last).copy_from(&extra.vectors.column(best));
        (values, vectors) = select(&values, &vectors, l, ordering);
    }
    polish(op, values, vectors, ordering, accept)
}

fn apply_columns<O: SymOperator + ?Sized>(op: &O, v: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(v.nrows(), v.ncols());
    let mut y = vec![0.0; v.nrows()];
    for c in 0..v.ncols() {
        op.apply(v.column(c).as_slice(), &mut y);
        out.column_mut(c).copy_from_slice(&y);
    }
    out
}

const POLISH_ROUNDS: usize = 3;

/// Residual slack of the first, cheap check run.
const LOOSE_CHECK: f64 = 1e-4;

/// Ritz estimates understate the true residual once orthogonality drifts.
/// Pairs that fail `accept` on their true residual get Rayleigh-Ritz steps
/// on `span[V, AV]`.
fn polish<O: SymOperator + ?Sized>(
    op: &O,
    mut values: Vec<f64>,
    mut vectors: DMatrix<f64>,
    ordering: EigenOrdering,
    accept: lanczos::Accept<'_>,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (n, l) = vectors.shape();
    for _ in 0..POLISH_ROUNDS {
        let av = apply_columns(op, &vectors);
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ok = (0..l).all(|c| {
            let r = (av.column(c) - vectors.column(c) * values[c]).norm();
            accept(values[c], r, scale)
        });
        if ok || 2 * l > n {
            break;
        }
        let mut stacked = DMatrix::zeros(n, 2 * l);
        stacked.columns_mut(0, l).copy_from(&vectors);
        stacked.columns_mut(l, l).copy_from(&av);
        let q = stacked.qr().q();
        let h = q.tr_mul(&apply_columns(op, &q));
        let eig = SymmetricEigen::new((&h + h.transpose()) * 0.5);
        let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let (v, y) = select(&vals, &eig.eigenvectors, l, ordering);
        values = v;
        vectors = q * y;
    }
    Ok((values, vectors))
}

fn check_symmetric<O: SymOperator + ?Sized>(op: &O, seed: u64) -> Result<()> {
    let n = op.dim();
    let mut rng = rng_from_seed(derive_seed(seed, "symmetry-probe"));
    let x = normal_vec(&mut rng, n);
    let y = normal_vec(&mut rng, n);
    let mut ax = vec![0.0; n];
    let mut ay = vec![0.0; n];
    op.apply(&x, &mut ax);
    op.apply(&y, &mut ay);
    let (a, b) = (dot(&y, &ax), dot(&x, &ay));
    let scale = norm(&ax) * norm(&y) + norm(&ay) * norm(&x);
    if (a - b).abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidParameter("operator is not symmetric".into()));
    }
    Ok(())
}

/// The `l` leading eigenpairs of a symmetric operator.
pub fn eigs_top<O: SymOperator + ?Sized>(
    op: &O,
    l: usize,
    ordering: EigenOrdering,
    opts: &SolverOptions,
) -> Result<SpectralBasis> {
    eigs_top_from(op, l, ordering, opts, None)
}

/// [`eigs_top`] with the iterative solver started near the span of `start`,
/// typically the basis of a nearby operator.
pub fn eigs_top_from<O: SymOperator + ?Sized>(
    op: &O,
    l: usize,
    ordering: EigenOrdering,
    opts: &SolverOptions,
    start: Option<&DMatrix<f64>>,
) -> Result<SpectralBasis> {
    let n = op.dim();
    if l == 0 || l > n {
        return Err(Error::InvalidParameter(format!(
            "requested {l} eigenpairs of a {n}-dimensional operator"
        )));
    }
    let (values, mut vectors) = if opts.use_dense(n) {
        let m = sym_to_dense(op);
        if (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
            return Err(Error::InvalidParameter("operator is not symmetric".into()));
        }
        let m = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(m);
        let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        select(&vals, &eig.eigenvectors, l, ordering)
    } else {
        check_symmetric(op, opts.seed)?;
        let inner = 0.1 * opts.tol;
        let accept = move |theta: f64, r: f64, _scale: f64| r <= inner * theta.abs().max(1.0);
        let (values, vectors) = lanczos_leading(op, l, ordering, &accept, opts, start)?;
        // Explicit residual check on the returned pairs.
        let mut worst = 0.0f64;
        let mut av = vec![0.0; n];
        for (i, &lam) in values.iter().enumerate() {
            let v = vectors.column(i);
            op.apply(v.as_slice(), &mut av);
            let r = av
                .iter()
                .zip(v.iter())
                .map(|(a, x)| (a - lam * x).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r / lam.abs().max(1.0));
        }
        if worst > opts.tol {
            return Err(Error::NonConvergence {
                matvecs: opts.budget(l, n),
                worst_residual: worst,
            });
        }
        (values, vectors)
    };
    for mut c in vectors.column_iter_mut() {
        canonical_sign(c.as_mut_slice());
    }
    Ok(SpectralBasis {
        values,
        vectors,
        ordering,
    })
}

/// `X^T X` (right) or `X X^T` (left) without forming it.
struct Gram<'a, O: RectOperator + ?Sized> {
    x: &'a O,
    right: bool,
}

impl<O: RectOperator + ?Sized> SymOperator for Gram<'_, O> {
    fn dim(&self) -> usize {
        if self.right {
            self.x.ncols()
        } else {
            self.x.nrows()
        }
    }

    fn apply(&self, v: &[f64], y: &mut [f64]) {
        if self.right {
            let mut t = vec![0.0; self.x.nrows()];
            self.x.apply(v, &mut t);
            self.x.apply_t(&t, y);
        } else {
            let mut t = vec![0.0; self.x.ncols()];
            self.x.apply_t(v, &mut t);
            self.x.apply(&t, y);
        }
    }
}

/// Unit vector orthogonal to the first `k` columns of `m`.
fn orthogonal_unit(m: &DMatrix<f64>, k: usize) -> Vec<f64> {
    let n = m.nrows();
    for start in 0..n {
        let mut v = vec![0.0; n];
        v[start] = 1.0;
        for _ in 0..2 {
            for j in 0..k {
                let c = m.column(j);
                let t = dot(c.as_slice(), &v);
                crate::linalg::axpy(-t, c.as_slice(), &mut v);
            }
        }
        let nv = norm(&v);
        if nv > 0.5 {
            v.iter_mut().for_each(|x| *x /= nv);
            return v;
        }
    }
    unreachable!("fewer than n columns always leave room")
}

/// The `l` leading singular triplets of `x`.
pub fn svd_top<O: RectOperator + ?Sized>(x: &O, l: usize, opts: &SolverOptions) -> Result<SvdBasis> {
    svd_impl(x, None, l, opts, None)
}

/// [`svd_top`] with the iterative phase run on `gram`, which must apply
/// `X^T X` when `X` has no more columns than rows and `X X^T` otherwise.
/// Useful when the Gram matrix is much cheaper to apply than `X` twice.
pub fn svd_top_with_gram<O, G>(x: &O, gram: &G, l: usize, opts: &SolverOptions) -> Result<SvdBasis>
where
    O: RectOperator + ?Sized,
    G: SymOperator,
{
    svd_top_from(x, Some(gram), l, opts, None)
}

/// The SVD entry point with every option: an optional Gram operator (see
/// [`svd_top_with_gram`]) and an optional warm start given as right
/// singular vectors when `X` has no more columns than rows, left ones
/// otherwise.
pub fn svd_top_from<O, G>(
    x: &O,
    gram: Option<&G>,
    l: usize,
    opts: &SolverOptions,
    start: Option<&DMatrix<f64>>,
) -> Result<SvdBasis>
where
    O: RectOperator + ?Sized,
    G: SymOperator,
{
    if let Some(gram) = gram {
        if gram.dim() != x.nrows().min(x.ncols()) {
            return Err(Error::Dimension(format!(
                "Gram operator of size {} for a {}x{} matrix",
                gram.dim(),
                x.nrows(),
                x.ncols()
            )));
        }
    }
    svd_impl(x, gram.map(|g| g as &dyn SymOperator), l, opts, start)
}

fn svd_impl<O: RectOperator + ?Sized>(
    x: &O,
    gram: Option<&dyn SymOperator>,
    l: usize,
    opts: &SolverOptions,
    start: Option<&DMatrix<f64>>,
) -> Result<SvdBasis> {
    let (n, f) = (x.nrows(), x.ncols());
    if l == 0 || l > n.min(f) {
        return Err(Error::InvalidParameter(format!(
            "requested {l} singular triplets of a {n}x{f} matrix"
        )));
    }
    let mut left = DMatrix::zeros(n, l);
    let mut right = DMatrix::zeros(f, l);
    let mut values = vec![0.0; l];

    if opts.use_dense(n.max(f)) {
        let dense = rect_to_dense(x);
        let svd = dense.svd(true, true);
        let u = svd.u.expect("requested");
        let vt = svd.v_t.expect("requested");
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&a, &b| {
            svd.singular_values[b]
                .total_cmp(&svd.singular_values[a])
                .then(a.cmp(&b))
        });
        for (c, &i) in idx.iter().take(l).enumerate() {
            values[c] = svd.singular_values[i];
            left.column_mut(c).copy_from(&u.column(i));
            right.column_mut(c).copy_from(&vt.row(i).transpose());
        }
    } else {
        let use_right = f <= n;
        let own = Gram { x, right: use_right };
        let gram: &dyn SymOperator = gram.unwrap_or(&own);
        let inner = 0.1 * opts.tol;
        let accept =
            move |theta: f64, r: f64, scale: f64| r <= inner * (theta.max(0.0) * scale).sqrt() || r <= 1e-14 * scale;
        let (_theta, vecs) = lanczos_leading(gram, l, EigenOrdering::ByValueDesc, &accept, opts, start)?;
        let other = if use_right { n } else { f };
        let mut img = vec![0.0; other];
        for c in 0..l {
            let v = vecs.column(c);
            if use_right {
                x.apply(v.as_slice(), &mut img);
            } else {
                x.apply_t(v.as_slice(), &mut img);
            }
            values[c] = norm(&img);
            let (src, dst) = if use_right {
                (&mut right, &mut left)
            } else {
                (&mut left, &mut right)
            };
            src.column_mut(c).copy_from(&v);
            if values[c] > 0.0 {
                for (d, s) in dst.column_mut(c).iter_mut().zip(&img) {
                    *d = s / values[c];
                }
            }
        }
        // Recomputed norms may swap near-equal values.
        let mut idx: Vec<usize> = (0..l).collect();
        idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        values = idx.iter().map(|&i| values[i]).collect();
        left = DMatrix::from_fn(n, l, |r, c| left[(r, idx[c])]);
        right = DMatrix::from_fn(f, l, |r, c| right[(r, idx[c])]);
    }

    let smax = values[0];
    let mut degenerate = false;
    for c in 0..l {
        if smax == 0.0 || values[c] <= 1e-12 * smax {
            degenerate = true;
            // Vectors for a zero singular value are arbitrary units.
            if left.column(c).norm() == 0.0 {
                let u = orthogonal_unit(&left, c);
                left.column_mut(c).copy_from_slice(&u);
            }
            if right.column(c).norm() == 0.0 {
                let w = orthogonal_unit(&right, c);
                right.column_mut(c).copy_from_slice(&w);
            }
        }
    }

    if !opts.use_dense(n.max(f)) {
        let mut worst = 0.0f64;
        let mut xw = vec![0.0; n];
        let mut xtu = vec![0.0; f];
        for c in 0..l {
            if values[c] <= 1e-12 * smax {
                continue;
            }
            x.apply(right.column(c).as_slice(), &mut xw);
            x.apply_t(left.column(c).as_slice(), &mut xtu);
            let r1: f64 = xw
                .iter()
                .zip(left.column(c).iter())
                .map(|(a, u)| (a - values[c] * u).powi(2))
                .sum();
            let r2: f64 = xtu
                .iter()
                .zip(right.column(c).iter())
                .map(|(a, w)| (a - values[c] * w).powi(2))
                .sum();
            worst = worst.max(r1.sqrt().max(r2.sqrt()) / smax);
        }
        if worst > opts.tol {
            return Err(Error::NonConvergence {
                matvecs: opts.budget(l, n.min(f)),
                worst_residual: worst,
            });
        }
    }

    for c in 0..l {
        let mut u = left.column(c).clone_owned();
        if canonical_sign(u.as_mut_slice()) {
            left.column_mut(c).copy_from(&u);
            right.column_mut(c).neg_mut();
        }
    }
    Ok(SvdBasis {
        left,
        values,
        right,
        degenerate,
    })
}

/// `sum_i values[i] v_i v_i^T`, exactly symmetric.
pub fn synthesize(vectors: &DMatrix<f64>, values: &[f64]) -> DMatrix<f64> {
    assert_eq!(vectors.ncols(), values.len());
    let n = vectors.nrows();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let mut s = 0.0;
            for (k, &lam) in values.iter().enumerate() {
                s += lam * vectors[(i, k)] * vectors[(j, k)];
            }
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    m
}

#[cfg(test)]
mod tests;
