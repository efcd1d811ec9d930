//! Matrix-free operators shared by the solvers.
//!
//! The JDR iterates are never densified: an adjacency iterate is a sparse
//! base plus a symmetric low-rank correction, a feature iterate is a base
//! matrix plus a rectangular low-rank correction. Solvers only ever see
//! them through [`SymOperator`] and [`RectOperator`].

use nalgebra::{DMatrix, DVector};

/// A real symmetric linear map `R^n -> R^n`.
pub trait SymOperator: Sync {
    fn dim(&self) -> usize;
    /// `y <- M x`. `y` is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// A real linear map `R^ncols -> R^nrows` with access to its transpose.
pub trait RectOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y <- M x`, `x` of length `ncols`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// `y <- M^T x`, `x` of length `nrows`.
    fn apply_t(&self, x: &[f64], y: &mut [f64]);
}

/// Eight independent partial sums so the loop vectorizes. The AVX2 build
/// of the same body performs the same operations in the same order, so
/// results do not depend on which one runs.
#[inline(always)]
fn dot_body(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline(always)]
fn axpy_body(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(target_arch = "x86_64")]
mod avx2 {
    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn dot(a: &[f64], b: &[f64]) -> f64 {
        super::dot_body(a, b)
    }

    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
        super::axpy_body(alpha, x, y)
    }
}

#[cfg(target_arch = "x86_64")]
fn has_avx2() -> bool {
    static AVX2: std::sync::OnceLock<bool> = std::sync::OnceLock::new();
    *AVX2.get_or_init(|| std::arch::is_x86_feature_detected!("avx2"))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports AVX2.
        return unsafe { avx2::dot(a, b) };
    }
    dot_body(a, b)
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports AVX2.
        return unsafe { avx2::axpy(alpha, x, y) };
    }
    axpy_body(alpha, x, y)
}

/// Compressed sparse rows. Used both for square symmetric adjacency
/// matrices and for rectangular sparse feature matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from triplets. Duplicate `(row, col)` entries are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// Write row `i` into a dense buffer of length `ncols` (overwrites).
    pub fn row_into(&self, i: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let (cols, vals) = self.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            out[j] = v;
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    pub fn tr_mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate().take(self.nrows) {
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.nrows == self.ncols && self.triplets().all(|(i, j, v)| self.get(j, i) == v)
    }
}

impl SymOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y)
    }
}

impl RectOperator for CsrMatrix {
    fn nrows(&self) -> usize {
        self.nrows
    }

    fn ncols(&self) -> usize {
        self.ncols
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y)
    }

    fn apply_t(&self, x: &[f64], y: &mut [f64]) {
        self.tr_mul_vec(x, y)
    }
}

fn dense_mul(m: &DMatrix<f64>, x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        axpy(xj, m.column(j).as_slice(), y);
    }
}

fn dense_tr_mul(m: &DMatrix<f64>, x: &[f64], y: &mut [f64]) {
    for (j, yj) in y.iter_mut().enumerate() {
        *yj = dot(m.column(j).as_slice(), x);
    }
}

/// A dense matrix treated as symmetric. Only valid for symmetric input.
impl SymOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        // Column dot products: for symmetric M this is M x and is
        // cache-friendlier than the axpy form on column-major storage.
        dense_tr_mul(self, x, y)
    }
}

impl RectOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        dense_mul(self, x, y)
    }

    fn apply_t(&self, x: &[f64], y: &mut [f64]) {
        dense_tr_mul(self, x, y)
    }
}

/// Relative size below which a direction pushed into a correction is
/// taken to lie in the span already stored.
const SPAN_EPS: f64 = 1e-12;

/// `Q C Q^T + sum_k c_k p_k p_k^T`: a compressed part with orthonormal `Q`
/// and symmetric core `C`, and terms pushed since the last compression.
#[derive(Debug, Clone)]
pub struct SymLowRank {
    q: DMatrix<f64>,
    core: DMatrix<f64>,
    pending: DMatrix<f64>,
    coeffs: Vec<f64>,
}

impl SymLowRank {
    pub fn empty(n: usize) -> Self {
        SymLowRank {
            q: DMatrix::zeros(n, 0),
            core: DMatrix::zeros(0, 0),
            pending: DMatrix::zeros(n, 0),
            coeffs: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn rank(&self) -> usize {
        self.q.ncols() + self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank() == 0
    }

    /// Append rank-one terms `c * p p^T`.
    pub fn push_terms(&mut self, vectors: &DMatrix<f64>, coeffs: &[f64]) {
        assert_eq!(vectors.ncols(), coeffs.len());
        assert_eq!(vectors.nrows(), self.dim());
        self.pending = stack_columns(&self.pending, vectors);
        self.coeffs.extend_from_slice(coeffs);
    }

    /// `tmp = Q C Q^T x + sum_k c_k (p_k . x) p_k`, computed into a fresh
    /// buffer so the caller adds the correction in one step.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if self.q.ncols() > 0 {
            let t: Vec<f64> = self.q.column_iter().map(|c| dot(c.as_slice(), x)).collect();
            let s = &self.core * DVector::from_vec(t);
            for (k, c) in self.q.column_iter().enumerate() {
                axpy(s[k], c.as_slice(), out);
            }
        }
        // Pending terms one at a time, so that equal and opposite terms
        // cancel exactly.
        for (k, &c) in self.coeffs.iter().enumerate() {
            let p = self.pending.column(k);
            let t = c * dot(p.as_slice(), x);
            if t != 0.0 {
                axpy(t, p.as_slice(), out);
            }
        }
    }

    /// Rows `r0..r1` of the dense correction, as a `(r1-r0) x n` matrix.
    pub fn dense_rows(&self, r0: usize, r1: usize) -> DMatrix<f64> {
        let mut out = self.q.rows(r0, r1 - r0) * &self.core * self.q.transpose();
        if !self.coeffs.is_empty() {
            let rows = self.pending.rows(r0, r1 - r0);
            let scaled = DMatrix::from_fn(r1 - r0, self.coeffs.len(), |i, k| rows[(i, k)] * self.coeffs[k]);
            out += scaled * self.pending.transpose();
        }
        out
    }

    /// Fold pending terms into the compressed part. Directions already in
    /// its span are dropped, which changes the operator only at rounding
    /// level.
    pub fn compress(&mut self) {
        if self.coeffs.is_empty() {
            return;
        }
        let o = self.q.ncols();
        let (m, q2, r2) = extend_basis(&self.q, &self.pending);
        let keep = significant_rows(&r2, &self.pending);
        let q2 = DMatrix::from_fn(q2.nrows(), keep.len(), |i, c| q2[(i, keep[c])]);
        let r2 = DMatrix::from_fn(keep.len(), r2.ncols(), |i, c| r2[(keep[i], c)]);
        let mm = stack_rows(&m, &r2);
        let weighted = DMatrix::from_fn(mm.nrows(), mm.ncols(), |i, k| mm[(i, k)] * self.coeffs[k]);
        let mut core = weighted * mm.transpose();
        let mut top = core.view_mut((0, 0), (o, o));
        top += &self.core;
        self.core = (&core + core.transpose()) * 0.5;
        self.q = stack_columns(&self.q, &q2);
        self.pending = DMatrix::zeros(self.dim(), 0);
        self.coeffs.clear();
    }
}

/// `QL M QR^T + sum_k l_k r_k^T` with orthonormal `QL`, `QR`, and terms
/// pushed since the last compression.
#[derive(Debug, Clone)]
pub struct LowRank {
    ql: DMatrix<f64>,
    core: DMatrix<f64>,
    qr: DMatrix<f64>,
    left: DMatrix<f64>,
    right: DMatrix<f64>,
}

impl LowRank {
    pub fn empty(nrows: usize, ncols: usize) -> Self {
        LowRank {
            ql: DMatrix::zeros(nrows, 0),
            core: DMatrix::zeros(0, 0),
            qr: DMatrix::zeros(ncols, 0),
            left: DMatrix::zeros(nrows, 0),
            right: DMatrix::zeros(ncols, 0),
        }
    }

    /// Upper bound on the rank.
    pub fn rank(&self) -> usize {
        self.ql.ncols().max(self.qr.ncols()) + self.left.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.ql.ncols() == 0 && self.qr.ncols() == 0 && self.left.ncols() == 0
    }

    pub fn push_terms(&mut self, left: &DMatrix<f64>, right: &DMatrix<f64>) {
        assert_eq!(left.ncols(), right.ncols());
        self.left = stack_columns(&self.left, left);
        self.right = stack_columns(&self.right, right);
    }

    /// `out = QL M QR^T x + sum_k l_k (r_k . x)`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        low_rank_apply(&self.ql, &self.core, &self.qr, &self.left, &self.right, x, out, false);
    }

    /// `out = QR M^T QL^T x + sum_k r_k (l_k . x)`.
    pub fn apply_t_into(&self, x: &[f64], out: &mut [f64]) {
        low_rank_apply(&self.qr, &self.core, &self.ql, &self.right, &self.left, x, out, true);
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.ql * &self.core * self.qr.transpose() + &self.left * self.right.transpose()
    }

    /// Fold pending terms into the compressed part, dropping directions
    /// already in its span.
    pub fn compress(&mut self) {
        if self.left.ncols() == 0 {
            return;
        }
        let (ol, or) = (self.ql.ncols(), self.qr.ncols());
        let (ma, qa, ra) = extend_basis(&self.ql, &self.left);
        let (mb, qb, rb) = extend_basis(&self.qr, &self.right);
        let ka = significant_rows(&ra, &self.left);
        let kb = significant_rows(&rb, &self.right);
        let qa = DMatrix::from_fn(qa.nrows(), ka.len(), |i, c| qa[(i, ka[c])]);
        let ra = DMatrix::from_fn(ka.len(), ra.ncols(), |i, c| ra[(ka[i], c)]);
        let qb = DMatrix::from_fn(qb.nrows(), kb.len(), |i, c| qb[(i, kb[c])]);
        let rb = DMatrix::from_fn(kb.len(), rb.ncols(), |i, c| rb[(kb[i], c)]);
        let mut core = stack_rows(&ma, &ra) * stack_rows(&mb, &rb).transpose();
        let mut top = core.view_mut((0, 0), (ol, or));
        top += &self.core;
        self.core = core;
        self.ql = stack_columns(&self.ql, &qa);
        self.qr = stack_columns(&self.qr, &qb);
        self.left = DMatrix::zeros(self.ql.nrows(), 0);
        self.right = DMatrix::zeros(self.qr.nrows(), 0);
    }
}

#[allow(clippy::too_many_arguments)]
fn low_rank_apply(
    qa: &DMatrix<f64>,
    core: &DMatrix<f64>,
    qb: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x: &[f64],
    out: &mut [f64],
    transpose: bool,
) {
    out.iter_mut().for_each(|v| *v = 0.0);
    if qb.ncols() > 0 && qa.ncols() > 0 {
        let t = DVector::from_iterator(qb.ncols(), qb.column_iter().map(|c| dot(c.as_slice(), x)));
        let s = if transpose { core.tr_mul(&t) } else { core * t };
        for (k, c) in qa.column_iter().enumerate() {
            axpy(s[k], c.as_slice(), out);
        }
    }
    for k in 0..a.ncols() {
        let t = dot(b.column(k).as_slice(), x);
        if t != 0.0 {
            axpy(t, a.column(k).as_slice(), out);
        }
    }
}

/// Rows of `r` in `p = q m + q2 r` that carry more than rounding noise
/// relative to `p`.
fn significant_rows(r: &DMatrix<f64>, p: &DMatrix<f64>) -> Vec<usize> {
    let scale = p.column_iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    (0..r.nrows()).filter(|&i| r.row(i).norm() > SPAN_EPS * scale).collect()
}

/// `p = q m + q2 r2` with `q2` orthonormal and orthogonal to `q`, which
/// must itself be orthonormal.
fn extend_basis(q: &DMatrix<f64>, p: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let mut w = p.clone();
    let mut m = DMatrix::zeros(q.ncols(), p.ncols());
    if q.ncols() > 0 {
        for _ in 0..2 {
            let c = q.tr_mul(&w);
            w -= q * &c;
            m += c;
        }
    }
    let qr = w.qr();
    (m, qr.q(), qr.r())
}

fn stack_columns(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

fn stack_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

/// Symmetric operator `base + correction`.
pub struct SymPlusLowRank<'a, B: SymOperator + ?Sized> {
    pub base: &'a B,
    pub correction: &'a SymLowRank,
}

impl<B: SymOperator + ?Sized> SymOperator for SymPlusLowRank<'_, B> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.base.apply(x, y);
        if !self.correction.is_empty() {
            let mut tmp = vec![0.0; y.len()];
            self.correction.apply_into(x, &mut tmp);
            for (yi, ti) in y.iter_mut().zip(&tmp) {
                *yi += ti;
            }
        }
    }
}

/// Rectangular operator `base + correction`.
pub struct RectPlusLowRank<'a, B: RectOperator + ?Sized> {
    pub base: &'a B,
    pub correction: &'a LowRank,
}

impl<B: RectOperator + ?Sized> RectOperator for RectPlusLowRank<'_, B> {
    fn nrows(&self) -> usize {
        self.base.nrows()
    }

    fn ncols(&self) -> usize {
        self.base.ncols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.base.apply(x, y);
        if !self.correction.is_empty() {
            let mut tmp = vec![0.0; y.len()];
            self.correction.apply_into(x, &mut tmp);
            for (yi, ti) in y.iter_mut().zip(&tmp) {
                *yi += ti;
            }
        }
    }

    fn apply_t(&self, x: &[f64], y: &mut [f64]) {
        self.base.apply_t(x, y);
        if !self.correction.is_empty() {
            let mut tmp = vec![0.0; y.len()];
            self.correction.apply_t_into(x, &mut tmp);
            for (yi, ti) in y.iter_mut().zip(&tmp) {
                *yi += ti;
            }
        }
    }
}

/// Materialize a symmetric operator by applying it to unit vectors.
pub fn sym_to_dense(op: &(impl SymOperator + ?Sized)) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        m.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    m
}

pub fn rect_to_dense(op: &(impl RectOperator + ?Sized)) -> DMatrix<f64> {
    let (n, f) = (op.nrows(), op.ncols());
    let mut m = DMatrix::zeros(n, f);
    let mut e = vec![0.0; f];
    let mut col = vec![0.0; n];
    for j in 0..f {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        m.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    m
}
