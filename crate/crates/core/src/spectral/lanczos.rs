//! Thick-restart Lanczos with full reorthogonalization.
//!
//! The projected matrix is formed from the full Gram–Schmidt coefficients
//! of every new Krylov vector, so after a restart the arrowhead coupling
//! between kept Ritz vectors and the continuation vector is picked up
//! without special cases. Vectors can be restricted to the orthogonal
//! complement of a set of already converged eigenvectors (deflation).

use nalgebra::DMatrix;

use crate::linalg::{axpy, dot, norm, SymOperator};
use crate::rng::{normal_vec, rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Ends {
    Largest,
    /// `count` from each end of the spectrum.
    Both,
}

pub(crate) struct RitzPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    /// Residual estimates of the returned pairs.
    pub residuals: Vec<f64>,
    pub matvecs: usize,
}

#[derive(Debug)]
pub(crate) struct Unconverged {
    pub matvecs: usize,
    pub worst_residual: f64,
}

/// Convergence test on `(ritz value, residual estimate, spectral scale)`.
pub(crate) type Accept<'a> = &'a dyn Fn(f64, f64, f64) -> bool;

pub(crate) struct Lanczos<'a, O: SymOperator + ?Sized> {
    pub op: &'a O,
    pub deflate: Option<&'a DMatrix<f64>>,
    pub ends: Ends,
    pub count: usize,
    pub max_matvecs: usize,
    pub seed: u64,
    /// Columns whose sum, plus a seeded random part, starts the run.
    pub start: Option<&'a DMatrix<f64>>,
    pub accept: Accept<'a>,
}

/// Weight of the random part of a warm start, relative to a unit vector.
const WARM_NOISE: f64 = 0.1;

struct Basis {
    n: usize,
    data: Vec<f64>,
}

impl Basis {
    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    fn col_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.n;
        &mut self.data[j * n..(j + 1) * n]
    }

    /// Orthogonalize `w` against columns `0..upto`, two passes. Returns the
    /// accumulated coefficients.
    fn orthogonalize(&self, w: &mut [f64], upto: usize) -> Vec<f64> {
        let mut h = vec![0.0; upto];
        for _ in 0..2 {
            for (i, hi) in h.iter_mut().enumerate() {
                let c = dot(self.col(i), w);
                axpy(-c, self.col(i), w);
                *hi += c;
            }
        }
        h
    }
}

fn project_out(deflate: Option<&DMatrix<f64>>, w: &mut [f64]) {
    if let Some(d) = deflate {
        for _ in 0..2 {
            for k in 0..d.ncols() {
                let c = d.column(k);
                let t = dot(c.as_slice(), w);
                axpy(-t, c.as_slice(), w);
            }
        }
    }
}

/// Indices of `theta` in order of preference for the requested end(s).
fn preference(theta: &[f64], ends: Ends) -> Vec<usize> {
    let mut desc: Vec<usize> = (0..theta.len()).collect();
    desc.sort_by(|&a, &b| theta[b].total_cmp(&theta[a]).then(a.cmp(&b)));
    match ends {
        Ends::Largest => desc,
        Ends::Both => {
            let mut out = Vec::with_capacity(desc.len());
            let (mut lo, mut hi) = (0usize, desc.len());
            while lo < hi {
                out.push(desc[lo]);
                lo += 1;
                if lo < hi {
                    hi -= 1;
                    out.push(desc[hi]);
                }
            }
            out
        }
    }
}

/// The `count` Ritz values of largest magnitude, which form a prefix from
/// each end of the sorted spectrum, and the next value inward at each end.
/// Ritz values move outward as the basis grows, so the guards must settle
/// too before the selection can be trusted.
fn by_magnitude(theta: &[f64], count: usize) -> (Vec<usize>, Vec<usize>) {
    let m = theta.len();
    let mut desc: Vec<usize> = (0..m).collect();
    desc.sort_by(|&a, &b| theta[b].total_cmp(&theta[a]).then(a.cmp(&b)));
    let (mut a, mut b) = (0, 0);
    while a + b < count.min(m) {
        if theta[desc[a]].abs() >= theta[desc[m - 1 - b]].abs() {
            a += 1;
        } else {
            b += 1;
        }
    }
    let chosen = desc[..a].iter().chain(&desc[m - b..]).copied().collect();
    let mut guard = Vec::new();
    if a + b < m {
        guard.push(desc[a]);
        if m - 1 - b > a {
            guard.push(desc[m - 1 - b]);
        }
    }
    (chosen, guard)
}

impl<O: SymOperator + ?Sized> Lanczos<'_, O> {
    fn fresh_vector(&self, rng: &mut Rng, basis: &Basis, upto: usize) -> Option<Vec<f64>> {
        for _ in 0..3 {
            let mut v = normal_vec(rng, basis.n);
            project_out(self.deflate, &mut v);
            basis.orthogonalize(&mut v, upto);
            project_out(self.deflate, &mut v);
            let nv = norm(&v);
            if nv > 1e-8 {
                v.iter_mut().for_each(|x| *x /= nv);
                return Some(v);
            }
        }
        None
    }

    fn warm_vector(&self, rng: &mut Rng, s: &DMatrix<f64>) -> Option<Vec<f64>> {
        let n = s.nrows();
        let mut v: Vec<f64> = normal_vec(rng, n)
            .iter()
            .map(|g| g * WARM_NOISE / (n as f64).sqrt())
            .collect();
        for c in s.column_iter() {
            let nc = c.norm();
            if nc > 0.0 {
                axpy(1.0 / nc, c.as_slice(), &mut v);
            }
        }
        project_out(self.deflate, &mut v);
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            Some(v)
        } else {
            None
        }
    }

    pub fn run(&self) -> Result<RitzPairs, Unconverged> {
        let n = self.op.dim();
        let locked = self.deflate.map_or(0, |d| d.ncols());
        let avail = n.saturating_sub(locked);
        let per_end = self.count.max(1);
        let wanted = match self.ends {
            Ends::Both => 2 * per_end,
            _ => per_end,
        }
        .min(avail);
        if wanted == 0 {
            return Ok(RitzPairs {
                values: Vec::new(),
                vectors: DMatrix::zeros(n, 0),
                residuals: Vec::new(),
                matvecs: 0,
            });
        }
        let m_max = avail.min((2 * wanted + 10).max(30));
        let keep_target = (wanted + (m_max - wanted) / 2).min(m_max - 1);

        let mut rng = rng_from_seed(self.seed);
        let mut basis = Basis {
            n,
            data: vec![0.0; n * (m_max + 1)],
        };
        let first = match self.start.filter(|s| s.nrows() == n && s.ncols() > 0) {
            Some(s) => self.warm_vector(&mut rng, s),
            None => self.fresh_vector(&mut rng, &basis, 0),
        };
        let Some(start) = first else {
            return Err(Unconverged {
                matvecs: 0,
                worst_residual: f64::INFINITY,
            });
        };
        basis.col_mut(0).copy_from_slice(&start);

        let mut t = DMatrix::<f64>::zeros(m_max, m_max);
        let mut size = 0usize;
        let mut scale = 0.0f64;
        let mut matvecs = 0usize;
        let mut exhausted = false;
        let mut w = vec![0.0; n];
        let mut since_check = 0usize;

        loop {
            // Expand the Krylov basis by one vector.
            let j = size;
            self.op.apply(basis.col(j), &mut w);
            matvecs += 1;
            project_out(self.deflate, &mut w);
            let h = basis.orthogonalize(&mut w, j + 1);
            for (i, &hi) in h.iter().enumerate() {
                t[(i, j)] = hi;
                t[(j, i)] = hi;
                scale = scale.max(hi.abs());
            }
            let mut beta = norm(&w);
            scale = scale.max(beta);
            size = j + 1;
            since_check += 1;

            if size >= avail {
                exhausted = true;
                beta = 0.0;
            } else if beta <= 1e-12 * scale || beta == 0.0 {
                // Invariant subspace: continue with a fresh direction.
                match self.fresh_vector(&mut rng, &basis, size) {
                    Some(v) => basis.col_mut(size).copy_from_slice(&v),
                    None => exhausted = true,
                }
                beta = 0.0;
            } else {
                let q = basis.col_mut(size);
                for (qi, wi) in q.iter_mut().zip(&w) {
                    *qi = wi / beta;
                }
            }

            let full = size == m_max;
            let due = size >= wanted && (since_check >= 5 || full || exhausted);
            if !due && matvecs < self.max_matvecs {
                continue;
            }
            since_check = 0;

            // Rayleigh–Ritz on the current basis.
            let eig = t.view((0, 0), (size, size)).into_owned().symmetric_eigen();
            let theta: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            let s = &eig.eigenvectors;
            let resid: Vec<f64> = (0..size).map(|i| beta * s[(size - 1, i)].abs()).collect();
            let ritz_scale = theta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let pref = preference(&theta, self.ends);
            let (chosen, guard) = match self.ends {
                Ends::Both => by_magnitude(&theta, per_end),
                _ => (pref[..wanted.min(size)].to_vec(), Vec::new()),
            };
            let converged = chosen
                .iter()
                .chain(&guard)
                .all(|&i| (self.accept)(theta[i], resid[i], ritz_scale));

            if (converged && size >= wanted) || exhausted {
                let mut vectors = DMatrix::zeros(n, chosen.len());
                for (c, &i) in chosen.iter().enumerate() {
                    let mut y = vec![0.0; n];
                    for k in 0..size {
                        axpy(s[(k, i)], basis.col(k), &mut y);
                    }
                    let ny = norm(&y);
                    y.iter_mut().for_each(|v| *v /= ny);
                    vectors.column_mut(c).copy_from_slice(&y);
                }
                return Ok(RitzPairs {
                    values: chosen.iter().map(|&i| theta[i]).collect(),
                    vectors,
                    residuals: chosen.iter().map(|&i| resid[i]).collect(),
                    matvecs,
                });
            }
            if matvecs >= self.max_matvecs {
                let worst = chosen.iter().map(|&i| resid[i]).fold(0.0f64, f64::max);
                return Err(Unconverged {
                    matvecs,
                    worst_residual: worst,
                });
            }
            if !full {
                continue;
            }

            // Thick restart: keep the preferred Ritz vectors plus the
            // continuation vector.
            let keep: Vec<usize> = pref.iter().copied().take(keep_target).collect();
            let mut kept = vec![0.0; n * keep.len()];
            for (c, &i) in keep.iter().enumerate() {
                let y = &mut kept[c * n..(c + 1) * n];
                for k in 0..size {
                    axpy(s[(k, i)], basis.col(k), y);
                }
            }
            let cont = basis.col(size).to_vec();
            basis.data[..n * keep.len()].copy_from_slice(&kept);
            basis.col_mut(keep.len()).copy_from_slice(&cont);
            t.fill(0.0);
            for (c, &i) in keep.iter().enumerate() {
                t[(c, c)] = theta[i];
                let coupling = beta * s[(size - 1, i)];
                t[(c, keep.len())] = coupling;
                t[(keep.len(), c)] = coupling;
            }
            size = keep.len();
        }
    }
}
