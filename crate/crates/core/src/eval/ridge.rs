//! Closed-form ridge regression on graph-filtered features, and the
//! denoising sweeps built on it.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::csbm::sample_gaussian_csbm_nonsym;
use crate::error::{Error, Result};
use crate::rng::derive_index;

/// Condition estimate above which an unregularized system is refused.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// `(1/N) ||Z w - y||^2` at the ridge minimizer `w = (Z^T Z + r I)^-1 Z^T y`,
/// `Z = A X`.
pub fn ridge_gcn_mse(a: &DMatrix<f64>, x: &DMatrix<f64>, y: &[f64], r: f64) -> Result<f64> {
    if a.ncols() != x.nrows() || a.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "A is {}x{}, X is {}x{}, y has {}",
            a.nrows(),
            a.ncols(),
            x.nrows(),
            x.ncols(),
            y.len()
        )));
    }
    ridge_mse_of(&(a * x), y, r)
}

/// Same as [`ridge_gcn_mse`] with `Z` already formed.
pub fn ridge_mse_of(z: &DMatrix<f64>, y: &[f64], r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::InvalidParameter(format!("ridge parameter r = {r} must be >= 0")));
    }
    let yv = DVector::from_column_slice(y);
    let mut gram = z.tr_mul(z);
    if r == 0.0 {
        let eig = gram.clone().symmetric_eigen();
        let hi = eig.eigenvalues.max();
        let lo = eig.eigenvalues.min();
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if condition > SINGULAR_CONDITION {
            return Err(Error::Singular { condition });
        }
    }
    for i in 0..gram.nrows() {
        gram[(i, i)] += r;
    }
    let rhs = z.tr_mul(&yv);
    let chol = gram.cholesky().ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    let w = chol.solve(&rhs);
    let resid = z * w - yv;
    Ok(resid.norm_squared() / y.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RidgeSide {
    /// `A + eta X X^T`.
    A,
    /// `X + eta A X`.
    X,
}

impl std::str::FromStr for RidgeSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(RidgeSide::A),
            "X" | "x" => Ok(RidgeSide::X),
            other => Err(Error::InvalidParameter(format!(
                "unknown ridge side {other:?} (A or X)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeParams {
    pub n: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl RidgeParams {
    pub fn f(&self) -> usize {
        ((self.n as f64 / self.gamma).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgePoint {
    pub eta: f64,
    pub mean_mse: f64,
    pub std_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeMseReport {
    pub side: RidgeSide,
    pub r: f64,
    pub points: Vec<RidgePoint>,
    /// `trial_mse[t][k]` is trial `t` at `eta_grid[k]`; every eta of a trial
    /// sees the same sample.
    pub trial_mse: Vec<Vec<f64>>,
}

fn sweep_trial(p: &RidgeParams, side: RidgeSide, grid: &[f64], r: f64, seed: u64) -> Result<Vec<f64>> {
    let (a, x, y) = sample_gaussian_csbm_nonsym(p.n, p.f(), p.lambda, p.mu, seed)?;
    let z0 = &a * &x;
    // Z(eta) = Z0 + eta Z1 for both sides.
    let z1 = match side {
        RidgeSide::A => &x * x.tr_mul(&x),
        RidgeSide::X => &a * &z0,
    };
    grid.iter()
        .map(|&eta| {
            if eta == 0.0 {
                ridge_mse_of(&z0, &y, r)
            } else {
                ridge_mse_of(&(&z0 + &z1 * eta), &y, r)
            }
        })
        .collect()
}

/// Mean and standard deviation of the ridge MSE over `n_trials` samples for
/// every `eta` in the grid.
pub fn ridge_denoise_sweep(
    p: &RidgeParams,
    side: RidgeSide,
    eta_grid: &[f64],
    n_trials: usize,
    r: f64,
    seed: u64,
) -> Result<RidgeMseReport> {
    if n_trials == 0 || eta_grid.is_empty() {
        return Err(Error::InvalidParameter("need at least one trial and one eta".into()));
    }
    let trial_mse: Vec<Vec<f64>> = (0..n_trials)
        .into_par_iter()
        .map(|t| sweep_trial(p, side, eta_grid, r, derive_index(seed, t as u64)))
        .collect::<Result<_>>()?;
    let m = n_trials as f64;
    let points = eta_grid
        .iter()
        .enumerate()
        .map(|(k, &eta)| {
            let mean = trial_mse.iter().map(|t| t[k]).sum::<f64>() / m;
            let var = trial_mse.iter().map(|t| (t[k] - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
            RidgePoint {
                eta,
                mean_mse: mean,
                std_mse: var.sqrt(),
            }
        })
        .collect();
    Ok(RidgeMseReport {
        side,
        r,
        points,
        trial_mse,
    })
}

/// `1e-3 .. 1` in `count` log-spaced steps, preceded by 0.
pub fn log_eta_grid(count: usize) -> Vec<f64> {
    let mut g = vec![0.0];
    for i in 0..count {
        let t = if count == 1 { 1.0 } else { i as f64 / (count - 1) as f64 };
        g.push(10f64.powf(-3.0 + 3.0 * t));
    }
    g
}
