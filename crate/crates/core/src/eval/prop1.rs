//! Empirical check that one interpolation step improves the overlap of the
//! leading vector with the labels in the spiked model.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::csbm::sample_spiked_pair;
use crate::error::{Error, Result};
use crate::linalg::{LowRank, RectPlusLowRank, SymLowRank, SymPlusLowRank};
use crate::rng::{derive_index, derive_seed};
use crate::spectral::{eigs_top, svd_top, EigenOrdering, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prop1Side {
    Graph,
    Features,
}

impl std::str::FromStr for Prop1Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graph" => Ok(Prop1Side::Graph),
            "features" => Ok(Prop1Side::Features),
            other => Err(Error::InvalidParameter(format!(
                "unknown side {other:?} (expected graph or features)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prop1Report {
    pub n_trials: usize,
    pub eta: f64,
    pub side: Prop1Side,
    pub mean_overlap_before: f64,
    pub mean_overlap_after: f64,
    /// Fraction of trials with a strictly larger overlap after the step.
    pub fraction_improved: f64,
    /// Largest `|after - before|` over trials.
    pub max_abs_change: f64,
    /// `lambda > 1` and `mu > sqrt(gamma)`.
    pub hypotheses_hold: bool,
    pub overlaps: Vec<(f64, f64)>,
}

fn sq_overlap(v: &[f64], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let ip: f64 = v.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n.sqrt();
    ip * ip
}

fn col(v: Vec<f64>) -> DMatrix<f64> {
    DMatrix::from_vec(v.len(), 1, v)
}

fn trial(n: usize, f: usize, lambda: f64, mu: f64, eta: f64, side: Prop1Side, seed: u64) -> Result<(f64, f64)> {
    let s = sample_spiked_pair(n, f, lambda, mu, seed)?;
    let opts = SolverOptions::default().with_seed(derive_seed(seed, "prop1-solver"));
    let ea = eigs_top(&s.a_c, 1, EigenOrdering::ByValueDesc, &opts)?;
    let sx = svd_top(&s.x, 1, &opts)?;
    let v: Vec<f64> = ea.vectors.column(0).iter().copied().collect();
    let u: Vec<f64> = sx.left.column(0).iter().copied().collect();
    let ip: f64 = v.iter().zip(&u).map(|(a, b)| a * b).sum();
    let sign = if ip < 0.0 { -1.0 } else { 1.0 };
    match side {
        Prop1Side::Graph => {
            let vt: Vec<f64> = v
                .iter()
                .zip(&u)
                .map(|(a, b)| (1.0 - eta) * a + eta * sign * b)
                .collect();
            let mut corr = SymLowRank::empty(n);
            let lam = ea.values[0];
            corr.push_terms(&col(vt), &[lam]);
            corr.push_terms(&col(v.clone()), &[-lam]);
            let op = SymPlusLowRank {
                base: &s.a_c,
                correction: &corr,
            };
            let after = eigs_top(&op, 1, EigenOrdering::ByValueDesc, &opts)?;
            let v1: Vec<f64> = after.vectors.column(0).iter().copied().collect();
            Ok((sq_overlap(&v, &s.y), sq_overlap(&v1, &s.y)))
        }
        Prop1Side::Features => {
            let ut: Vec<f64> = u
                .iter()
                .zip(&v)
                .map(|(a, b)| (1.0 - eta) * a + eta * sign * b)
                .collect();
            let sigma = sx.values[0];
            let left: Vec<f64> = ut.iter().zip(&u).map(|(a, b)| sigma * (a - b)).collect();
            let mut corr = LowRank::empty(n, f);
            corr.push_terms(&col(left), &sx.right.columns(0, 1).into_owned());
            let op = RectPlusLowRank {
                base: &s.x,
                correction: &corr,
            };
            let after = svd_top(&op, 1, &opts)?;
            let u1: Vec<f64> = after.left.column(0).iter().copied().collect();
            Ok((sq_overlap(&u, &s.y), sq_overlap(&u1, &s.y)))
        }
    }
}

/// Sample `n_trials` spiked pairs, take one interpolation step of rate
/// `eta` on `side`, and compare squared label overlaps of the leading
/// vector before and after.
#[allow(clippy::too_many_arguments)]
pub fn check_prop1(
    n: usize,
    f: usize,
    lambda: f64,
    mu: f64,
    eta: f64,
    side: Prop1Side,
    n_trials: usize,
    seed: u64,
) -> Result<Prop1Report> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("eta = {eta} is outside [0, 1]")));
    }
    if n_trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let overlaps: Vec<(f64, f64)> = (0..n_trials)
        .into_par_iter()
        .map(|t| trial(n, f, lambda, mu, eta, side, derive_index(seed, t as u64)))
        .collect::<Result<_>>()?;
    let m = n_trials as f64;
    let gamma = n as f64 / f as f64;
    Ok(Prop1Report {
        n_trials,
        eta,
        side,
        mean_overlap_before: overlaps.iter().map(|o| o.0).sum::<f64>() / m,
        mean_overlap_after: overlaps.iter().map(|o| o.1).sum::<f64>() / m,
        fraction_improved: overlaps.iter().filter(|o| o.1 > o.0).count() as f64 / m,
        max_abs_change: overlaps.iter().map(|o| (o.1 - o.0).abs()).fold(0.0, f64::max),
        hypotheses_hold: lambda > 1.0 && mu > gamma.sqrt(),
        overlaps,
    })
}
