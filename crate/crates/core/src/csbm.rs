//! Synthetic data: the contextual stochastic block model, its angle
//! parameterization, and Gaussian surrogates of the adjacency.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{Dataset, FeatureMatrix, Graph, LabelVector};
use crate::rng::{derive_seed, normal_vec, rng_from_seed, standard_normal, Rng};

/// `(lambda, mu^2)` on the ellipse `lambda^2 + mu^2 / gamma = 1 + epsilon`
/// at angle `phi`, with `sign(lambda) = sign(phi)` and `mu >= 0`.
pub fn phi_to_lambda_mu(phi: f64, epsilon: f64, gamma: f64) -> (f64, f64) {
    let r = 1.0 + epsilon;
    let lambda = r.sqrt() * (phi * FRAC_PI_2).sin();
    let c = (phi * FRAC_PI_2).cos();
    (lambda, gamma * r * c * c)
}

/// Inverse of [`phi_to_lambda_mu`]: `(2/pi) atan(lambda sqrt(gamma) / mu)`.
pub fn lambda_mu_to_phi(lambda: f64, mu: f64, gamma: f64) -> f64 {
    (lambda * gamma.sqrt()).atan2(mu) / FRAC_PI_2
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsbmParams {
    pub n: usize,
    pub f: usize,
    pub d: f64,
    pub lambda: f64,
    /// Feature SNR; its square is the tabulated `mu^2`.
    pub mu: f64,
    pub gamma: f64,
    pub phi: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl CsbmParams {
    pub fn from_phi(n: usize, f: usize, d: f64, phi: f64, epsilon: f64, seed: u64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&phi) {
            return Err(Error::InvalidParameter(format!("phi = {phi} is outside [-1, 1]")));
        }
        if epsilon <= -1.0 {
            return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must exceed -1")));
        }
        if n < 2 || f < 1 {
            return Err(Error::InvalidParameter(format!("need n >= 2 and f >= 1, got {n}, {f}")));
        }
        let gamma = n as f64 / f as f64;
        let (lambda, mu2) = phi_to_lambda_mu(phi, epsilon, gamma);
        let p = CsbmParams {
            n,
            f,
            d,
            lambda,
            mu: mu2.sqrt(),
            gamma,
            phi,
            epsilon,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn c_in(&self) -> f64 {
        self.d + self.lambda * self.d.sqrt()
    }

    pub fn c_out(&self) -> f64 {
        self.d - self.lambda * self.d.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.f < 1 {
            return Err(Error::InvalidParameter(format!(
                "need n >= 2 and f >= 1, got {}, {}",
                self.n, self.f
            )));
        }
        if !(self.d > 0.0) || !self.lambda.is_finite() || !(self.mu >= 0.0) {
            return Err(Error::InvalidParameter(
                "degree must be positive and SNRs finite".into(),
            ));
        }
        let (cin, cout) = (self.c_in(), self.c_out());
        let n = self.n as f64;
        if cin < 0.0 || cout < 0.0 || cin > n || cout > n {
            return Err(Error::InvalidParameter(format!(
                "edge probabilities out of range: c_in = {cin}, c_out = {cout}"
            )));
        }
        Ok(())
    }
}

/// Balanced +-1 labels: first half -1, second half +1, then shuffled.
fn balanced_signs(n: usize, rng: &mut Rng) -> Vec<f64> {
    let mut y: Vec<f64> = (0..n).map(|i| if i < n / 2 { -1.0 } else { 1.0 }).collect();
    y.shuffle(rng);
    y
}

fn signs_to_labels(y: &[f64]) -> LabelVector {
    LabelVector::new(y.iter().map(|&s| usize::from(s > 0.0)).collect(), 2).expect("two classes")
}

/// A sampled instance together with its latent feature direction.
#[derive(Debug, Clone)]
pub struct CsbmSample {
    pub dataset: Dataset,
    /// `y_i` in {-1, +1}.
    pub signs: Vec<f64>,
    /// Latent direction `xi ~ N(0, I/F)`.
    pub xi: Vec<f64>,
}

pub fn sample_csbm_with_latent(p: &CsbmParams) -> Result<CsbmSample> {
    p.validate()?;
    let (n, f) = (p.n, p.f);
    let mut rng = rng_from_seed(derive_seed(p.seed, "csbm-labels"));
    let y = balanced_signs(n, &mut rng);

    let nf = n as f64;
    let (p_in, p_out) = (p.c_in() / nf, p.c_out() / nf);
    let mut rng = rng_from_seed(derive_seed(p.seed, "csbm-edges"));
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let prob = if y[i] == y[j] { p_in } else { p_out };
            if rng.random::<f64>() < prob {
                edges.push((i, j, 1.0));
            }
        }
    }
    let graph = Graph::new(n, edges, false)?;

    let mut rng = rng_from_seed(derive_seed(p.seed, "csbm-features"));
    let sf = (f as f64).sqrt();
    let xi: Vec<f64> = normal_vec(&mut rng, f).into_iter().map(|v| v / sf).collect();
    let a = (p.mu / nf).sqrt();
    // Row-major draw order so the noise does not depend on storage layout.
    let mut x = DMatrix::zeros(n, f);
    for i in 0..n {
        for j in 0..f {
            x[(i, j)] = a * y[i] * xi[j] + standard_normal(&mut rng) / sf;
        }
    }
    let dataset = Dataset::new(
        format!("csbm_phi{}", p.phi),
        graph,
        FeatureMatrix::dense(x)?,
        Some(signs_to_labels(&y)),
    )?;
    Ok(CsbmSample { dataset, signs: y, xi })
}

pub fn sample_csbm(p: &CsbmParams) -> Result<Dataset> {
    Ok(sample_csbm_with_latent(p)?.dataset)
}

/// Dense spiked matrices: a GOE-spiked adjacency surrogate and spiked
/// rectangular features sharing the labels.
#[derive(Debug, Clone)]
pub struct SpikedPair {
    pub a_c: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
}

/// Symmetric Gaussian noise, off-diagonal variance 1, diagonal variance 2.
fn goe(n: usize, rng: &mut Rng) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(n, n);
    for i in 0..n {
        o[(i, i)] = std::f64::consts::SQRT_2 * standard_normal(rng);
        for j in i + 1..n {
            let g = standard_normal(rng);
            o[(i, j)] = g;
            o[(j, i)] = g;
        }
    }
    o
}

/// `A^c = (lambda/N) y y^T + O_A / sqrt(N)` and
/// `X = sqrt(mu/N) y xi^T + O_X / sqrt(F)`, `xi ~ N(0, I/F)`.
pub fn sample_spiked_pair(n: usize, f: usize, lambda: f64, mu: f64, seed: u64) -> Result<SpikedPair> {
    if n < 2 || f < 2 {
        return Err(Error::InvalidParameter(format!("need n, f >= 2, got {n}, {f}")));
    }
    if mu < 0.0 {
        return Err(Error::InvalidParameter(format!("mu = {mu} must be nonnegative")));
    }
    let nf = n as f64;
    let sf = (f as f64).sqrt();
    let mut rng = rng_from_seed(derive_seed(seed, "spiked-labels"));
    let y = balanced_signs(n, &mut rng);
    let mut rng = rng_from_seed(derive_seed(seed, "spiked-graph"));
    let mut a_c = goe(n, &mut rng) / nf.sqrt();
    for i in 0..n {
        for j in 0..n {
            a_c[(i, j)] += lambda / nf * y[i] * y[j];
        }
    }
    let mut rng = rng_from_seed(derive_seed(seed, "spiked-features"));
    let xi: Vec<f64> = normal_vec(&mut rng, f).into_iter().map(|v| v / sf).collect();
    let s = (mu / nf).sqrt();
    let mut x = DMatrix::zeros(n, f);
    for i in 0..n {
        for j in 0..f {
            x[(i, j)] = s * y[i] * xi[j] + standard_normal(&mut rng) / sf;
        }
    }
    Ok(SpikedPair {
        a_c,
        x,
        y,
        lambda,
        mu,
        gamma: nf / f as f64,
    })
}

/// Non-symmetric Gaussian model: `A = (lambda/N) y y^T + Xi_A` with
/// entries of variance `1/N`, and `X = (mu/N) y u^T + Xi_X` with
/// `u ~ N(0, I_F)` and noise of variance `1/F`.
pub fn sample_gaussian_csbm_nonsym(
    n: usize,
    f: usize,
    lambda: f64,
    mu: f64,
    seed: u64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<f64>)> {
    if n < 2 || f < 1 {
        return Err(Error::InvalidParameter(format!("need n >= 2 and f >= 1, got {n}, {f}")));
    }
    let nf = n as f64;
    let mut rng = rng_from_seed(derive_seed(seed, "gauss-labels"));
    let y = balanced_signs(n, &mut rng);
    let mut rng = rng_from_seed(derive_seed(seed, "gauss-graph"));
    let sn = nf.sqrt();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = lambda / nf * y[i] * y[j] + standard_normal(&mut rng) / sn;
        }
    }
    let mut rng = rng_from_seed(derive_seed(seed, "gauss-features"));
    let u = normal_vec(&mut rng, f);
    let sf = (f as f64).sqrt();
    let mut x = DMatrix::zeros(n, f);
    for i in 0..n {
        for j in 0..f {
            x[(i, j)] = mu / nf * y[i] * u[j] + standard_normal(&mut rng) / sf;
        }
    }
    Ok((a, x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::edge_homophily;
    use proptest::prelude::*;

    #[test]
    fn table_rows() {
        let (l, m2) = phi_to_lambda_mu(0.0, 3.25, 2.5);
        assert_eq!(l, 0.0);
        assert!((m2 - 10.625).abs() < 1e-12);
        let (l, m2) = phi_to_lambda_mu(0.5, 3.25, 2.5);
        assert!((l - 1.4577).abs() < 1e-4 && (m2 - 5.3125).abs() < 1e-4);
        let (l, m2) = phi_to_lambda_mu(-1.0, 3.25, 2.5);
        assert!((l + 2.0616).abs() < 1e-4 && m2.abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn ellipse_and_round_trip(phi in -1.0f64..1.0, eps in 0.0f64..5.0, gamma in 0.2f64..5.0) {
            let (l, m2) = phi_to_lambda_mu(phi, eps, gamma);
            prop_assert!((l * l + m2 / gamma - (1.0 + eps)).abs() < 1e-9);
            if m2 > 1e-12 {
                prop_assert!((lambda_mu_to_phi(l, m2.sqrt(), gamma) - phi).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(CsbmParams::from_phi(100, 40, 5.0, 1.5, 3.25, 0).is_err());
        let mut p = CsbmParams::from_phi(100, 40, 5.0, 1.0, 3.25, 0).unwrap();
        p.lambda = 3.0;
        assert!(sample_csbm(&p).is_err());
    }

    #[test]
    fn edge_count_and_intra_probability() {
        let p = CsbmParams::from_phi(5000, 2000, 5.0, 0.5, 3.25, 17).unwrap();
        let s = sample_csbm_with_latent(&p).unwrap();
        let g = &s.dataset.graph;
        let m = g.edges().len() as f64;
        assert!((m - 12500.0).abs() < 4.0 * 112.0, "{m}");
        // Empirical intra-class edge rate against c_in / N.
        let half = 2500.0;
        let pairs = 2.0 * half * (half - 1.0) / 2.0;
        let intra = g.edges().iter().filter(|e| s.signs[e.u] == s.signs[e.v]).count() as f64;
        let pin = p.c_in() / 5000.0;
        let se = (pairs * pin * (1.0 - pin)).sqrt();
        assert!((intra - pairs * pin).abs() < 3.0 * se, "{intra} vs {}", pairs * pin);
        assert!(g.edges().iter().all(|e| e.u != e.v));
        let ones = s.signs.iter().filter(|&&v| v > 0.0).count();
        assert_eq!(ones, 2500);
    }

    #[test]
    fn homophily_matches_calibration() {
        let y = |p: &CsbmParams| {
            let d = sample_csbm(p).unwrap();
            edge_homophily(&d.graph, d.labels.as_ref().unwrap()).unwrap()
        };
        let h1 = y(&CsbmParams::from_phi(5000, 2000, 5.0, 1.0, 3.25, 1).unwrap());
        assert!((0.94..=0.98).contains(&h1), "{h1}");
        let h0 = y(&CsbmParams::from_phi(5000, 2000, 5.0, 0.0, 3.25, 1).unwrap());
        assert!((0.46..=0.54).contains(&h0), "{h0}");
    }

    #[test]
    fn feature_means_follow_latent_direction() {
        let p = CsbmParams::from_phi(5000, 200, 5.0, 0.0, 3.25, 5).unwrap();
        let s = sample_csbm_with_latent(&p).unwrap();
        let x = s.dataset.features.to_dense();
        let f = p.f;
        let mut m = vec![0.0; f];
        for i in 0..p.n {
            for j in 0..f {
                m[j] += s.signs[i] * x[(i, j)] / p.n as f64;
            }
        }
        let dot: f64 = m.iter().zip(&s.xi).map(|(a, b)| a * b).sum();
        let nm: f64 = m.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nx: f64 = s.xi.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(dot / (nm * nx) > 0.9, "{}", dot / (nm * nx));
    }

    #[test]
    fn spiked_pair_shapes_and_symmetry() {
        let s = sample_spiked_pair(60, 30, 2.0, 1.0, 3).unwrap();
        assert_eq!(s.a_c, s.a_c.transpose());
        assert_eq!(s.x.shape(), (60, 30));
        assert_eq!(s.y.iter().filter(|&&v| v > 0.0).count(), 30);
        assert!((s.gamma - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_model_is_reproducible_and_noise_is_bounded() {
        let (a, x, y) = sample_gaussian_csbm_nonsym(1000, 500, 0.0, 0.0, 9).unwrap();
        let (a2, x2, y2) = sample_gaussian_csbm_nonsym(1000, 500, 0.0, 0.0, 9).unwrap();
        assert_eq!((&a, &x, &y), (&a2, &x2, &y2));
        let norm = a.singular_values().max();
        assert!(norm <= 3.0, "{norm}");
        assert_eq!(y.iter().sum::<f64>(), 0.0);
    }
}
