//! Percentile bootstrap for the mean.

use rand::Rng as _;
use serde::Serialize;

use jdr_core::rng::rng_from_seed;

pub const DEFAULT_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCi {
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Linear-interpolation quantile of sorted data, `q` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and a two-sided `level` percentile interval from `resamples`
/// bootstrap means. `None` for an empty sample.
pub fn bootstrap_mean_ci(sample: &[f64], resamples: usize, level: f64, seed: u64) -> Option<MeanCi> {
    if sample.is_empty() {
        return None;
    }
    let n = sample.len();
    let mut rng = rng_from_seed(seed);
    let mut means: Vec<f64> = (0..resamples.max(1))
        .map(|_| (0..n).map(|_| sample[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Some(MeanCi {
        n,
        mean: mean(sample),
        ci_low: quantile_sorted(&means, tail),
        ci_high: quantile_sorted(&means, 1.0 - tail),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: [f64; 5] = [0.2, 1.0, 1.5, 3.0, 7.0];

    /// All 5^5 equally likely resamples, enumerated.
    fn exhaustive_means() -> Vec<f64> {
        let mut out = Vec::with_capacity(3125);
        for code in 0..3125usize {
            let mut c = code;
            let mut s = 0.0;
            for _ in 0..5 {
                s += TOY[c % 5];
                c /= 5;
            }
            out.push(s / 5.0);
        }
        out.sort_by(f64::total_cmp);
        out
    }

    #[test]
    fn quantiles_of_the_exhaustive_distribution() {
        let m = exhaustive_means();
        // Position (n - 1) q on 3125 points: 78.1 and 3045.9.
        let lo = m[78] + 0.1 * (m[79] - m[78]);
        let hi = m[3045] + 0.9 * (m[3046] - m[3045]);
        assert!((quantile_sorted(&m, 0.025) - lo).abs() < 1e-12);
        assert!((quantile_sorted(&m, 0.975) - hi).abs() < 1e-12);
        assert_eq!(quantile_sorted(&m, 0.0), 0.2);
        assert_eq!(quantile_sorted(&m, 1.0), 7.0);
    }

    #[test]
    fn resampled_interval_approaches_exhaustive_one() {
        let m = exhaustive_means();
        let (lo, hi) = (quantile_sorted(&m, 0.025), quantile_sorted(&m, 0.975));
        let range = 7.0 - 0.2;
        for seed in 0..5 {
            let ci = bootstrap_mean_ci(&TOY, DEFAULT_RESAMPLES, 0.95, seed).unwrap();
            assert!((ci.mean - 2.54).abs() < 1e-12);
            assert!((ci.ci_low - lo).abs() < 0.05 * range, "{ci:?} vs ({lo}, {hi})");
            assert!((ci.ci_high - hi).abs() < 0.05 * range, "{ci:?} vs ({lo}, {hi})");
        }
        let ci = bootstrap_mean_ci(&TOY, 200_000, 0.95, 9).unwrap();
        assert!((ci.ci_low - lo).abs() < 0.01 * range);
        assert!((ci.ci_high - hi).abs() < 0.01 * range);
    }

    #[test]
    fn degenerate_samples() {
        assert!(bootstrap_mean_ci(&[], 10, 0.95, 0).is_none());
        let ci = bootstrap_mean_ci(&[4.0], 10, 0.95, 0).unwrap();
        assert_eq!((ci.mean, ci.ci_low, ci.ci_high), (4.0, 4.0, 4.0));
    }

    #[test]
    fn seeded() {
        assert_eq!(
            bootstrap_mean_ci(&TOY, 1000, 0.95, 3),
            bootstrap_mean_ci(&TOY, 1000, 0.95, 3)
        );
    }
}
