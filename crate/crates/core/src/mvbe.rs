//! Mean-value-based amplitude estimator.
//!
//! For every transition level `T_k` the fraction of samples whose code is
//! at least `k` estimates the probability that a random-phase sine plus
//! noise exceeds `T_k`. With dense phase coverage (irrational normalized
//! frequency) that probability is the arcsine-weighted average
//!
//! ```text
//! g(theta; T, sigma) = integral_0^1 [1 - F(T - theta * sin(2*pi*u))] du
//! ```
//!
//! which is monotone in `theta` for `T != 0` and can be inverted
//! numerically. One inversion per usable threshold yields one amplitude
//! estimate; the final estimate combines them.

use crate::quadrature;
use crate::quantizer::QuantizerModel;
use crate::signal::{NoiseModel, Record};
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

/// Per-threshold exceedance fractions of one record.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCounts {
    /// Record length N.
    pub n_samples: usize,
    /// `zbar[k-1]` is the fraction of samples with code >= k, k = 1..L-1.
    pub zbar: Vec<f64>,
}

/// Why a threshold contributed no estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    /// No sample exceeded the threshold.
    SaturatedZero,
    /// Every sample exceeded the threshold.
    SaturatedOne,
    /// Exceedance fraction too close to 1/2, where the curve is flat.
    NearHalf,
    /// No root of `g(theta) = zbar` inside the search range.
    NoBracket,
}

impl std::fmt::Display for DiscardReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DiscardReason::SaturatedZero => "saturated_zero",
            DiscardReason::SaturatedOne => "saturated_one",
            DiscardReason::NearHalf => "near_half",
            DiscardReason::NoBracket => "no_bracket",
        };
        f.write_str(s)
    }
}

/// Final amplitude estimate with per-threshold diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct EstimationResult {
    pub theta_hat: f64,
    /// `(k, theta_hat_k)` for every usable threshold, in k order.
    pub per_threshold: Vec<(usize, f64)>,
    /// Number of usable thresholds, M.
    pub usable_count: usize,
    pub discarded: Vec<(usize, DiscardReason)>,
}

#[derive(Debug, Error)]
pub enum MvbeError {
    #[error("no usable threshold: {}", summarize(.discarded))]
    NoUsableThresholds { discarded: Vec<(usize, DiscardReason)> },
    #[error("record has {got} thresholds' worth of codes but the model has {expected}")]
    ModelMismatch { got: usize, expected: usize },
}

fn summarize(discarded: &[(usize, DiscardReason)]) -> String {
    use DiscardReason::*;
    let count = |r: DiscardReason| discarded.iter().filter(|&&(_, d)| d == r).count();
    format!(
        "saturated_zero={}, saturated_one={}, near_half={}, no_bracket={}",
        count(SaturatedZero),
        count(SaturatedOne),
        count(NearHalf),
        count(NoBracket)
    )
}

/// How per-threshold estimates are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Plain arithmetic mean.
    #[default]
    Unweighted,
    /// Inverse-variance weights from the binomial variance of each
    /// exceedance fraction propagated through the local slope of `g`.
    InverseVariance,
}

/// Tunables of the estimator; the defaults follow the reference procedure.
#[derive(Debug, Clone, Copy)]
pub struct MvbeConfig {
    /// Exceedance fractions within this distance of 1/2 are discarded.
    pub discard_threshold: f64,
    /// Amplitude search range for the numerical inversion.
    pub theta_min: f64,
    pub theta_max: f64,
    pub weighting: Weighting,
}

impl Default for MvbeConfig {
    fn default() -> Self {
        Self {
            discard_threshold: 0.2,
            theta_min: 1e-6,
            theta_max: 1.0,
            weighting: Weighting::Unweighted,
        }
    }
}

/// Exceedance fractions of `record` over the thresholds of `model`.
///
/// A code of at least `k` means the pre-quantization value reached `T_k`,
/// so `zbar[k-1]` is exactly the empirical mean of the threshold-crossing
/// indicators.
pub fn threshold_counts(record: &Record, model: &QuantizerModel) -> ThresholdCounts {
    let l = model.code_count();
    let n = record.codes.len();
    let mut hist = vec![0usize; l];
    for &c in &record.codes {
        hist[c.min(l - 1)] += 1;
    }
    let mut above = 0usize;
    let mut zbar = vec![0.0; l - 1];
    for k in (1..l).rev() {
        above += hist[k];
        zbar[k - 1] = above as f64 / n as f64;
    }
    ThresholdCounts {
        n_samples: n,
        zbar,
    }
}

/// Probability that a random-phase sine of amplitude `theta` plus noise
/// exceeds the level `t`.
///
/// Computed in the phase domain, where the integrand is smooth. The unit
/// interval is split at the points where the noise CDF saturates (argument
/// beyond 9 sigma, i.e. contributions below 1e-18): saturated stretches
/// contribute exactly 0 or their full length, and the remaining bands are
/// integrated with order-256 Gauss-Legendre rules, doubling until two
/// successive results differ by less than 1e-12. For sigma = 0 the exact
/// step-function limit is returned.
pub fn crossing_probability(theta: f64, t: f64, noise: &NoiseModel) -> f64 {
    assert!(theta >= 0.0, "amplitude must be nonnegative");
    if noise.sigma == 0.0 {
        return noiseless_crossing(theta, t);
    }
    if theta == 0.0 {
        return 1.0 - noise.cdf(t);
    }
    let halfwidth = 9.0 * noise.sigma;
    // sine values where the CDF argument leaves the saturated regions
    let c_lo = (t - halfwidth) / theta;
    let c_hi = (t + halfwidth) / theta;
    if c_lo >= 1.0 {
        return 0.0;
    }
    if c_hi <= -1.0 {
        return 1.0;
    }
    let f = |u: f64| 1.0 - noise.cdf(t - theta * (2.0 * PI * u).sin());
    let inv_2pi = 1.0 / (2.0 * PI);
    let mut total = 0.0;
    let band = |a: f64, b: f64| {
        if b > a {
            quadrature::integrate_doubling(&f, a, b, 256, 1e-12)
        } else {
            0.0
        }
    };

    // sin(2*pi*u) is monotone on [0, 1/4], [1/4, 3/4] and [3/4, 1]

    // rising piece, s in [0, 1]
    {
        let lo = c_lo.clamp(0.0, 1.0);
        let hi = c_hi.clamp(0.0, 1.0);
        let u_lo = lo.asin() * inv_2pi;
        let u_hi = hi.asin() * inv_2pi;
        total += 0.25 - u_hi; // fully above the band
        total += band(u_lo, u_hi);
    }
    // falling piece, s in [1, -1]
    {
        let lo = c_lo.clamp(-1.0, 1.0);
        let hi = c_hi.clamp(-1.0, 1.0);
        let u_hi = 0.5 - hi.asin() * inv_2pi;
        let u_lo = 0.5 - lo.asin() * inv_2pi;
        total += u_hi - 0.25;
        total += band(u_hi, u_lo);
    }
    // rising piece, s in [-1, 0]
    {
        let lo = c_lo.clamp(-1.0, 0.0);
        let hi = c_hi.clamp(-1.0, 0.0);
        let u_lo = 1.0 + lo.asin() * inv_2pi;
        let u_hi = 1.0 + hi.asin() * inv_2pi;
        total += 1.0 - u_hi;
        total += band(u_lo, u_hi);
    }
    total.clamp(0.0, 1.0)
}

/// Exact noiseless limit: `1/2 - asin(t/theta)/pi` inside the sine range,
/// saturating to 0 or 1 outside it.
pub fn noiseless_crossing(theta: f64, t: f64) -> f64 {
    if t >= theta {
        0.0
    } else if t <= -theta {
        1.0
    } else {
        0.5 - (t / theta).asin() / PI
    }
}

/// Solve `crossing_probability(theta, t, noise) = zbar_k` for `theta`
/// over `theta_range`, to 1e-10 in probability. The root is bracketed by
/// a sign change and polished with secant steps, falling back to
/// bisection whenever a step leaves the bracket or fails to shrink it.
/// Returns `None` when no sign change brackets a root in the range.
pub fn invert_threshold(
    zbar_k: f64,
    t: f64,
    noise: &NoiseModel,
    theta_range: (f64, f64),
) -> Option<f64> {
    const G_TOL: f64 = 1e-10;
    let (mut lo, mut hi) = theta_range;
    debug_assert!(lo < hi);
    let mut g_lo = crossing_probability(lo, t, noise) - zbar_k;
    if g_lo.abs() <= G_TOL {
        return Some(lo);
    }
    let mut g_hi = crossing_probability(hi, t, noise) - zbar_k;
    if g_hi.abs() <= G_TOL {
        return Some(hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return None;
    }
    let mut mid = 0.5 * (lo + hi);
    for iter in 0..200 {
        // secant through the bracket endpoints; every third step bisects
        // to guarantee the bracket keeps shrinking
        let secant = lo - g_lo * (hi - lo) / (g_hi - g_lo);
        let margin = 1e-3 * (hi - lo);
        mid = if iter % 3 == 2 || !(secant > lo + margin && secant < hi - margin) {
            0.5 * (lo + hi)
        } else {
            secant
        };
        let gm = crossing_probability(mid, t, noise) - zbar_k;
        if gm.abs() <= G_TOL || (hi - lo) < 1e-14 * hi.max(1.0) {
            return Some(mid);
        }
        if gm.signum() == g_lo.signum() {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
            g_hi = gm;
        }
    }
    Some(mid)
}

/// Amplitude estimate from per-threshold counts with the default
/// configuration. See [`estimate_with`].
pub fn estimate(
    counts: &ThresholdCounts,
    model: &QuantizerModel,
    noise: &NoiseModel,
) -> Result<EstimationResult, MvbeError> {
    estimate_with(counts, model, noise, &MvbeConfig::default())
}

/// Amplitude estimate from per-threshold counts.
///
/// Thresholds with a saturated or near-1/2 exceedance fraction are
/// discarded; the rest are inverted independently and combined. When the
/// noise is negligible (`sigma < 1e-8 * step`) the closed-form arcsine
/// inversion replaces the numerical one.
pub fn estimate_with(
    counts: &ThresholdCounts,
    model: &QuantizerModel,
    noise: &NoiseModel,
    config: &MvbeConfig,
) -> Result<EstimationResult, MvbeError> {
    let transitions = model.transitions();
    if counts.zbar.len() != transitions.len() {
        return Err(MvbeError::ModelMismatch {
            got: counts.zbar.len(),
            expected: transitions.len(),
        });
    }
    let noiseless = noise.sigma < 1e-8 * model.step();
    let solve = |z: f64, t: f64| -> Option<f64> {
        if noiseless {
            closed_form_theta(z, t, config)
        } else {
            invert_threshold(z, t, noise, (config.theta_min, config.theta_max))
        }
    };
    combine(counts, transitions, config, noise, solve)
}

/// Closed-form estimate assuming sigma = 0: per-threshold
/// `theta_k = T_k / sin((1/2 - zbar_k) * pi)`, combined like [`estimate`].
pub fn estimate_noiseless(
    counts: &ThresholdCounts,
    model: &QuantizerModel,
) -> Result<EstimationResult, MvbeError> {
    let config = MvbeConfig::default();
    let transitions = model.transitions();
    if counts.zbar.len() != transitions.len() {
        return Err(MvbeError::ModelMismatch {
            got: counts.zbar.len(),
            expected: transitions.len(),
        });
    }
    let noise = NoiseModel::gaussian(0.0);
    combine(counts, transitions, &config, &noise, |z, t| {
        closed_form_theta(z, t, &config)
    })
}

fn closed_form_theta(z: f64, t: f64, config: &MvbeConfig) -> Option<f64> {
    let theta = t / ((0.5 - z) * PI).sin();
    (theta > 0.0 && theta.is_finite() && theta >= config.theta_min && theta <= config.theta_max)
        .then_some(theta)
}

fn combine<F: Fn(f64, f64) -> Option<f64>>(
    counts: &ThresholdCounts,
    transitions: &[f64],
    config: &MvbeConfig,
    noise: &NoiseModel,
    solve: F,
) -> Result<EstimationResult, MvbeError> {
    let mut per_threshold = Vec::new();
    let mut discarded = Vec::new();
    for (i, (&z, &t)) in counts.zbar.iter().zip(transitions).enumerate() {
        let k = i + 1;
        if z == 0.0 {
            discarded.push((k, DiscardReason::SaturatedZero));
        } else if z == 1.0 {
            discarded.push((k, DiscardReason::SaturatedOne));
        } else if (z - 0.5).abs() <= config.discard_threshold {
            discarded.push((k, DiscardReason::NearHalf));
        } else if let Some(theta) = solve(z, t) {
            per_threshold.push((k, theta));
        } else {
            discarded.push((k, DiscardReason::NoBracket));
        }
    }
    if per_threshold.is_empty() {
        return Err(MvbeError::NoUsableThresholds { discarded });
    }
    let theta_hat = match config.weighting {
        Weighting::Unweighted => {
            per_threshold.iter().map(|&(_, th)| th).sum::<f64>() / per_threshold.len() as f64
        }
        Weighting::InverseVariance => {
            let n = counts.n_samples as f64;
            let mut num = 0.0;
            let mut den = 0.0;
            for &(k, th) in &per_threshold {
                let z = counts.zbar[k - 1];
                let t = transitions[k - 1];
                let h = 1e-5 * th.max(0.1);
                let slope = (crossing_probability(th + h, t, noise)
                    - crossing_probability((th - h).max(0.0), t, noise))
                    / (2.0 * h);
                let var = z * (1.0 - z) / n / (slope * slope).max(1e-300);
                let w = 1.0 / var.max(1e-300);
                num += w * th;
                den += w;
            }
            num / den
        }
    };
    Ok(EstimationResult {
        theta_hat,
        usable_count: per_threshold.len(),
        per_threshold,
        discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::QuantizerModel;
    use crate::signal::{generate_record, sine_value, NoiseModel, SineParams};
    use proptest::prelude::*;

    /// Independent oracle: plain midpoint rule over the phase variable.
    fn crossing_brute_force(theta: f64, t: f64, sigma: f64, points: usize) -> f64 {
        let noise = NoiseModel::gaussian(sigma);
        (0..points)
            .map(|i| {
                let u = (i as f64 + 0.5) / points as f64;
                1.0 - noise.cdf(t - theta * (2.0 * PI * u).sin())
            })
            .sum::<f64>()
            / points as f64
    }

    #[test]
    fn counts_direct_example() {
        let model = QuantizerModel::make_uniform(2, 0.5).unwrap();
        let record = Record {
            codes: vec![0, 3, 2],
            params: None,
            noise: None,
        };
        let counts = threshold_counts(&record, &model);
        assert_eq!(counts.zbar.len(), 3);
        assert!((counts.zbar[1] - 2.0 / 3.0).abs() < 1e-15); // k = 2
        assert!((counts.zbar[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((counts.zbar[2] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn counts_all_zero_codes() {
        let model = QuantizerModel::make_uniform(3, 0.25).unwrap();
        let record = Record {
            codes: vec![0; 10],
            params: None,
            noise: None,
        };
        let counts = threshold_counts(&record, &model);
        assert!(counts.zbar.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn counts_nonincreasing_on_random_record() {
        let model = QuantizerModel::make_uniform(8, 2.0 / 256.0).unwrap();
        let p = SineParams::new(0.8, 0.317731, 1.1);
        let r = generate_record(&p, &NoiseModel::gaussian(0.05), &model, 20_000, 11);
        let counts = threshold_counts(&r, &model);
        assert!(counts.zbar.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn counts_match_exhaustive_enumeration() {
        // 3-bit, sigma = 0, short records: compare against direct
        // evaluation of theta * x_n >= T_k for every n and k (>= matches
        // the half-open quantization cells).
        let model = QuantizerModel::make_uniform(3, 0.25).unwrap();
        for n in [1usize, 5, 12, 24] {
            let p = SineParams::new(0.77, 0.61803398875, 0.3);
            let r = generate_record(&p, &NoiseModel::gaussian(0.0), &model, n, 0);
            let counts = threshold_counts(&r, &model);
            for (i, &t) in model.transitions().iter().enumerate() {
                let direct = (0..n).filter(|&j| sine_value(&p, j) >= t).count();
                assert_eq!(counts.zbar[i], direct as f64 / n as f64, "n={n} k={}", i + 1);
            }
        }
    }

    #[test]
    fn crossing_half_at_zero_threshold() {
        for (theta, sigma) in [(0.3, 0.1), (1.0, 0.5), (0.8, 1e-6)] {
            let g = crossing_probability(theta, 0.0, &NoiseModel::gaussian(sigma));
            assert!((g - 0.5).abs() < 1e-11, "theta={theta} sigma={sigma}: {g}");
        }
    }

    #[test]
    fn crossing_noiseless_closed_form() {
        let g = crossing_probability(1.0, 0.5, &NoiseModel::gaussian(0.0));
        assert!((g - 1.0 / 3.0).abs() < 1e-14);
        assert_eq!(crossing_probability(0.5, 0.7, &NoiseModel::gaussian(0.0)), 0.0);
        assert_eq!(crossing_probability(0.5, -0.7, &NoiseModel::gaussian(0.0)), 1.0);
    }

    #[test]
    fn crossing_matches_brute_force_grid() {
        let cases = [
            (0.9, 0.7, 0.3),
            (1.0, 0.5, 1e-6),
            (0.5, -0.3, 0.05),
            (0.7, 0.69, 0.01),
            (1.0, 1.0, 0.1),
            (0.2, 0.5, 0.2),
        ];
        for (theta, t, sigma) in cases {
            let fast = crossing_probability(theta, t, &NoiseModel::gaussian(sigma));
            let points = if sigma < 1e-3 { 20_000_000 } else { 400_000 };
            let slow = crossing_brute_force(theta, t, sigma, points);
            assert!(
                (fast - slow).abs() < 2e-6,
                "theta={theta} t={t} sigma={sigma}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn crossing_monotone_in_theta() {
        let noise = NoiseModel::gaussian(0.1);
        let mut prev = crossing_probability(0.05, 0.4, &noise);
        for i in 1..30 {
            let theta = 0.05 + i as f64 * 0.03;
            let g = crossing_probability(theta, 0.4, &noise);
            assert!(g > prev, "not increasing at theta={theta}");
            prev = g;
        }
        let mut prev = crossing_probability(0.05, -0.4, &noise);
        for i in 1..30 {
            let theta = 0.05 + i as f64 * 0.03;
            let g = crossing_probability(theta, -0.4, &noise);
            assert!(g < prev, "not decreasing at theta={theta}");
            prev = g;
        }
    }

    #[test]
    fn invert_noiseless_examples() {
        let noise = NoiseModel::gaussian(1e-6);
        let th = invert_threshold(1.0 / 3.0, 0.5, &noise, (1e-6, 1.2)).unwrap();
        assert!((th - 1.0).abs() < 1e-3, "{th}");
        // g(theta, -1/2) = 3/4 means asin(1/(2 theta)) = pi/4
        let th = invert_threshold(0.75, -0.5, &noise, (1e-6, 1.2)).unwrap();
        assert!((th - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3, "{th}");
    }

    #[test]
    fn invert_recovers_truth_from_simulated_record() {
        let model = QuantizerModel::make_uniform(12, 2.0 / 4096.0).unwrap();
        let sigma = 0.2 * model.step();
        let noise = NoiseModel::gaussian(sigma);
        let p = SineParams::new(0.8, 0.723457, 0.9);
        let n = 50_000usize;
        let r = generate_record(&p, &noise, &model, n, 21);
        let counts = threshold_counts(&r, &model);
        // pick a well-excited threshold near 0.7
        let k = model
            .transitions()
            .iter()
            .position(|&t| t > 0.7)
            .unwrap();
        let z = counts.zbar[k];
        let t = model.transitions()[k];
        let th = invert_threshold(z, t, &noise, (1e-6, 1.2)).unwrap();
        // 3 standard errors of the binomial count propagated through the slope
        let h = 1e-4;
        let slope = (crossing_probability(0.8 + h, t, &noise)
            - crossing_probability(0.8 - h, t, &noise))
            / (2.0 * h);
        let se = (z * (1.0 - z) / n as f64).sqrt() / slope.abs();
        assert!((th - 0.8).abs() < 3.0 * se, "theta_hat={th}, se={se}");
    }

    #[test]
    fn estimate_fails_when_all_saturated() {
        let model = QuantizerModel::make_uniform(3, 0.25).unwrap();
        let counts = ThresholdCounts {
            n_samples: 100,
            zbar: vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        };
        let err = estimate(&counts, &model, &NoiseModel::gaussian(0.1)).unwrap_err();
        assert!(matches!(err, MvbeError::NoUsableThresholds { .. }));
        assert!(err.to_string().contains("saturated_zero=4"));
    }

    #[test]
    fn estimate_discards_near_half() {
        let model = QuantizerModel::make_uniform(2, 0.5).unwrap();
        let counts = ThresholdCounts {
            n_samples: 1000,
            zbar: vec![0.9, 0.6, 0.1],
        };
        let res = estimate(&counts, &model, &NoiseModel::gaussian(0.05)).unwrap();
        assert!(res
            .discarded
            .iter()
            .any(|&(k, r)| k == 2 && r == DiscardReason::NearHalf));
    }

    #[test]
    fn estimate_mean_of_per_threshold() {
        let model = QuantizerModel::make_uniform(10, 2.0 / 1024.0).unwrap();
        let sigma = 0.3 * model.step();
        let noise = NoiseModel::gaussian(sigma);
        let p = SineParams::new(0.6, 0.723457, 0.1);
        let r = generate_record(&p, &noise, &model, 20_000, 5);
        let counts = threshold_counts(&r, &model);
        let res = estimate(&counts, &model, &noise).unwrap();
        let mean =
            res.per_threshold.iter().map(|&(_, t)| t).sum::<f64>() / res.usable_count as f64;
        assert!((res.theta_hat - mean).abs() < 1e-12);
        assert_eq!(res.usable_count, res.per_threshold.len());
        assert!((res.theta_hat - 0.6).abs() < 3.0 * model.step());
    }

    #[test]
    fn noiseless_closed_form_examples() {
        let model = QuantizerModel::make_uniform(1, 1.0).unwrap(); // T = [0.5]
        let counts = ThresholdCounts {
            n_samples: 1000,
            zbar: vec![0.25],
        };
        let res = estimate_noiseless(&counts, &model).unwrap();
        assert!((res.theta_hat - 0.5 / (PI / 4.0).sin()).abs() < 1e-12);
        assert!((res.theta_hat - 0.70711).abs() < 1e-5);
    }

    #[test]
    fn noiseless_sign_symmetry() {
        // T = -0.5 with zbar = 0.75 gives the same positive amplitude.
        let theta = closed_form_theta(0.75, -0.5, &MvbeConfig::default()).unwrap();
        assert!((theta - 0.70711).abs() < 1e-5);
    }

    #[test]
    fn noiseless_dominates_threshold_magnitude() {
        let config = MvbeConfig {
            theta_max: 100.0,
            ..Default::default()
        };
        for &(z, t) in &[(0.25, 0.5), (0.29, 0.8), (0.75, -0.3), (0.01, 0.9)] {
            let theta = closed_form_theta(z, t, &config).unwrap();
            assert!(theta >= t.abs() - 1e-12);
        }
    }

    #[test]
    fn estimators_agree_at_negligible_sigma() {
        let model = QuantizerModel::make_uniform(8, 2.0 / 256.0).unwrap();
        let sigma = 1e-4 * model.step(); // below the closed-form switch
        let noise = NoiseModel::gaussian(sigma);
        let p = SineParams::new(0.7, 0.723457, 0.4);
        let r = generate_record(&p, &noise, &model, 30_000, 2);
        let counts = threshold_counts(&r, &model);
        let a = estimate(&counts, &model, &noise).unwrap();
        let b = estimate_noiseless(&counts, &model).unwrap();
        assert!((a.theta_hat - b.theta_hat).abs() / b.theta_hat < 1e-3);
    }

    #[test]
    fn phase_independence() {
        let model = QuantizerModel::make_uniform(2, 0.5).unwrap();
        let noise = NoiseModel::gaussian(0.12 * model.step());
        let n = 40_000usize;
        let mut estimates = Vec::new();
        for (i, phase) in [0.0, 1.3, 2.9, 4.4].iter().enumerate() {
            let p = SineParams::new(0.85, 0.723457, *phase);
            let r = generate_record(&p, &noise, &model, n, 100 + i as u64);
            let counts = threshold_counts(&r, &model);
            estimates.push(estimate(&counts, &model, &noise).unwrap().theta_hat);
        }
        let spread = estimates.iter().cloned().fold(f64::MIN, f64::max)
            - estimates.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 0.02, "estimates {estimates:?}");
    }

    #[test]
    fn inverse_variance_weighting_stays_close_to_mean() {
        let model = QuantizerModel::make_uniform(10, 2.0 / 1024.0).unwrap();
        let noise = NoiseModel::gaussian(0.3 * model.step());
        let p = SineParams::new(0.5, 0.723457, 0.0);
        let r = generate_record(&p, &noise, &model, 20_000, 8);
        let counts = threshold_counts(&r, &model);
        let config = MvbeConfig {
            weighting: Weighting::InverseVariance,
            ..Default::default()
        };
        let weighted = estimate_with(&counts, &model, &noise, &config).unwrap();
        assert!((weighted.theta_hat - 0.5).abs() < 3.0 * model.step());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn crossing_symmetry_and_bounds(
            theta in 0.1f64..1.0,
            t in -0.9f64..0.9,
            sigma in 0.01f64..0.5,
        ) {
            let noise = NoiseModel::gaussian(sigma);
            let g_pos = crossing_probability(theta, t, &noise);
            let g_neg = crossing_probability(theta, -t, &noise);
            prop_assert!((0.0..=1.0).contains(&g_pos));
            prop_assert!((g_pos + g_neg - 1.0).abs() < 1e-9);
        }

        #[test]
        fn noiseless_matches_arcsine_formula(theta in 0.2f64..1.0, frac in -0.99f64..0.99) {
            let t = frac * theta;
            let g = crossing_probability(theta, t, &NoiseModel::gaussian(0.0));
            let expected = 0.5 - (t / theta).asin() / PI;
            prop_assert!((g - expected).abs() < 1e-14);
        }
    }
}

