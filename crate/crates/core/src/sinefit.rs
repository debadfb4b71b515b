//! Least-squares sine-fit baselines (3- and 4-parameter).
//!
//! The 3-parameter fit solves `y_n ~ A*cos(w*n) + B*sin(w*n) + C` at a
//! known frequency via the normal equations; the 4-parameter fit wraps it
//! in a Gauss-Newton loop that also refines the frequency. Records are
//! decoded to reals beforehand, either through the nominal output levels
//! or through the midpoint-correction table, with optional gain
//! compensation.

use crate::quantizer::QuantizerModel;
use crate::signal::Record;
use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

/// Result of a sine fit. `frequency` is populated by the 4-parameter fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    pub frequency: Option<f64>,
    pub residual_rms: f64,
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum SineFitError {
    #[error("need at least 4 samples, got {0}")]
    NotEnoughSamples(usize),
    #[error("normalized frequency must be in (0, 1), got {0}")]
    LambdaOutOfRange(f64),
    #[error("ill-conditioned design (frequency too close to 0 or 1/2 for this record length)")]
    IllConditioned,
    #[error("frequency refinement did not converge after {iterations} iterations")]
    Convergence {
        iterations: usize,
        last: FitResult,
    },
}

/// How codes are mapped back to reals before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    /// Nominal output levels.
    Nominal,
    /// Midpoint-correction table built from the transition levels.
    Midpoint,
}

/// Decode a record to real samples, dividing out the converter gain.
pub fn decode(record: &Record, model: &QuantizerModel, mode: DecodeMode, gain: f64) -> Vec<f64> {
    assert!(gain > 0.0, "gain must be positive");
    let table = match mode {
        DecodeMode::Nominal => model.output_levels().to_vec(),
        DecodeMode::Midpoint => model.midpoint_table(),
    };
    record.codes.iter().map(|&c| table[c] / gain).collect()
}

/// 3-parameter sine fit at a known normalized frequency.
pub fn fit3(samples: &[f64], lambda: f64) -> Result<FitResult, SineFitError> {
    let n = samples.len();
    if n < 4 {
        return Err(SineFitError::NotEnoughSamples(n));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(SineFitError::LambdaOutOfRange(lambda));
    }
    let w = 2.0 * PI * lambda;
    // normal equations over columns [cos, sin, 1]
    let (mut scc, mut scs, mut sc, mut sss, mut ss) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut syc, mut sys, mut sy) = (0.0, 0.0, 0.0);
    for (i, &y) in samples.iter().enumerate() {
        let (s, c) = (w * i as f64).sin_cos();
        scc += c * c;
        scs += c * s;
        sc += c;
        sss += s * s;
        ss += s;
        syc += y * c;
        sys += y * s;
        sy += y;
    }
    let m = Matrix3::new(scc, scs, sc, scs, sss, ss, sc, ss, n as f64);
    check_conditioning3(&m)?;
    let rhs = Vector3::new(syc, sys, sy);
    let sol = m.lu().solve(&rhs).ok_or(SineFitError::IllConditioned)?;
    let (a, b, offset) = (sol[0], sol[1], sol[2]);
    Ok(FitResult {
        amplitude: (a * a + b * b).sqrt(),
        phase: a.atan2(b),
        offset,
        frequency: None,
        residual_rms: residual_rms(samples, a, b, offset, w),
        iterations: 0,
    })
}

/// 4-parameter sine fit: Gauss-Newton frequency refinement starting from
/// `lambda_init`, converged when the frequency update drops below
/// 1e-12 relative (or failing after 50 iterations).
pub fn fit4(samples: &[f64], lambda_init: f64) -> Result<FitResult, SineFitError> {
    let n = samples.len();
    if n < 4 {
        return Err(SineFitError::NotEnoughSamples(n));
    }
    if !(lambda_init > 0.0 && lambda_init < 1.0) {
        return Err(SineFitError::LambdaOutOfRange(lambda_init));
    }
    let seed = fit3(samples, lambda_init)?;
    let mut w = 2.0 * PI * lambda_init;
    let (mut a, mut b, mut c0) = (
        seed.amplitude * seed.phase.sin(),
        seed.amplitude * seed.phase.cos(),
        seed.offset,
    );
    let max_iter = 50;
    for iter in 1..=max_iter {
        // columns [cos(wn), sin(wn), 1, n*(-A sin(wn) + B cos(wn))]
        let mut ata = Matrix4::zeros();
        let mut atb = Vector4::zeros();
        for (i, &y) in samples.iter().enumerate() {
            let t = i as f64;
            let (s, c) = (w * t).sin_cos();
            let row = Vector4::new(c, s, 1.0, t * (-a * s + b * c));
            ata += row * row.transpose();
            atb += row * y;
        }
        let sol = ata.lu().solve(&atb).ok_or(SineFitError::IllConditioned)?;
        a = sol[0];
        b = sol[1];
        c0 = sol[2];
        let dw = sol[3];
        w += dw;
        if !(w > 0.0 && w < 2.0 * PI) {
            return Err(SineFitError::IllConditioned);
        }
        if dw.abs() <= 1e-12 * w {
            return Ok(FitResult {
                amplitude: (a * a + b * b).sqrt(),
                phase: a.atan2(b),
                offset: c0,
                frequency: Some(w / (2.0 * PI)),
                residual_rms: residual_rms(samples, a, b, c0, w),
                iterations: iter,
            });
        }
    }
    Err(SineFitError::Convergence {
        iterations: max_iter,
        last: FitResult {
            amplitude: (a * a + b * b).sqrt(),
            phase: a.atan2(b),
            offset: c0,
            frequency: Some(w / (2.0 * PI)),
            residual_rms: residual_rms(samples, a, b, c0, w),
            iterations: max_iter,
        },
    })
}

/// Coarse-then-fine spectral peak scan; returns a normalized frequency
/// suitable as `lambda_init` for [`fit4`] when no nominal value is known.
pub fn spectral_peak_lambda(samples: &[f64]) -> f64 {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .map(|&y| Complex::new(y - mean, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let peak_bin = (1..n / 2)
        .max_by(|&i, &j| buf[i].norm_sqr().total_cmp(&buf[j].norm_sqr()))
        .unwrap_or(1);
    // refine on a fine grid spanning the neighboring bins
    let lo = (peak_bin as f64 - 1.0) / n as f64;
    let hi = (peak_bin as f64 + 1.0) / n as f64;
    let mut best = (0.0, peak_bin as f64 / n as f64);
    for g in 0..=400 {
        let lambda = lo + (hi - lo) * g as f64 / 400.0;
        let w = 2.0 * PI * lambda;
        let (mut re, mut im) = (0.0, 0.0);
        for (i, &y) in samples.iter().enumerate() {
            let (s, c) = (w * i as f64).sin_cos();
            re += (y - mean) * c;
            im -= (y - mean) * s;
        }
        let power = re * re + im * im;
        if power > best.0 {
            best = (power, lambda);
        }
    }
    best.1
}

fn residual_rms(samples: &[f64], a: f64, b: f64, c0: f64, w: f64) -> f64 {
    let ss: f64 = samples
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let (s, c) = (w * i as f64).sin_cos();
            let r = y - (a * c + b * s + c0);
            r * r
        })
        .sum();
    (ss / samples.len() as f64).sqrt()
}

fn check_conditioning3(m: &Matrix3<f64>) -> Result<(), SineFitError> {
    let eig = m.symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    if !(min > 1e-9 * max) {
        return Err(SineFitError::IllConditioned);
    }
    Ok(())
}
