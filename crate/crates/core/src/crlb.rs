//! Exact-likelihood Cramér-Rao lower bound for the amplitude.
//!
//! Each quantized sample is a categorical observation whose cell
//! probabilities are Gaussian CDF differences across the transition
//! levels; the Fisher information is the usual sum of squared probability
//! derivatives over probabilities, with no additive-noise approximation
//! of the quantizer.

use crate::quantizer::QuantizerModel;
use crate::signal::{NoiseModel, SineParams};
use thiserror::Error;

/// Probability of one output cell for one sample, with its derivative
/// with respect to the amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellProbability {
    pub p: f64,
    pub dp_dtheta: f64,
}

#[derive(Debug, Error)]
pub enum CrlbError {
    #[error("Fisher information is singular for sigma = 0 (noiseless quantization)")]
    SigmaZero,
    #[error("Fisher information is zero; the bound is unbounded for these parameters")]
    UnboundedCrlb,
}

/// Cells with probability below this are skipped in the information sum;
/// their contribution is below representable significance.
const P_FLOOR: f64 = 1e-30;

/// Cell probabilities and amplitude derivatives for sample index `n`:
/// `p_k = F(T_{k+1} - theta*x_n) - F(T_k - theta*x_n)` with sentinels at
/// plus/minus infinity, and
/// `dp_k/dtheta = -x_n * [pdf(T_{k+1} - theta*x_n) - pdf(T_k - theta*x_n)]`.
pub fn cell_probabilities(
    params: &SineParams,
    noise: &NoiseModel,
    model: &QuantizerModel,
    n: usize,
) -> Result<Vec<CellProbability>, CrlbError> {
    if noise.sigma == 0.0 {
        return Err(CrlbError::SigmaZero);
    }
    let x = (2.0 * std::f64::consts::PI * params.frequency * n as f64 + params.phase).sin();
    let signal = params.amplitude * x;
    let t = model.transitions();
    let l = model.code_count();
    let mut out = Vec::with_capacity(l);
    let mut prev_cdf = 0.0;
    let mut prev_pdf = 0.0;
    for k in 0..l {
        let (cdf, pdf) = if k < l - 1 {
            (noise.cdf(t[k] - signal), noise.pdf(t[k] - signal))
        } else {
            (1.0, 0.0)
        };
        out.push(CellProbability {
            p: cdf - prev_cdf,
            dp_dtheta: -x * (pdf - prev_pdf),
        });
        prev_cdf = cdf;
        prev_pdf = pdf;
    }
    Ok(out)
}

/// Fisher information for the amplitude over the first `n_samples`
/// samples: `sum_n sum_k (dp/dtheta)^2 / p`.
pub fn fisher_information(
    params: &SineParams,
    noise: &NoiseModel,
    model: &QuantizerModel,
    n_samples: usize,
) -> Result<f64, CrlbError> {
    assert!(n_samples >= 1);
    let mut info = 0.0;
    for n in 0..n_samples {
        let cells = cell_probabilities(params, noise, model, n)?;
        for c in cells {
            if c.p > P_FLOOR {
                info += c.dp_dtheta * c.dp_dtheta / c.p;
            }
        }
    }
    Ok(info)
}

/// Cramér-Rao lower bound on the variance of any unbiased amplitude
/// estimator: the reciprocal Fisher information.
pub fn crlb_amplitude(
    params: &SineParams,
    noise: &NoiseModel,
    model: &QuantizerModel,
    n_samples: usize,
) -> Result<f64, CrlbError> {
    let info = fisher_information(params, noise, model, n_samples)?;
    if info <= 0.0 {
        return Err(CrlbError::UnboundedCrlb);
    }
    Ok(1.0 / info)
}
