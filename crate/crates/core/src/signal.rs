//! Sine sequence generation, additive noise, and quantized records.

use crate::quantizer::QuantizerModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

/// Amplitude, normalized frequency and initial phase of the probing sine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineParams {
    /// Amplitude in normalized full-scale units, nonnegative.
    pub amplitude: f64,
    /// Frequency normalized to the sampling rate, in (0, 1).
    pub frequency: f64,
    /// Initial record phase in radians.
    pub phase: f64,
}

impl SineParams {
    pub fn new(amplitude: f64, frequency: f64, phase: f64) -> Self {
        assert!(amplitude >= 0.0, "amplitude must be nonnegative");
        assert!(
            frequency > 0.0 && frequency < 1.0,
            "normalized frequency must be in (0, 1)"
        );
        Self {
            amplitude,
            frequency,
            phase,
        }
    }

    /// No-overload amplitude bound for a uniform quantizer with `l` codes.
    pub fn overload_bound(l: usize, step: f64) -> f64 {
        ((l - 1) as f64 / 2.0) * step
    }
}

/// Zero-mean Gaussian additive noise with known standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Self {
        assert!(sigma >= 0.0, "sigma must be nonnegative");
        Self { sigma }
    }

    /// Noise CDF `F(x)`. For sigma = 0 this is the unit step (value 1 at 0,
    /// matching the half-open quantization cells).
    pub fn cdf(&self, x: f64) -> f64 {
        if self.sigma == 0.0 {
            if x >= 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            std_normal_cdf(x / self.sigma)
        }
    }

    /// Noise density at `x`; zero outside the support for sigma = 0.
    pub fn pdf(&self, x: f64) -> f64 {
        if self.sigma == 0.0 {
            0.0
        } else {
            let z = x / self.sigma;
            (-0.5 * z * z).exp() / (self.sigma * (2.0 * PI).sqrt())
        }
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// One acquisition: a sequence of output codes plus generation provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub codes: Vec<usize>,
    pub params: Option<SineParams>,
    pub noise: Option<NoiseModel>,
}

#[derive(Debug, Error)]
pub enum RecordIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
}

/// Value of the deterministic sine sequence at sample `n`.
pub fn sine_value(params: &SineParams, n: usize) -> f64 {
    params.amplitude * (2.0 * PI * params.frequency * n as f64 + params.phase).sin()
}

/// Generate a quantized record of `n_samples` codes, bit-reproducible for a
/// fixed seed. Logs a warning when the normalized frequency is within 1e-6
/// of a rational p/q with q <= 20, since near-coherent sampling clusters
/// phases and starves the phase-average estimator.
pub fn generate_record(
    params: &SineParams,
    noise: &NoiseModel,
    model: &QuantizerModel,
    n_samples: usize,
    seed: u64,
) -> Record {
    assert!(n_samples >= 1, "need at least one sample");
    if let Some((p, q)) = near_rational(params.frequency, 20, 1e-6) {
        log::warn!(
            "normalized frequency {} is within 1e-6 of {p}/{q}; phase coverage will be poor",
            params.frequency
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let codes = if noise.sigma == 0.0 {
        (0..n_samples)
            .map(|n| model.quantize(sine_value(params, n)))
            .collect()
    } else {
        let normal = Normal::new(0.0, noise.sigma).expect("sigma validated");
        (0..n_samples)
            .map(|n| model.quantize(sine_value(params, n) + normal.sample(&mut rng)))
            .collect()
    };
    Record {
        codes,
        params: Some(*params),
        noise: Some(*noise),
    }
}

/// Smallest-denominator rational p/q with q <= `max_den` within `tol` of
/// `x`, if any.
pub fn near_rational(x: f64, max_den: u32, tol: f64) -> Option<(u32, u32)> {
    for q in 1..=max_den {
        let p = (x * q as f64).round();
        if p >= 0.0 && (x - p / q as f64).abs() < tol {
            return Some((p as u32, q));
        }
    }
    None
}

/// Nominal acquisition parameters stored next to a record file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordMetadata {
    pub bits: u32,
    pub step: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub phase: f64,
    pub amplitude_nominal: Option<f64>,
    pub transitions: Vec<f64>,
}

/// Write a record as CSV with header `n,code`.
pub fn write_record_csv(record: &Record, path: &Path) -> Result<(), RecordIoError> {
    let io_err = |source| RecordIoError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    writeln!(w, "n,code").map_err(io_err)?;
    for (n, code) in record.codes.iter().enumerate() {
        writeln!(w, "{n},{code}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Read a record written by [`write_record_csv`]; parse errors cite the
/// offending line.
pub fn read_record_csv(path: &Path) -> Result<Record, RecordIoError> {
    let io_err = |source| RecordIoError::Io {
        path: path.display().to_string(),
        source,
    };
    let parse_err = |line, msg| RecordIoError::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut codes = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if i == 0 {
            if trimmed != "n,code" {
                return Err(parse_err(1, format!("expected header 'n,code', got '{trimmed}'")));
            }
            continue;
        }
        let mut fields = trimmed.split(',');
        let (n_str, code_str) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(parse_err(i + 1, "expected two fields 'n,code'".into())),
        };
        let _: usize = n_str
            .parse()
            .map_err(|e| parse_err(i + 1, format!("bad sample index '{n_str}': {e}")))?;
        let code: usize = code_str
            .parse()
            .map_err(|e| parse_err(i + 1, format!("bad code '{code_str}': {e}")))?;
        codes.push(code);
    }
    Ok(Record {
        codes,
        params: None,
        noise: None,
    })
}
