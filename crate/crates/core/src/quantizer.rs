//! Stepwise ADC models with arbitrary monotone transition levels.
//!
//! A `b`-bit quantizer has `L = 2^b` output codes separated by `L - 1`
//! transition levels `T_1 < ... < T_{L-1}` (indexing is 1-based with
//! sentinels at plus/minus infinity, so code `k` covers `[T_k, T_{k+1})`).
//! The nominal output level of code `k` is `-(L/2 - 1)*step + k*step` in
//! normalized full-scale units, input range [-1, 1].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuantizerError {
    #[error("bits must be in 1..=16, got {0}")]
    BitsOutOfRange(u32),
    #[error("step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("transition levels must be strictly increasing (violation at index {0})")]
    NonMonotone(usize),
    #[error("expected 2^b - 1 transition levels for some b in 1..=16, got {0}")]
    BadLevelCount(usize),
    #[error("relative_sigma must be nonnegative, got {0}")]
    NegativeSigma(f64),
    #[error("{path}: line {line}: {msg}")]
    LevelFile {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A monotone stepwise quantizer characteristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerModel {
    bits: u32,
    step: f64,
    transitions: Vec<f64>,
    output_levels: Vec<f64>,
}

/// Per-transition deviation from the endpoint-anchored uniform line, in
/// units of the quantization step. Index `k` runs 1..L-1.
#[derive(Debug, Clone, PartialEq)]
pub struct InlProfile(pub Vec<f64>);

impl QuantizerModel {
    /// Ideal uniform quantizer: `T_k = -((L-1)/2)*step + k*step`.
    pub fn make_uniform(bits: u32, step: f64) -> Result<Self, QuantizerError> {
        if !(1..=16).contains(&bits) {
            return Err(QuantizerError::BitsOutOfRange(bits));
        }
        if !(step > 0.0) {
            return Err(QuantizerError::NonPositiveStep(step));
        }
        let l = 1usize << bits;
        let transitions = (1..l)
            .map(|k| -((l - 1) as f64 / 2.0) * step + k as f64 * step)
            .collect();
        Ok(Self {
            bits,
            step,
            transitions,
            output_levels: nominal_levels(l, step),
        })
    }

    /// Non-uniform quantizer from a resistor ladder with normally
    /// distributed resistance values (relative spread `relative_sigma`,
    /// non-positive draws are redrawn). Transition levels are the tap
    /// voltages of the ladder across `full_scale`, which guarantees
    /// monotonicity; the nominal step is `(hi - lo) / L`.
    pub fn make_resistor_ladder(
        bits: u32,
        full_scale: (f64, f64),
        relative_sigma: f64,
        seed: u64,
    ) -> Result<Self, QuantizerError> {
        if !(1..=16).contains(&bits) {
            return Err(QuantizerError::BitsOutOfRange(bits));
        }
        if relative_sigma < 0.0 {
            return Err(QuantizerError::NegativeSigma(relative_sigma));
        }
        let (lo, hi) = full_scale;
        let l = 1usize << bits;
        let step = (hi - lo) / l as f64;
        if !(step > 0.0) {
            return Err(QuantizerError::NonPositiveStep(step));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(1.0, relative_sigma).expect("sigma validated");
        let resistances: Vec<f64> = (0..l)
            .map(|_| loop {
                let r = normal.sample(&mut rng);
                if r > 0.0 {
                    break r;
                }
            })
            .collect();
        let total: f64 = resistances.iter().sum();
        let mut acc = 0.0;
        let transitions = resistances[..l - 1]
            .iter()
            .map(|r| {
                acc += r;
                lo + (hi - lo) * acc / total
            })
            .collect();
        Ok(Self {
            bits,
            step,
            transitions,
            output_levels: nominal_levels(l, step),
        })
    }

    /// Model with externally calibrated transition levels and nominal
    /// output levels. The level count must be `2^b - 1`.
    pub fn from_transitions(levels: Vec<f64>, step: f64) -> Result<Self, QuantizerError> {
        if !(step > 0.0) {
            return Err(QuantizerError::NonPositiveStep(step));
        }
        let l = levels.len() + 1;
        let bits = l.trailing_zeros();
        if !l.is_power_of_two() || !(1..=16).contains(&bits) {
            return Err(QuantizerError::BadLevelCount(levels.len()));
        }
        if let Some(i) = (1..levels.len()).find(|&i| levels[i] <= levels[i - 1]) {
            return Err(QuantizerError::NonMonotone(i));
        }
        Ok(Self {
            bits,
            step,
            transitions: levels,
            output_levels: nominal_levels(l, step),
        })
    }

    /// Read transition levels from a plain-text file, one decimal real per
    /// line, strictly increasing.
    pub fn from_levels_file(path: &Path, step: f64) -> Result<Self, QuantizerError> {
        let io_err = |source| QuantizerError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::open(path).map_err(io_err)?;
        let mut levels = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err)?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let v: f64 = trimmed.parse().map_err(|e| QuantizerError::LevelFile {
                path: path.display().to_string(),
                line: i + 1,
                msg: format!("invalid real '{trimmed}': {e}"),
            })?;
            levels.push(v);
        }
        Self::from_transitions(levels, step)
    }

    /// Write transition levels in the plain-text format read back by
    /// [`QuantizerModel::from_levels_file`].
    pub fn write_levels_file(&self, path: &Path) -> Result<(), QuantizerError> {
        let io_err = |source| QuantizerError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        for t in &self.transitions {
            writeln!(file, "{t}").map_err(io_err)?;
        }
        file.flush().map_err(io_err)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Number of output codes, `L = 2^bits`.
    pub fn code_count(&self) -> usize {
        1 << self.bits
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Transition levels `T_1..T_{L-1}`; `transitions()[k-1]` is `T_k`.
    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn output_levels(&self) -> &[f64] {
        &self.output_levels
    }

    /// Output code for `value`: the `k` with `T_k <= value < T_{k+1}`,
    /// with sentinels at plus/minus infinity (out-of-range inputs clip to
    /// the edge codes).
    pub fn quantize(&self, value: f64) -> usize {
        self.transitions.partition_point(|&t| t <= value)
    }

    /// INL per transition, in step units, relative to the straight line
    /// through the first and last transition levels (so INL_1 and
    /// INL_{L-1} are zero by construction).
    pub fn inl(&self) -> InlProfile {
        let m = self.transitions.len();
        if m == 1 {
            return InlProfile(vec![0.0]);
        }
        let first = self.transitions[0];
        let last = self.transitions[m - 1];
        let pitch = (last - first) / (m - 1) as f64;
        InlProfile(
            self.transitions
                .iter()
                .enumerate()
                .map(|(i, &t)| (t - (first + i as f64 * pitch)) / self.step)
                .collect(),
        )
    }

    /// Differential nonlinearity per code bin, in step units.
    pub fn dnl(&self) -> Vec<f64> {
        self.transitions
            .windows(2)
            .map(|w| (w[1] - w[0] - self.step) / self.step)
            .collect()
    }

    /// Representative value per code: interior codes get the cell
    /// midpoint `(T_k + T_{k+1}) / 2`; the unbounded edge cells get
    /// `T_1 - step/2` and `T_{L-1} + step/2`.
    pub fn midpoint_table(&self) -> Vec<f64> {
        let m = self.transitions.len();
        let mut table = Vec::with_capacity(m + 1);
        table.push(self.transitions[0] - self.step / 2.0);
        table.extend(
            self.transitions
                .windows(2)
                .map(|w| 0.5 * (w[0] + w[1])),
        );
        table.push(self.transitions[m - 1] + self.step / 2.0);
        table
    }
}

fn nominal_levels(l: usize, step: f64) -> Vec<f64> {
    (0..l)
        .map(|k| -((l / 2) as f64 - 1.0) * step + k as f64 * step)
        .collect()
}

impl InlProfile {
    /// CSV export with columns `k,inl_lsb` (k = 1..L-1).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,inl_lsb")?;
        for (i, v) in self.0.iter().enumerate() {
            writeln!(w, "{},{}", i + 1, v)?;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
