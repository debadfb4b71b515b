//! Monte Carlo campaigns: bias sweeps, variance-vs-CRLB tables and the
//! phase-average approximation error, with deterministic CSV emission.

use crate::crlb::crlb_amplitude;
use crate::mvbe::{self, MvbeConfig};
use crate::quantizer::{QuantizerError, QuantizerModel};
use crate::signal::{generate_record, NoiseModel, SineParams};
use crate::sinefit::{self, DecodeMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Quantizer(#[from] QuantizerError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid experiment config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Crlb(#[from] crate::crlb::CrlbError),
}

/// Which quantizer an experiment runs against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum QuantizerSpec {
    Uniform {
        bits: u32,
    },
    Ladder {
        bits: u32,
        relative_sigma: f64,
        seed: u64,
    },
    /// Transition levels from a plain-text file (one real per line).
    File {
        bits: u32,
        path: String,
    },
}

impl QuantizerSpec {
    pub fn build(&self) -> Result<QuantizerModel, QuantizerError> {
        match self {
            QuantizerSpec::Uniform { bits } => {
                let l = 1u64 << bits;
                QuantizerModel::make_uniform(*bits, 2.0 / l as f64)
            }
            QuantizerSpec::Ladder {
                bits,
                relative_sigma,
                seed,
            } => QuantizerModel::make_resistor_ladder(*bits, (-1.0, 1.0), *relative_sigma, *seed),
            QuantizerSpec::File { bits, path } => {
                let l = 1u64 << bits;
                QuantizerModel::from_levels_file(Path::new(path), 2.0 / l as f64)
            }
        }
    }
}

/// Initial record phase: fixed across records, or drawn per record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhasePolicy {
    Fixed(f64),
    RandomizedPerRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Lse3,
    Lse4,
    Lse4Midpoint,
    Mvbe,
    MvbeNoiseless,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Lse3 => "lse3",
            EstimatorKind::Lse4 => "lse4",
            EstimatorKind::Lse4Midpoint => "lse4_midpoint",
            EstimatorKind::Mvbe => "mvbe",
            EstimatorKind::MvbeNoiseless => "mvbe_noiseless",
        }
    }
}

/// One Monte Carlo campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub quantizer: QuantizerSpec,
    pub theta_grid: Vec<f64>,
    pub lambda: f64,
    pub phase: PhasePolicy,
    /// Noise standard deviation in units of the quantization step.
    pub sigma_lsb: f64,
    pub samples_per_record: usize,
    pub records: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), ExperimentError> {
        if self.records == 0 {
            return Err(ExperimentError::BadConfig("records must be >= 1".into()));
        }
        if self.samples_per_record == 0 {
            return Err(ExperimentError::BadConfig(
                "samples_per_record must be >= 1".into(),
            ));
        }
        if self.estimators.is_empty() {
            return Err(ExperimentError::BadConfig("estimator set is empty".into()));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(ExperimentError::BadConfig(format!(
                "lambda must be in (0, 1), got {}",
                self.lambda
            )));
        }
        // amplitudes are capped at normalized full scale, not at the
        // converter's no-overload bound: the severe-quantization studies
        // overdrive the top transition level on purpose
        for &theta in &self.theta_grid {
            if !(0.0..=1.0).contains(&theta) {
                return Err(ExperimentError::BadConfig(format!(
                    "theta {theta} outside [0, 1] (normalized full scale)"
                )));
            }
        }
        Ok(())
    }
}

/// One line of a bias sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta_true: f64,
    pub estimator: &'static str,
    pub mean_estimate: f64,
    pub bias: f64,
    pub bias_over_delta: f64,
    pub std_dev: f64,
    pub records_used: usize,
    pub failures: usize,
}

/// One line of a variance-vs-CRLB table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrlbRow {
    pub theta_over_delta: f64,
    pub estimator: &'static str,
    pub variance: f64,
    pub crlb: f64,
    pub ratio: f64,
}

/// One line of an approximation-error table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxErrorRow {
    pub n: usize,
    pub r: usize,
    pub error: f64,
}

/// Grid for the phase-average approximation error `e(N, R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxErrorConfig {
    pub n_grid: Vec<usize>,
    pub r_grid: Vec<usize>,
    pub threshold: f64,
    pub theta: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub phase: f64,
    pub seed: u64,
}

/// Search range used by the sweep harness; wider than the estimator
/// default so amplitudes at the top of a grid are not censored by the
/// bracket bound.
fn sweep_mvbe_config() -> MvbeConfig {
    MvbeConfig {
        theta_max: 1.5,
        ..MvbeConfig::default()
    }
}

fn record_phase(policy: PhasePolicy, record_seed: u64) -> f64 {
    match policy {
        PhasePolicy::Fixed(phase) => phase,
        PhasePolicy::RandomizedPerRecord => {
            let mut rng = ChaCha8Rng::seed_from_u64(record_seed ^ 0x517c_c1b7_2722_0a95);
            rng.gen::<f64>() * 2.0 * std::f64::consts::PI
        }
    }
}

fn apply_estimator(
    kind: EstimatorKind,
    record: &crate::signal::Record,
    model: &QuantizerModel,
    noise: &NoiseModel,
    lambda: f64,
) -> Option<f64> {
    match kind {
        EstimatorKind::Mvbe => {
            let counts = mvbe::threshold_counts(record, model);
            mvbe::estimate_with(&counts, model, noise, &sweep_mvbe_config())
                .ok()
                .map(|r| r.theta_hat)
        }
        EstimatorKind::MvbeNoiseless => {
            let counts = mvbe::threshold_counts(record, model);
            mvbe::estimate_noiseless(&counts, model)
                .ok()
                .map(|r| r.theta_hat)
        }
        EstimatorKind::Lse3 => {
            let samples = sinefit::decode(record, model, DecodeMode::Nominal, 1.0);
            sinefit::fit3(&samples, lambda).ok().map(|f| f.amplitude)
        }
        EstimatorKind::Lse4 => {
            let samples = sinefit::decode(record, model, DecodeMode::Nominal, 1.0);
            sinefit::fit4(&samples, lambda).ok().map(|f| f.amplitude)
        }
        EstimatorKind::Lse4Midpoint => {
            let samples = sinefit::decode(record, model, DecodeMode::Midpoint, 1.0);
            sinefit::fit4(&samples, lambda).ok().map(|f| f.amplitude)
        }
    }
}

/// Per-(theta, estimator) estimates over all records. Records are
/// generated in parallel with per-record seeds `seed + record_index`
/// (indices run consecutively through the theta grid), and results are
/// reduced in record order so the output does not depend on scheduling.
fn run_cells(
    config: &ExperimentConfig,
    model: &QuantizerModel,
) -> Result<Vec<Vec<Vec<Option<f64>>>>, ExperimentError> {
    config.validate()?;
    let sigma = config.sigma_lsb * model.step();
    let noise = NoiseModel::gaussian(sigma);
    let mut estimators = config.estimators.clone();
    estimators.sort_by_key(|e| e.name());
    estimators.dedup();
    let r = config.records;

    let cells: Vec<Vec<Vec<Option<f64>>>> = config
        .theta_grid
        .iter()
        .enumerate()
        .map(|(ti, &theta)| {
            (0..r)
                .into_par_iter()
                .map(|i| {
                    let record_seed = config.seed + (ti * r + i) as u64;
                    let phase = record_phase(config.phase, record_seed);
                    let params = SineParams::new(theta, config.lambda, phase);
                    let record = generate_record(
                        &params,
                        &noise,
                        model,
                        config.samples_per_record,
                        record_seed,
                    );
                    estimators
                        .iter()
                        .map(|&e| apply_estimator(e, &record, model, &noise, config.lambda))
                        .collect::<Vec<_>>()
                })
                .collect()
        })
        .collect();
    Ok(cells)
}

fn sorted_estimators(config: &ExperimentConfig) -> Vec<EstimatorKind> {
    let mut estimators = config.estimators.clone();
    estimators.sort_by_key(|e| e.name());
    estimators.dedup();
    estimators
}

/// Bias and spread of each estimator over the theta grid. Failed records
/// are counted but excluded from the averages; a cell where every record
/// failed is emitted with NaN statistics.
pub fn run_bias_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>, ExperimentError> {
    let model = config.quantizer.build()?;
    let cells = run_cells(config, &model)?;
    let estimators = sorted_estimators(config);
    let delta = model.step();

    let mut order: Vec<usize> = (0..config.theta_grid.len()).collect();
    order.sort_by(|&a, &b| config.theta_grid[a].total_cmp(&config.theta_grid[b]));

    let mut rows = Vec::new();
    for &ti in &order {
        let theta = config.theta_grid[ti];
        for (ei, est) in estimators.iter().enumerate() {
            let values: Vec<f64> = cells[ti].iter().filter_map(|rec| rec[ei]).collect();
            let used = values.len();
            let failures = config.records - used;
            let (mean, std_dev) = mean_std(&values);
            rows.push(SweepRow {
                theta_true: theta,
                estimator: est.name(),
                mean_estimate: mean,
                bias: mean - theta,
                bias_over_delta: (mean - theta) / delta,
                std_dev,
                records_used: used,
                failures,
            });
        }
    }
    Ok(rows)
}

/// Empirical estimator variance normalized to the exact-likelihood CRLB,
/// per theta and estimator. The bound is evaluated at the fixed record
/// phase (or phase 0 when phases are randomized).
pub fn run_variance_vs_crlb(config: &ExperimentConfig) -> Result<Vec<CrlbRow>, ExperimentError> {
    if config.sigma_lsb <= 0.0 {
        return Err(ExperimentError::BadConfig(
            "variance-vs-CRLB requires sigma > 0".into(),
        ));
    }
    let model = config.quantizer.build()?;
    let cells = run_cells(config, &model)?;
    let estimators = sorted_estimators(config);
    let delta = model.step();
    let noise = NoiseModel::gaussian(config.sigma_lsb * delta);
    let bound_phase = match config.phase {
        PhasePolicy::Fixed(phase) => phase,
        PhasePolicy::RandomizedPerRecord => 0.0,
    };

    let mut order: Vec<usize> = (0..config.theta_grid.len()).collect();
    order.sort_by(|&a, &b| config.theta_grid[a].total_cmp(&config.theta_grid[b]));

    let mut rows = Vec::new();
    for &ti in &order {
        let theta = config.theta_grid[ti];
        let params = SineParams::new(theta, config.lambda, bound_phase);
        let bound = crlb_amplitude(&params, &noise, &model, config.samples_per_record)?;
        for (ei, est) in estimators.iter().enumerate() {
            let values: Vec<f64> = cells[ti].iter().filter_map(|rec| rec[ei]).collect();
            let (_, std_dev) = mean_std(&values);
            let variance = std_dev * std_dev;
            rows.push(CrlbRow {
                theta_over_delta: theta / delta,
                estimator: est.name(),
                variance,
                crlb: bound,
                ratio: variance / bound,
            });
        }
    }
    Ok(rows)
}

/// Absolute difference between the arcsine phase-average crossing
/// probability and the empirical exceedance fraction pooled over `R`
/// records of `N` samples, for every grid point.
pub fn approximation_error(config: &ApproxErrorConfig) -> Vec<ApproxErrorRow> {
    let noise = NoiseModel::gaussian(config.sigma);
    let g = mvbe::crossing_probability(config.theta, config.threshold, &noise);
    let mut rows = Vec::new();
    for &n in &config.n_grid {
        // deterministic sine sequence shared by every record
        let signal: Vec<f64> = (0..n)
            .map(|i| {
                config.theta
                    * (2.0 * std::f64::consts::PI * config.lambda * i as f64 + config.phase).sin()
            })
            .collect();
        for &r in &config.r_grid {
            let total: u64 = (0..r)
                .into_par_iter()
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed + i as u64);
                    if config.sigma == 0.0 {
                        signal
                            .iter()
                            .filter(|&&x| x > config.threshold)
                            .count() as u64
                    } else {
                        let normal = Normal::new(0.0, config.sigma).expect("sigma checked");
                        signal
                            .iter()
                            .filter(|&&x| x + normal.sample(&mut rng) > config.threshold)
                            .count() as u64
                    }
                })
                .sum();
            let empirical = total as f64 / (n as f64 * r as f64);
            rows.push(ApproxErrorRow {
                n,
                r,
                error: (g - empirical).abs(),
            });
        }
    }
    rows
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// A table row that knows its CSV schema.
pub trait CsvRow {
    fn header() -> &'static str;
    fn write_fields(&self, w: &mut dyn Write) -> std::io::Result<()>;
}

impl CsvRow for SweepRow {
    fn header() -> &'static str {
        "theta_true,estimator,mean_estimate,bias,bias_over_delta,std_dev,records_used,failures"
    }
    fn write_fields(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            self.theta_true,
            self.estimator,
            self.mean_estimate,
            self.bias,
            self.bias_over_delta,
            self.std_dev,
            self.records_used,
            self.failures
        )
    }
}

impl CsvRow for CrlbRow {
    fn header() -> &'static str {
        "theta_over_delta,estimator,variance,crlb,ratio"
    }
    fn write_fields(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(
            w,
            "{},{},{},{},{}",
            self.theta_over_delta, self.estimator, self.variance, self.crlb, self.ratio
        )
    }
}

impl CsvRow for ApproxErrorRow {
    fn header() -> &'static str {
        "n,r,error"
    }
    fn write_fields(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "{},{},{}", self.n, self.r, self.error)
    }
}

/// Write a table as UTF-8 CSV with one header row. Row order is the
/// caller's; the harness emits rows theta-ascending, estimator-ascending,
/// so a rerun with the same config and seed is byte-identical.
pub fn emit_csv<T: CsvRow>(rows: &[T], path: &Path) -> Result<(), ExperimentError> {
    let io_err = |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    writeln!(w, "{}", T::header()).map_err(io_err)?;
    for row in rows {
        row.write_fields(&mut w).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Parameter bundles for the reference studies.
pub mod figures {
    use super::*;

    fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
        (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect()
    }

    /// Bias of the least-squares fit on a 10-bit uniform quantizer.
    pub fn fig2_uniform() -> ExperimentConfig {
        ExperimentConfig {
            quantizer: QuantizerSpec::Uniform { bits: 10 },
            theta_grid: linspace(0.1, 0.9, 20),
            lambda: 0.723457,
            phase: PhasePolicy::Fixed(0.0),
            sigma_lsb: 0.3,
            samples_per_record: 2000,
            records: 100,
            seed: 20_001,
            estimators: vec![EstimatorKind::Lse3],
        }
    }

    /// Same study on a 10-bit non-uniform (resistor ladder) quantizer.
    pub fn fig2_nonuniform() -> ExperimentConfig {
        ExperimentConfig {
            quantizer: QuantizerSpec::Ladder {
                bits: 10,
                relative_sigma: 0.03,
                seed: 1002,
            },
            ..fig2_uniform()
        }
    }

    /// Approximation error of the phase-average integral, `T = 1`,
    /// `theta = 1`, two record counts.
    pub fn fig3() -> ApproxErrorConfig {
        ApproxErrorConfig {
            n_grid: vec![1_000, 5_000, 20_000, 60_000, 120_000],
            r_grid: vec![1_000, 50_000],
            threshold: 1.0,
            theta: 1.0,
            sigma: 0.1,
            lambda: 0.723457,
            phase: 0.0,
            seed: 30_001,
        }
    }

    /// 12-bit resistor-ladder study: amplitude bias of the mean-value
    /// estimator against the 4-parameter sine fit.
    pub fn fig4() -> ExperimentConfig {
        let n = 32_193usize;
        ExperimentConfig {
            quantizer: QuantizerSpec::Ladder {
                bits: 12,
                relative_sigma: 0.03,
                seed: 1004,
            },
            theta_grid: linspace(0.05, 1.0, 20),
            lambda: 1050.0 * std::f64::consts::PI / n as f64,
            phase: PhasePolicy::Fixed(0.0),
            sigma_lsb: 0.21,
            samples_per_record: n,
            records: 10,
            seed: 40_001,
            estimators: vec![EstimatorKind::Mvbe, EstimatorKind::Lse4],
        }
    }

    /// Severe quantization: 2-bit uniform quantizer. The grid skips
    /// (0.43, 0.53), where the estimator has no usable threshold: the
    /// exceedance of T = +-0.25 falls inside the near-half discard band
    /// while T = 0.75 is still out of the noise's reach.
    pub fn fig5() -> ExperimentConfig {
        ExperimentConfig {
            quantizer: QuantizerSpec::Uniform { bits: 2 },
            theta_grid: vec![
                0.40, 0.42, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.925, 0.95,
            ],
            lambda: 0.723457,
            phase: PhasePolicy::Fixed(0.4876),
            sigma_lsb: 0.12,
            samples_per_record: 106_777,
            records: 10,
            seed: 50_001,
            estimators: vec![EstimatorKind::Mvbe, EstimatorKind::Lse3],
        }
    }

    /// Variance of both estimators normalized to the CRLB, 8-bit uniform.
    pub fn fig6() -> ExperimentConfig {
        let delta = 2.0 / 256.0;
        ExperimentConfig {
            quantizer: QuantizerSpec::Uniform { bits: 8 },
            theta_grid: (0..10).map(|i| (20.0 + 10.0 * i as f64) * delta).collect(),
            lambda: 0.1234,
            phase: PhasePolicy::Fixed(0.0),
            sigma_lsb: 0.2,
            samples_per_record: 1000,
            records: 100,
            seed: 60_001,
            estimators: vec![EstimatorKind::Mvbe, EstimatorKind::Lse3],
        }
    }
}
