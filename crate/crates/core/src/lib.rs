//! Amplitude estimation of a noisy sine wave from its quantized samples.
//!
//! The centerpiece is a mean-value-based estimator (MVBE) that inverts the
//! expected per-threshold exceedance fraction of a random-phase sine wave,
//! so it works with quantizers whose transition levels are not uniformly
//! spaced. Around it sit:
//!
//! - [`quantizer`]: stepwise ADC models (uniform, resistor ladder, or
//!   externally calibrated transition levels) with INL and midpoint tables;
//! - [`signal`]: reproducible generation of quantized sine records;
//! - [`mvbe`]: the estimator itself, including the noiseless closed form;
//! - [`sinefit`]: 3- and 4-parameter least-squares baselines;
//! - [`crlb`]: the exact-likelihood Cramér-Rao bound for the amplitude;
//! - [`experiments`]: Monte Carlo bias/variance campaigns with CSV output.

pub mod crlb;
pub mod experiments;
pub mod mvbe;
pub mod quadrature;
pub mod quantizer;
pub mod signal;
pub mod sinefit;

pub use crlb::{cell_probabilities, crlb_amplitude, fisher_information, CellProbability};
pub use mvbe::{
    crossing_probability, estimate, estimate_noiseless, invert_threshold, threshold_counts,
    DiscardReason, EstimationResult, MvbeConfig, ThresholdCounts,
};
pub use quantizer::{InlProfile, QuantizerModel};
pub use signal::{
    generate_record, read_record_csv, sine_value, write_record_csv, NoiseModel, Record,
    RecordMetadata, SineParams,
};
pub use sinefit::{decode, fit3, fit4, spectral_peak_lambda, DecodeMode, FitResult};
