//! Command-line front end: record generation, amplitude estimation,
//! quantizer characterization, CRLB tables, and the bundled reference
//! studies.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use quantest::experiments::{self, figures, ApproxErrorConfig, ExperimentConfig, QuantizerSpec};
use quantest::{
    estimate, estimate_noiseless, fit3, fit4, generate_record, read_record_csv,
    spectral_peak_lambda, threshold_counts, write_record_csv, DecodeMode, NoiseModel,
    QuantizerModel, RecordMetadata, SineParams,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "quantest", version, about)]
struct Cli {
    /// Increase log verbosity (-v: info, -vv: debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a quantized sine record plus a metadata sidecar.
    Gen {
        #[arg(long)]
        config: PathBuf,
        /// Record CSV path; the sidecar gets the same path with a .json
        /// extension.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate the sine amplitude from a record file.
    Estimate {
        /// Record CSV (header `n,code`).
        record: PathBuf,
        /// Transition-level file, one real per line.
        #[arg(long)]
        levels: PathBuf,
        /// Noise standard deviation in normalized full-scale units.
        #[arg(long)]
        sigma: f64,
        #[arg(long, value_enum, default_value_t = Method::Mvbe)]
        method: Method,
        /// Normalized frequency for the sine-fit methods; estimated from
        /// the record spectrum when omitted.
        #[arg(long)]
        lambda: Option<f64>,
        /// Optional JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a bias sweep from an experiment config and write the table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a variance-vs-CRLB comparison and write the table.
    Crlb {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the integral nonlinearity profile of a quantizer.
    Inl {
        /// Transition-level file, one real per line.
        #[arg(long)]
        levels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reproduce a bundled reference study (fig2..fig6).
    Figs {
        figure_id: String,
        /// Output directory for the CSV set.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides the bundled Monte Carlo seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Mvbe,
    /// Mean-value estimator with the closed-form noiseless inversion.
    Mvbe0,
    Lse3,
    Lse4,
    /// 4-parameter fit on midpoint-corrected decoding.
    Lse4mid,
}

/// Input to `gen`; sigma is in units of the quantization step.
#[derive(Debug, Serialize, Deserialize)]
struct GenConfig {
    quantizer: QuantizerSpec,
    amplitude: f64,
    lambda: f64,
    phase: f64,
    sigma_lsb: f64,
    samples: usize,
    seed: u64,
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = init_thread_pool() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(2);
    }
}

fn init_thread_pool() -> Result<()> {
    if let Ok(value) = std::env::var("QUANTEST_THREADS") {
        let threads: usize = value
            .parse()
            .map_err(|_| anyhow!("QUANTEST_THREADS must be a positive integer, got '{value}'"))?;
        if threads == 0 {
            bail!("QUANTEST_THREADS must be a positive integer, got '{value}'");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("building thread pool")?;
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen { config, out, seed } => cmd_gen(&config, &out, seed),
        Command::Estimate {
            record,
            levels,
            sigma,
            method,
            lambda,
            out,
        } => cmd_estimate(&record, &levels, sigma, method, lambda, out.as_deref()),
        Command::Sweep { config, out, seed } => {
            let config = load_experiment_config(&config, seed)?;
            let rows = experiments::run_bias_sweep(&config)?;
            experiments::emit_csv(&rows, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Crlb { config, out, seed } => {
            let config = load_experiment_config(&config, seed)?;
            let rows = experiments::run_variance_vs_crlb(&config)?;
            experiments::emit_csv(&rows, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Inl { levels, out } => cmd_inl(&levels, &out),
        Command::Figs {
            figure_id,
            out,
            seed,
        } => cmd_figs(&figure_id, &out, seed),
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_experiment_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut config: ExperimentConfig = load_json(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn cmd_gen(config_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let config: GenConfig = load_json(config_path)?;
    let model = config.quantizer.build()?;
    let params = SineParams::new(config.amplitude, config.lambda, config.phase);
    let sigma = config.sigma_lsb * model.step();
    let noise = NoiseModel::gaussian(sigma);
    let seed = seed.unwrap_or(config.seed);
    let record = generate_record(&params, &noise, &model, config.samples, seed);
    write_record_csv(&record, out)?;
    let meta = RecordMetadata {
        bits: model.bits(),
        step: model.step(),
        sigma,
        lambda: config.lambda,
        phase: config.phase,
        amplitude_nominal: Some(config.amplitude),
        transitions: model.transitions().to_vec(),
    };
    let meta_path = out.with_extension("json");
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)
        .with_context(|| format!("writing {}", meta_path.display()))?;
    println!("wrote {} and {}", out.display(), meta_path.display());
    Ok(())
}

fn model_from_levels(levels: &Path) -> Result<QuantizerModel> {
    // normalized full scale [-1, 1]: a b-bit converter has step 2 / 2^b
    let line_count = std::fs::read_to_string(levels)
        .with_context(|| format!("reading {}", levels.display()))?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .count();
    let step = 2.0 / (line_count + 1) as f64;
    Ok(QuantizerModel::from_levels_file(levels, step)?)
}

fn cmd_estimate(
    record_path: &Path,
    levels: &Path,
    sigma: f64,
    method: Method,
    lambda: Option<f64>,
    out: Option<&Path>,
) -> Result<()> {
    let record = read_record_csv(record_path)?;
    let model = model_from_levels(levels)?;
    if let Some(&c) = record.codes.iter().find(|&&c| c >= model.code_count()) {
        bail!(
            "record contains code {c} but the level file describes a {}-bit converter",
            model.bits()
        );
    }
    let noise = NoiseModel::gaussian(sigma);
    let report = match method {
        Method::Mvbe => {
            let counts = threshold_counts(&record, &model);
            let result = estimate(&counts, &model, &noise)?;
            serde_json::json!({ "method": "mvbe", "result": result })
        }
        Method::Mvbe0 => {
            let counts = threshold_counts(&record, &model);
            let result = estimate_noiseless(&counts, &model)?;
            serde_json::json!({ "method": "mvbe0", "result": result })
        }
        Method::Lse3 | Method::Lse4 | Method::Lse4mid => {
            let mode = if method == Method::Lse4mid {
                DecodeMode::Midpoint
            } else {
                DecodeMode::Nominal
            };
            let samples = quantest::decode(&record, &model, mode, 1.0);
            let lambda = lambda.unwrap_or_else(|| {
                let guess = spectral_peak_lambda(&samples);
                log::info!("no --lambda given; spectral peak at {guess}");
                guess
            });
            let result = if method == Method::Lse3 {
                fit3(&samples, lambda)?
            } else {
                fit4(&samples, lambda)?
            };
            let name = match method {
                Method::Lse3 => "lse3",
                Method::Lse4 => "lse4",
                _ => "lse4mid",
            };
            serde_json::json!({ "method": name, "result": result })
        }
    };
    let theta_hat = report["result"]
        .get("theta_hat")
        .or_else(|| report["result"].get("amplitude"))
        .and_then(|v| v.as_f64())
        .expect("every report carries an amplitude");
    println!("theta_hat = {theta_hat}");
    if let Some(out) = out {
        std::fs::write(out, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing {}", out.display()))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_inl(levels: &Path, out: &Path) -> Result<()> {
    let model = model_from_levels(levels)?;
    let profile = model.inl();
    let file = std::fs::File::create(out)
        .with_context(|| format!("creating {}", out.display()))?;
    profile
        .write_csv(std::io::BufWriter::new(file))
        .with_context(|| format!("writing {}", out.display()))?;
    println!(
        "wrote {} (max |INL| = {:.4} LSB)",
        out.display(),
        profile.max_abs()
    );
    Ok(())
}

fn cmd_figs(figure_id: &str, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let reseed = |mut c: ExperimentConfig| {
        if let Some(s) = seed {
            c.seed = s;
        }
        c
    };
    let sweep_to = |config: &ExperimentConfig, name: &str| -> Result<PathBuf> {
        let rows = experiments::run_bias_sweep(config)?;
        let path = out_dir.join(name);
        experiments::emit_csv(&rows, &path)?;
        Ok(path)
    };
    let mut written = Vec::new();
    match figure_id {
        "fig2" => {
            written.push(sweep_to(&reseed(figures::fig2_uniform()), "fig2_uniform.csv")?);
            written.push(sweep_to(
                &reseed(figures::fig2_nonuniform()),
                "fig2_nonuniform.csv",
            )?);
        }
        "fig3" => {
            let mut config: ApproxErrorConfig = figures::fig3();
            if let Some(s) = seed {
                config.seed = s;
            }
            let rows = experiments::approximation_error(&config);
            let path = out_dir.join("fig3_approx_error.csv");
            experiments::emit_csv(&rows, &path)?;
            written.push(path);
        }
        "fig4" => {
            let config = reseed(figures::fig4());
            let model = config.quantizer.build()?;
            let inl_path = out_dir.join("fig4_inl.csv");
            let file = std::fs::File::create(&inl_path)
                .with_context(|| format!("creating {}", inl_path.display()))?;
            model.inl().write_csv(std::io::BufWriter::new(file))?;
            written.push(inl_path);
            written.push(sweep_to(&config, "fig4_bias.csv")?);
        }
        "fig5" => {
            written.push(sweep_to(&reseed(figures::fig5()), "fig5_bias.csv")?);
        }
        "fig6" => {
            let config = reseed(figures::fig6());
            let rows = experiments::run_variance_vs_crlb(&config)?;
            let path = out_dir.join("fig6_variance.csv");
            experiments::emit_csv(&rows, &path)?;
            written.push(path);
        }
        other => bail!("unknown figure id '{other}'; valid ids: fig2, fig3, fig4, fig5, fig6"),
    }
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
