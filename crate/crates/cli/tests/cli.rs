//! End-to-end tests of the command-line interface through the real binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quantest"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_gen_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("gen.json");
    std::fs::write(
        &path,
        r#"{
            "quantizer": { "kind": "uniform", "bits": 8 },
            "amplitude": 0.7,
            "lambda": 0.723457,
            "phase": 0.3,
            "sigma_lsb": 0.2,
            "samples": 5000,
            "seed": 11
        }"#,
    )
    .unwrap();
    path
}

fn uniform_levels_file(dir: &Path, bits: u32) -> std::path::PathBuf {
    let l = 1usize << bits;
    let model = quantest::QuantizerModel::make_uniform(bits, 2.0 / l as f64).unwrap();
    let path = dir.join("levels.txt");
    model.write_levels_file(&path).unwrap();
    path
}

#[test]
fn gen_writes_record_and_sidecar_idempotently() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_gen_config(dir.path());
    let out = dir.path().join("rec.csv");
    let run1 = run(&[
        "gen",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run1.status.success(), "{}", String::from_utf8_lossy(&run1.stderr));
    let csv1 = std::fs::read(&out).unwrap();
    let meta1 = std::fs::read(dir.path().join("rec.json")).unwrap();
    assert_eq!(csv1.iter().filter(|&&b| b == b'\n').count(), 5001);

    let run2 = run(&[
        "gen",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run2.status.success());
    assert_eq!(std::fs::read(&out).unwrap(), csv1);
    assert_eq!(std::fs::read(dir.path().join("rec.json")).unwrap(), meta1);
}

#[test]
fn gen_then_estimate_matches_in_process_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_gen_config(dir.path());
    let out = dir.path().join("rec.csv");
    assert!(run(&[
        "gen",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
    .status
    .success());

    let levels = uniform_levels_file(dir.path(), 8);
    let model = quantest::QuantizerModel::make_uniform(8, 2.0 / 256.0).unwrap();
    let sigma = 0.2 * model.step();
    let report = dir.path().join("report.json");
    let output = run(&[
        "estimate",
        out.to_str().unwrap(),
        "--levels",
        levels.to_str().unwrap(),
        "--sigma",
        &sigma.to_string(),
        "--method",
        "mvbe",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    // replicate in process: same record file, same model
    let record = quantest::read_record_csv(&out).unwrap();
    let counts = quantest::threshold_counts(&record, &model);
    let expected = quantest::estimate(&counts, &model, &quantest::NoiseModel::gaussian(sigma))
        .unwrap()
        .theta_hat;
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let theta_hat = report["result"]["theta_hat"].as_f64().unwrap();
    assert_eq!(theta_hat, expected);
    assert!((theta_hat - 0.7).abs() < 0.01, "theta_hat {theta_hat}");
    assert!(report["result"]["usable_count"].as_u64().unwrap() > 0);
}

#[test]
fn estimate_fails_cleanly_on_constant_record() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("flat.csv");
    let mut text = String::from("n,code\n");
    for n in 0..100 {
        text.push_str(&format!("{n},7\n"));
    }
    std::fs::write(&rec, text).unwrap();
    let levels = uniform_levels_file(dir.path(), 4);
    let output = run(&[
        "estimate",
        rec.to_str().unwrap(),
        "--levels",
        levels.to_str().unwrap(),
        "--sigma",
        "0.01",
    ]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("no usable threshold"), "stderr: {stderr}");
}

#[test]
fn estimate_cites_line_number_on_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("bad.csv");
    std::fs::write(&rec, "n,code\n0,3\n1,zebra\n").unwrap();
    let levels = uniform_levels_file(dir.path(), 4);
    let output = run(&[
        "estimate",
        rec.to_str().unwrap(),
        "--levels",
        levels.to_str().unwrap(),
        "--sigma",
        "0.01",
    ]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line 3"), "stderr: {stderr}");
}

#[test]
fn sweep_subcommand_writes_expected_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    std::fs::write(
        &config,
        r#"{
            "quantizer": { "kind": "uniform", "bits": 6 },
            "theta_grid": [0.3, 0.6],
            "lambda": 0.723457,
            "phase": { "fixed": 0.1 },
            "sigma_lsb": 0.3,
            "samples_per_record": 500,
            "records": 5,
            "seed": 9,
            "estimators": ["lse3", "mvbe"]
        }"#,
    )
    .unwrap();
    let out = dir.path().join("sweep.csv");
    let output = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "theta_true,estimator,mean_estimate,bias,bias_over_delta,std_dev,records_used,failures"
    );
    assert_eq!(lines.count(), 4);
}

#[test]
fn figs_rejects_unknown_id_listing_valid_ones() {
    let output = run(&["figs", "fig9"]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("fig9"));
    for id in ["fig2", "fig3", "fig4", "fig5", "fig6"] {
        assert!(stderr.contains(id), "missing {id} in: {stderr}");
    }
}

#[test]
fn thread_env_var_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_gen_config(dir.path());
    let out = dir.path().join("rec.csv");
    let output = bin()
        .env("QUANTEST_THREADS", "zero")
        .args([
            "gen",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("QUANTEST_THREADS"));

    let output = bin()
        .env("QUANTEST_THREADS", "1")
        .args([
            "gen",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
}
