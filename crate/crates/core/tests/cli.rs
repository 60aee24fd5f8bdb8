//! End-to-end runs of the `bdr` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bdr_core::rng::SplitMix64;

fn bdr(args: &[&str], data_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bdr"));
    cmd.args(args).env_remove("BDR_DATA_DIR");
    if let Some(d) = data_dir {
        cmd.env("BDR_DATA_DIR", d);
    }
    cmd.output().unwrap()
}

/// IDX files with 3×3 images: ones light the middle column, sevens the top
/// row, plus uniform noise; a few other digits mixed in.
fn write_fake_mnist(dir: &Path) {
    let mut g = SplitMix64::new(99);
    for (prefix, count) in [("train", 90usize), ("t10k", 30)] {
        let mut img = Vec::new();
        img.extend_from_slice(&0x0000_0803u32.to_be_bytes());
        img.extend_from_slice(&(count as u32).to_be_bytes());
        img.extend_from_slice(&3u32.to_be_bytes());
        img.extend_from_slice(&3u32.to_be_bytes());
        let mut lab = Vec::new();
        lab.extend_from_slice(&0x0000_0801u32.to_be_bytes());
        lab.extend_from_slice(&(count as u32).to_be_bytes());
        for k in 0..count {
            let digit = [1u8, 7, 1, 7, 3][k % 5];
            for p in 0..9 {
                let on = match digit {
                    1 => p % 3 == 1,
                    7 => p < 3,
                    _ => p % 2 == 0,
                };
                let base = if on { 180.0 } else { 0.0 };
                img.push((base + g.uniform(0.0, 75.0)) as u8);
            }
            lab.push(digit);
        }
        fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), img).unwrap();
        fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), lab).unwrap();
    }
}

#[test]
fn verify_exit_codes() {
    let ok = bdr(&["verify", "mixture", "--cases", "20", "--seed", "3"], None);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let report: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(report["cases"], 20);
    assert_eq!(report["failures"], 0);

    let strict = bdr(&["verify", "duality", "--cases", "30", "--tol", "1e-300"], None);
    assert_eq!(strict.status.code(), Some(1));
    assert_eq!(bdr(&["verify", "nonsense"], None).status.code(), Some(2));
    assert_eq!(bdr(&["frobnicate"], None).status.code(), Some(2));
}

#[test]
fn missing_data_and_bad_config() {
    let empty = tempfile::tempdir().unwrap();
    let out = bdr(&["experiment", "--out", empty.path().to_str().unwrap()], Some(empty.path()));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("BDR_DATA_DIR"));

    let cfg = empty.path().join("bad.json");
    fs::write(&cfg, r#"{"trails": 2}"#).unwrap();
    let out = bdr(&["experiment", "--config", cfg.to_str().unwrap()], Some(empty.path()));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn experiment_is_deterministic_with_expected_rows() {
    let work = tempfile::tempdir().unwrap();
    let data = work.path().join("mnist");
    fs::create_dir(&data).unwrap();
    write_fake_mnist(&data);
    let cfg = work.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"per_class": 12, "test_per_class": 4, "trials": 3, "epsilons": [0.01, 0.1],
            "bdr_epsilons": [0.05], "betas": [0.3, 0.6], "kappas": [0.25, 1.0], "record_wallclock": false}"#,
    )
    .unwrap();
    let mut csvs = Vec::new();
    for run in 0..2 {
        let out_dir = work.path().join(format!("out{run}"));
        let jobs = if run == 0 { "1" } else { "2" };
        let args = ["experiment", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--jobs", jobs];
        let o = bdr(&args, Some(&data));
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        csvs.push(fs::read(out_dir.join("experiment.csv")).unwrap());
        let summary: serde_json::Value =
            serde_json::from_slice(&fs::read(out_dir.join("experiment_summary.json")).unwrap()).unwrap();
        assert_eq!(summary["data_digest"].as_str().unwrap().len(), 64);
    }
    assert_eq!(csvs[0], csvs[1]);
    let mut rdr = csv::Reader::from_reader(csvs[0].as_slice());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    // per trial and κ: one SAA, two DRO and two BDR solves
    assert_eq!(rows.len(), 3 * 2 * (1 + 2 + 2));
}

#[test]
fn stats_bias_writes_outputs() {
    let work = tempfile::tempdir().unwrap();
    let cfg = work.path().join("cfg.json");
    fs::write(&cfg, r#"{"stats": {"problem": "two_atom", "n": 5, "reps": 40, "beta": 0.0, "epsilon": 0.1}}"#).unwrap();
    let args = ["stats", "bias", "--config", cfg.to_str().unwrap(), "--out", work.path().to_str().unwrap()];
    let o = bdr(&args, None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv::Reader::from_path(work.path().join("stats_bias.csv")).unwrap().records().count();
    assert_eq!(rows, 40);
    assert!(work.path().join("stats_bias.json").exists());
}
