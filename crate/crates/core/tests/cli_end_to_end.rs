//! End-to-end CLI runs: datagen -> train -> evaluate, twice with the same
//! seeds, must produce bytewise-identical metric CSVs; spectrum/plot/info
//! commands round-trip their artifacts; error paths exit with code 1.

use std::fs;
use std::path::Path;

use downscale_bench::cli::run;

fn write_config(dir: &Path) -> std::path::PathBuf {
    let cfg = serde_json::json!({
        "seed": 11,
        "datagen": {
            "h": 16, "w": 16, "c": 1,
            "alpha": 2.0, "k_min": 1, "k_max": 4,
            "amplitude_std": 1.0, "dx_km": 25.0,
            "n_train": 6, "n_val": 2, "n_test": 2,
            "factors": [2],
            "seed": 11
        },
        "model": {
            "family": "srcnn",
            "in_channels": 1,
            "train_factor": 2
        },
        "train": {
            "lr": 1e-3,
            "batch_size": 4,
            "epochs": 2,
            "loss": "mse",
            "seed": 11,
            "hr_patch": 0,
            "patches_per_snapshot": 1
        }
    });
    let path = dir.join("run.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn run_once(root: &Path, tag: &str) -> Vec<u8> {
    let data_dir = root.join(format!("data_{tag}"));
    let train_dir = root.join(format!("train_{tag}"));
    let eval_dir = root.join(format!("eval_{tag}"));
    let cfg = write_config(root);
    let code = run([
        "downscale-bench",
        "datagen",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        data_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "datagen failed");
    let manifest = data_dir.join("manifest_f2.json");
    assert!(manifest.exists());
    let code = run([
        "downscale-bench",
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        manifest.to_str().unwrap(),
        "--out",
        train_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "train failed");
    let ckpt = train_dir.join("checkpoint.ckpt");
    assert!(ckpt.exists());
    let code = run([
        "downscale-bench",
        "evaluate",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--data",
        manifest.to_str().unwrap(),
        "--eval-factor",
        "2",
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "evaluate failed");
    fs::read(eval_dir.join("metrics.csv")).unwrap()
}

#[test]
fn replayed_pipeline_is_bytewise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_once(dir.path(), "a");
    let b = run_once(dir.path(), "b");
    assert_eq!(a, b, "metric CSVs must match bytewise across replays");
}

#[test]
fn spectrum_and_plot_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let data_dir = dir.path().join("data");
    assert_eq!(
        run([
            "downscale-bench",
            "datagen",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            data_dir.to_str().unwrap(),
        ]),
        0
    );
    let spec_dir = dir.path().join("spectrum");
    assert_eq!(
        run([
            "downscale-bench",
            "spectrum",
            "--data",
            data_dir.join("manifest_f2.json").to_str().unwrap(),
            "--split",
            "test",
            "--out",
            spec_dir.to_str().unwrap(),
        ]),
        0
    );
    let csv = spec_dir.join("spectrum_test_mean.csv");
    assert!(csv.exists());
    let plot_dir = dir.path().join("plots");
    assert_eq!(
        run([
            "downscale-bench",
            "plot",
            "--curves",
            csv.to_str().unwrap(),
            "--out",
            plot_dir.to_str().unwrap(),
        ]),
        0
    );
    assert!(plot_dir.join("spectra.png").exists());
}

#[test]
fn evaluate_bicubic_without_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let data_dir = dir.path().join("data");
    assert_eq!(
        run([
            "downscale-bench",
            "datagen",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            data_dir.to_str().unwrap(),
        ]),
        0
    );
    let eval_dir = dir.path().join("eval");
    assert_eq!(
        run([
            "downscale-bench",
            "evaluate",
            "--model",
            "bicubic",
            "--data",
            data_dir.join("manifest_f2.json").to_str().unwrap(),
            "--eval-factor",
            "2",
            "--out",
            eval_dir.to_str().unwrap(),
        ]),
        0
    );
    assert!(eval_dir.join("metrics.csv").exists());
}

#[test]
fn unknown_command_and_bad_input_exit_codes() {
    assert_eq!(run(["downscale-bench", "frobnicate"]), 1);
    // Missing required inputs are validation errors -> exit 1.
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run([
            "downscale-bench",
            "evaluate",
            "--data",
            dir.path().join("nope.json").to_str().unwrap(),
            "--eval-factor",
            "2",
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ]),
        1
    );
    assert_eq!(
        run([
            "downscale-bench",
            "info",
            "--model",
            "not_a_family",
        ]),
        1
    );
}

#[test]
fn info_prints_param_count() {
    assert_eq!(run(["downscale-bench", "info", "--model", "srcnn"]), 0);
}
