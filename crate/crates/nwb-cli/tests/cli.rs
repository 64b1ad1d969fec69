//! Process-level tests: every subcommand is driven through the real binary
//! with a tiny run configuration, checking artifacts, determinism, and the
//! JSON error contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nwb"))
}

fn run_ok(args: &[&str], dir: &Path) -> String {
    let out = bin().args(args).current_dir(dir).output().expect("spawn nwb");
    assert!(
        out.status.success(),
        "nwb {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

fn run_err(args: &[&str], dir: &Path) -> Output {
    let out = bin().args(args).current_dir(dir).output().expect("spawn nwb");
    assert!(!out.status.success(), "nwb {args:?} unexpectedly succeeded");
    out
}

fn sha256_file(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).expect("read file")).to_vec()
}

/// One hash over a directory's sorted file names and contents.
fn sha256_dir(dir: &Path) -> Vec<u8> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
        .expect("read dir")
        .map(|e| e.expect("dir entry").path())
        .collect();
    names.sort();
    let mut h = Sha256::new();
    for p in names {
        if p.is_dir() {
            h.update(sha256_dir(&p));
        } else {
            h.update(p.file_name().expect("file name").as_encoded_bytes());
            h.update(std::fs::read(&p).expect("read file"));
        }
    }
    h.finalize().to_vec()
}

/// Small everything: 12 two-path frames of 32 subcarriers, a patch-2 model
/// on a 4x8 lattice, six training steps.
const TINY_CONFIG: &str = r#"
[simulation]
count = 12
subcarriers = 32
seed = 11

[simulation.environment]
path_count = [2, 2]

[data]
split = 0.75
narrow_subcarriers = 16

[model]
model_dim = 16
num_blocks = 2
num_heads = 2
embed_dim = 8
timestep_embed_dim = 8
patch = 2
lattice_rows = 4
lattice_cols = 8

[training]
epochs = 3
total_steps = 6
batch_size = 2
subband_augment = 2
learning_rate = 1e-3
warmup_epochs = 1
seed = 7

[evaluation]
ks = [2]
seed = 9
"#;

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, TINY_CONFIG).unwrap();
    path
}

#[test]
fn pipeline_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_config(dir);

    run_ok(&["--config", "run.toml", "simulate", "--out", "frames.nwbd"], dir);
    run_ok(
        &[
            "--config",
            "run.toml",
            "make-dataset",
            "--input",
            "frames.nwbd",
            "--train-out",
            "train.nwbd",
            "--eval-truth-out",
            "truth.nwbd",
            "--eval-input-out",
            "narrow.nwbd",
        ],
        dir,
    );
    let train_log = run_ok(
        &["--config", "run.toml", "train", "--data", "train.nwbd", "--out", "ck", "--plots", "plots"],
        dir,
    );
    assert!(train_log.contains("trained steps 0..6"), "log: {train_log}");
    assert!(dir.join("plots/loss.png").is_file());
    assert!(dir.join("ck/report.json").is_file());

    run_ok(
        &[
            "--config",
            "run.toml",
            "extrapolate",
            "--input",
            "narrow.nwbd",
            "--k",
            "2",
            "--checkpoint",
            "ck",
            "--out",
            "ecsi.nwbd",
        ],
        dir,
    );
    let eval_log = run_ok(
        &[
            "--config",
            "run.toml",
            "eval",
            "--input",
            "narrow.nwbd",
            "--truth",
            "truth.nwbd",
            "--checkpoint",
            "ck",
            "--out-csv",
            "eval.csv",
            "--out-json",
            "eval.json",
            "--plots",
            "plots",
        ],
        dir,
    );
    assert!(eval_log.contains("k=2"), "log: {eval_log}");
    let csv = std::fs::read_to_string(dir.join("eval.csv")).unwrap();
    assert!(csv.starts_with("k,metric,median,p10,p90\n"), "csv: {csv}");
    assert!(csv.lines().count() > 1);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("eval.json")).unwrap()).unwrap();
    assert!(json["rows"].as_array().is_some_and(|r| !r.is_empty()));
    assert!(dir.join("plots/mse.png").is_file());
    assert!(dir.join("plots/acc_cir.png").is_file());

    let tof_log = run_ok(&["tof", "--input", "ecsi.nwbd", "--out", "tof.json"], dir);
    assert!(tof_log.contains("wrote 3 estimates"), "log: {tof_log}");
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("tof.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert!(row["tof_s"].as_f64().unwrap() >= 0.0);
        assert!(row["env_label"].as_str().is_some());
    }
}

#[test]
fn simulate_train_extrapolate_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_config(dir);

    run_ok(&["--config", "run.toml", "simulate", "--out", "a.nwbd"], dir);
    run_ok(&["--config", "run.toml", "simulate", "--out", "b.nwbd"], dir);
    assert_eq!(sha256_file(&dir.join("a.nwbd")), sha256_file(&dir.join("b.nwbd")));

    run_ok(&["--config", "run.toml", "train", "--data", "a.nwbd", "--out", "ck1"], dir);
    run_ok(&["--config", "run.toml", "train", "--data", "a.nwbd", "--out", "ck2"], dir);
    let final1 = dir.join("ck1/epoch-0003");
    let final2 = dir.join("ck2/epoch-0003");
    assert!(final1.is_dir() && final2.is_dir());
    assert_eq!(sha256_dir(&final1), sha256_dir(&final2));

    run_ok(
        &["--config", "run.toml", "make-dataset", "--input", "a.nwbd", "--train-out", "tr.nwbd",
          "--eval-input-out", "na.nwbd"],
        dir,
    );
    for out in ["e1.nwbd", "e2.nwbd"] {
        run_ok(
            &["--config", "run.toml", "extrapolate", "--input", "na.nwbd", "--k", "2",
              "--checkpoint", "ck1", "--out", out],
            dir,
        );
    }
    assert_eq!(sha256_file(&dir.join("e1.nwbd")), sha256_file(&dir.join("e2.nwbd")));
}

#[test]
fn jsonl_extension_selects_the_text_format() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_config(dir);
    run_ok(&["--config", "run.toml", "simulate", "--out", "frames.jsonl", "--count", "3"], dir);
    let text = std::fs::read_to_string(dir.join("frames.jsonl")).unwrap();
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["format"], "nwbd-jsonl");
    assert_eq!(header["records"], 3);
    // and the binary reader path accepts it transparently
    run_ok(&["tof", "--input", "frames.jsonl"], dir);
}

#[test]
fn unknown_config_key_is_a_schema_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("bad.toml"), "[training]\nlerning_rate = 0.1\n").unwrap();
    let out = run_err(&["--config", "bad.toml", "simulate", "--out", "x.nwbd"], dir);
    let err: serde_json::Value =
        serde_json::from_slice(&out.stderr).expect("stderr carries one JSON object");
    assert_eq!(err["error"]["kind"], "schema_violation");
    assert!(
        err["error"]["message"].as_str().unwrap().contains("lerning_rate"),
        "message should name the bad key: {err}"
    );
}

#[test]
fn missing_checkpoint_is_a_json_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_config(dir);
    run_ok(&["--config", "run.toml", "simulate", "--out", "f.nwbd", "--count", "2"], dir);
    let out = run_err(
        &["--config", "run.toml", "extrapolate", "--input", "f.nwbd", "--k", "2",
          "--checkpoint", "nowhere", "--out", "e.nwbd"],
        dir,
    );
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "incompatible_checkpoint");
    assert!(err["error"]["message"].as_str().is_some());
}

/// Motion config: two fixed paths, one breathing subject at 15 breaths per
/// minute, wideband sampling that resolves both taps.
const BREATH_CONFIG: &str = r#"
[simulation]
subcarriers = 512
center_freq_hz = 5.5e9
spacing_hz = 312.5e3

[simulation.motion]
sample_rate_hz = 100.0
duration_s = 12.0
paths = [
  { gain = 1.0, delay_ns = 30.0 },
  { gain = 0.8, phase = 1.1, delay_ns = 120.0 },
]
subjects = [{ path = 1, amplitude_ns = 0.04, rate_hz = 0.25 }]

[sensing]
window_s = 8.0
hop_s = 2.0
"#;

#[test]
fn breathing_series_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("scene.toml"), BREATH_CONFIG).unwrap();
    let log = run_ok(&["--config", "scene.toml", "simulate", "--out", "series.nwbd"], dir);
    assert!(log.contains("wrote 1200 frames"), "log: {log}");
    let breath_log = run_ok(
        &["--config", "scene.toml", "breath", "--input", "series.nwbd", "--out", "breath.json",
          "--plots", "plots"],
        dir,
    );
    assert!(breath_log.contains("path at"), "log: {breath_log}");
    let est: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("breath.json")).unwrap()).unwrap();
    let paths = est["paths"].as_array().unwrap();
    assert_eq!(paths.len(), 1, "one moving subject path: {est}");
    let bpm = paths[0]["bpm"].as_array().unwrap();
    let detected = paths[0]["detected"].as_array().unwrap();
    assert!(!bpm.is_empty());
    for (b, d) in bpm.iter().zip(detected) {
        assert!(d.as_bool().unwrap(), "window not flagged as breathing: {est}");
        assert!((b.as_f64().unwrap() - 15.0).abs() <= 1.0, "bpm {b} not near 15");
    }
    let tap = paths[0]["tap"].as_u64().unwrap();
    let spect = dir.join(format!("plots/spectrogram-tap{tap:04}.png"));
    assert!(spect.is_file(), "missing {}", spect.display());
}
