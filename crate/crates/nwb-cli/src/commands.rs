//! Subcommand bodies: each is a thin orchestration of one core module.

use std::path::Path;

use serde::Serialize;

use nwb_core::channel::{
    restrict_frame, sample_environment, sample_environments, synthesize_csi,
    synthesize_series_multi, FrequencyGrid, MotionProfile, MultipathEnvironment, PropagationPath,
};
use nwb_core::data::{read_dataset_auto, write_dataset, write_dataset_jsonl, DatasetRecord};
use nwb_core::metrics::{evaluate, write_eval_csv, write_eval_json, EvalReport};
use nwb_core::pipeline::{extrapolate, load_model};
use nwb_core::rng::mix3;
use nwb_core::sensing::{estimate_breathing, estimate_tof};
use nwb_core::train::run_training;
use nwb_core::{NwbError, Result};

use crate::config::{MotionSection, RunConfig, SimulationSection};
use crate::plots;

/// Per-record extrapolation seed; `extrapolate` and `eval` share it so the
/// standalone eCSI dataset scores identically to the in-process evaluation.
fn record_seed(seed: u64, index: usize) -> u64 {
    mix3(seed, 0x6543_5349, index as u64)
}

/// `.jsonl` extension selects the text format, anything else the binary one.
fn write_records(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        write_dataset_jsonl(path, records)
    } else {
        write_dataset(path, records)
    }
}

fn simulation_grid(sim: &SimulationSection, subcarriers: Option<usize>) -> Result<FrequencyGrid> {
    FrequencyGrid::new(
        sim.center_freq_hz,
        sim.spacing_hz,
        subcarriers.unwrap_or(sim.subcarriers),
    )
}

fn scene_environment(sim: &SimulationSection, motion: &MotionSection) -> Result<MultipathEnvironment> {
    if motion.paths.is_empty() {
        return sample_environment(&sim.environment, sim.seed);
    }
    let paths = motion
        .paths
        .iter()
        .map(|p| PropagationPath::new(p.gain, p.phase, p.delay_ns * 1e-9, p.aoa))
        .collect::<Result<Vec<_>>>()?;
    MultipathEnvironment::new(paths, "scene")
}

pub fn simulate(
    cfg: &RunConfig,
    out: &Path,
    count: Option<usize>,
    subcarriers: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    let mut sim = cfg.simulation.clone();
    if let Some(s) = seed {
        sim.seed = s;
    }
    let grid = simulation_grid(&sim, subcarriers)?;
    let records = match &sim.motion {
        Some(motion) => {
            let env = scene_environment(&sim, motion)?;
            let motions = motion
                .subjects
                .iter()
                .map(|s| MotionProfile::new(s.path, s.amplitude_ns * 1e-9, s.rate_hz, s.phase))
                .collect::<Result<Vec<_>>>()?;
            let frames = synthesize_series_multi(
                &env,
                &motions,
                &grid,
                sim.antenna,
                motion.sample_rate_hz,
                motion.duration_s,
            )?;
            frames
                .into_iter()
                .map(|f| DatasetRecord::new(f, env.label.clone()))
                .collect::<Vec<_>>()
        }
        None => {
            let envs = sample_environments(&sim.environment, count.unwrap_or(sim.count), sim.seed)?;
            envs.iter()
                .map(|env| {
                    Ok(DatasetRecord::new(
                        synthesize_csi(env, &grid, sim.antenna)?,
                        env.label.clone(),
                    ))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    write_records(out, &records)?;
    println!(
        "wrote {} frames ({} subcarriers, {:.1} MHz) -> {}",
        records.len(),
        grid.num_subcarriers,
        grid.bandwidth() / 1e6,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn make_dataset(
    cfg: &RunConfig,
    input: &Path,
    train_out: &Path,
    eval_truth_out: Option<&Path>,
    eval_input_out: Option<&Path>,
    split: Option<f64>,
    narrow: Option<usize>,
) -> Result<()> {
    let records = read_dataset_auto(input)?;
    let split = split.unwrap_or(cfg.data.split);
    if !(0.0..=1.0).contains(&split) {
        return Err(NwbError::InvalidParameter(format!(
            "split must be within [0, 1], got {split}"
        )));
    }
    let wants_eval = eval_truth_out.is_some() || eval_input_out.is_some();
    let mut n_train = ((records.len() as f64) * split).round() as usize;
    n_train = n_train.clamp(1, records.len());
    if wants_eval {
        n_train = n_train.min(records.len() - 1);
    }
    let (train, eval) = records.split_at(n_train);
    write_records(train_out, train)?;
    println!("wrote {} training frames -> {}", train.len(), train_out.display());
    if let Some(path) = eval_truth_out {
        write_records(path, eval)?;
        println!("wrote {} truth frames -> {}", eval.len(), path.display());
    }
    if let Some(path) = eval_input_out {
        let narrow = narrow.unwrap_or(cfg.data.narrow_subcarriers);
        let inputs = eval
            .iter()
            .map(|r| {
                Ok(DatasetRecord::new(
                    restrict_frame(&r.frame, narrow)?,
                    r.env_label.clone(),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        write_records(path, &inputs)?;
        println!(
            "wrote {} narrowband inputs ({narrow} subcarriers) -> {}",
            inputs.len(),
            path.display()
        );
    }
    Ok(())
}

pub fn train(
    cfg: &RunConfig,
    data: &Path,
    out: &Path,
    steps: Option<usize>,
    epochs: Option<usize>,
    seed: Option<u64>,
    plots: Option<&Path>,
) -> Result<()> {
    let records = read_dataset_auto(data)?;
    let mut setup = cfg.train_setup();
    if let Some(s) = steps {
        setup.train.total_steps = s;
    }
    if let Some(e) = epochs {
        setup.train.epochs = e;
    }
    if let Some(s) = seed {
        setup.train.seed = s;
    }
    let report = run_training(&records, &setup, out)?;
    let tail = report.losses.len().saturating_sub(50);
    let tail_mean: f64 =
        report.losses[tail..].iter().sum::<f64>() / report.losses[tail..].len().max(1) as f64;
    println!(
        "trained steps {}..{} on {} frames in {:.1} s; mean loss over last {} steps {:.4}; \
         checkpoint -> {}",
        report.start_step,
        report.start_step + report.losses.len(),
        records.len(),
        report.wall_clock_s,
        report.losses.len().min(50),
        tail_mean,
        report.final_checkpoint.display()
    );
    if let Some(dir) = plots {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("loss.png");
        plots::line_chart(&path, &[(&report.losses, [200, 60, 40])])?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn extrapolate_dataset(
    cfg: &RunConfig,
    input: &Path,
    k: usize,
    checkpoint: &Path,
    seed: Option<u64>,
    out: &Path,
    clamp: bool,
) -> Result<()> {
    let model = load_model(checkpoint)?;
    let records = read_dataset_auto(input)?;
    let seed = seed.unwrap_or(cfg.evaluation.seed);
    let clamp = clamp || cfg.evaluation.clamp_input_band;
    let mut residuals = Vec::with_capacity(records.len());
    let ecsi = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let e = extrapolate(&model, &r.frame, k, record_seed(seed, i), clamp)?;
            residuals.push(e.input_residual);
            Ok(DatasetRecord::new(e.ecsi, r.env_label.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    write_records(out, &ecsi)?;
    let mean_residual = residuals.iter().sum::<f64>() / residuals.len().max(1) as f64;
    println!(
        "extrapolated {} frames k={k} (mean input-band residual {:.4}) -> {}",
        ecsi.len(),
        mean_residual,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn eval(
    cfg: &RunConfig,
    input: &Path,
    truth: &Path,
    checkpoint: &Path,
    ks: &[usize],
    seed: Option<u64>,
    out_csv: Option<&Path>,
    out_json: Option<&Path>,
    plots: Option<&Path>,
    clamp: bool,
) -> Result<()> {
    let model = load_model(checkpoint)?;
    let narrow = read_dataset_auto(input)?;
    let truth = read_dataset_auto(truth)?;
    let ks: Vec<usize> = if ks.is_empty() { cfg.evaluation.ks.clone() } else { ks.to_vec() };
    let seed = seed.unwrap_or(cfg.evaluation.seed);
    let clamp = clamp || cfg.evaluation.clamp_input_band;
    let report = evaluate(&narrow, &truth, &ks, |i, frame, k| {
        Ok(extrapolate(&model, frame, k, record_seed(seed, i), clamp)?.ecsi)
    })?;
    for row in &report.rows {
        println!(
            "k={} {:>13}: median {:.4} (p10 {:.4}, p90 {:.4})",
            row.k, row.metric, row.median, row.p10, row.p90
        );
    }
    if let Some(path) = out_csv {
        write_eval_csv(&report, path)?;
        println!("wrote {}", path.display());
    }
    if let Some(path) = out_json {
        write_eval_json(&report, path)?;
        println!("wrote {}", path.display());
    }
    if out_csv.is_none() && out_json.is_none() {
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    if let Some(dir) = plots {
        std::fs::create_dir_all(dir)?;
        write_eval_plots(&report, &ks, dir)?;
    }
    Ok(())
}

/// Median-vs-k curves, one image per metric.
fn write_eval_plots(report: &EvalReport, ks: &[usize], dir: &Path) -> Result<()> {
    for metric in ["mse", "acc_cir"] {
        let series: Vec<f64> = ks
            .iter()
            .filter_map(|k| {
                report
                    .rows
                    .iter()
                    .find(|r| r.k == *k && r.metric == metric)
                    .map(|r| r.median)
            })
            .collect();
        let baseline: Vec<f64> = ks
            .iter()
            .filter_map(|k| {
                report
                    .rows
                    .iter()
                    .find(|r| r.k == *k && r.metric == format!("{metric}_noise"))
                    .map(|r| r.median)
            })
            .collect();
        let path = dir.join(format!("{metric}.png"));
        plots::line_chart(&path, &[(&series, [200, 60, 40]), (&baseline, [120, 120, 120])])?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct TofRow<'a> {
    index: usize,
    env_label: &'a str,
    tof_s: f64,
    peak_tap: usize,
    peak_magnitude: f64,
}

pub fn tof(cfg: &RunConfig, input: &Path, ratio: Option<f64>, out: Option<&Path>) -> Result<()> {
    let records = read_dataset_auto(input)?;
    let ratio = ratio.unwrap_or(cfg.sensing.dominance_ratio);
    let rows = records
        .iter()
        .enumerate()
        .map(|(index, r)| {
            let est = estimate_tof(&r.frame, ratio)?;
            Ok(TofRow {
                index,
                env_label: &r.env_label,
                tof_s: est.tof,
                peak_tap: est.peak_tap,
                peak_magnitude: est.peak_magnitude,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let text = serde_json::to_string_pretty(&rows)?;
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            println!("wrote {} estimates -> {}", rows.len(), path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

pub fn breath(cfg: &RunConfig, input: &Path, out: Option<&Path>, plots: Option<&Path>) -> Result<()> {
    let records = read_dataset_auto(input)?;
    let frames: Vec<_> = records.into_iter().map(|r| r.frame).collect();
    let est = estimate_breathing(&frames, &cfg.sensing)?;
    for p in &est.paths {
        let detected = p.detected.iter().filter(|d| **d).count();
        let mut bpm = p.bpm.clone();
        bpm.sort_by(|a, b| a.total_cmp(b));
        println!(
            "path at {:.1} ns: median {:.1} bpm, breathing in {detected}/{} windows",
            p.delay_s * 1e9,
            bpm[bpm.len() / 2],
            p.detected.len()
        );
    }
    let text = serde_json::to_string_pretty(&est)?;
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            println!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    if let Some(dir) = plots {
        std::fs::create_dir_all(dir)?;
        for p in &est.paths {
            let path = dir.join(format!("spectrogram-tap{:04}.png", p.tap));
            plots::heatmap(&path, &p.spectrogram, 6)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
