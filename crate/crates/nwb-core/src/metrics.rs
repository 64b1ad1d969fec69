//! Channel-quality metrics: the CFR→CIR transform, frame MSE, impulse-response
//! correlation (AccCIR), and the per-k evaluation harness with CSV/JSON output.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::channel::{CsiFrame, FrequencyGrid};
use crate::data::{normalize, slice_frame, DatasetRecord, SubbandSelection};
use crate::error::{NwbError, Result};
use crate::rng::{mix3, stream};

/// Zero-padding used whenever a metric or sensing algorithm needs a CIR.
pub const CIR_ZERO_PAD: usize = 4;

/// Channel impulse response of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CirProfile {
    /// `zero_pad_factor * num_subcarriers` complex taps.
    pub taps: Vec<Complex64>,
    /// Seconds per unpadded tap (1 / bandwidth).
    pub tap_spacing: f64,
    pub zero_pad_factor: usize,
}

impl CirProfile {
    pub fn num_subcarriers(&self) -> usize {
        self.taps.len() / self.zero_pad_factor
    }

    /// Delay represented by tap `q`, in seconds.
    pub fn delay_of(&self, q: usize) -> f64 {
        q as f64 * self.tap_spacing / self.zero_pad_factor as f64
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.taps.iter().map(|t| t.norm()).collect()
    }
}

/// Unitary inverse DFT of the subcarrier sequence (ascending frequency),
/// zero-padded in frequency by `zero_pad_factor` for finer tap granularity.
pub fn cfr_to_cir(frame: &CsiFrame, zero_pad_factor: usize) -> Result<CirProfile> {
    if frame.is_empty() {
        return Err(NwbError::InvalidParameter("empty frame has no CIR".into()));
    }
    if zero_pad_factor == 0 {
        return Err(NwbError::InvalidParameter("zero_pad_factor must be >= 1".into()));
    }
    let n = frame.len();
    let len = n * zero_pad_factor;
    let mut buf = frame.values.clone();
    buf.resize(len, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
    let scale = 1.0 / (len as f64).sqrt();
    for v in &mut buf {
        *v *= scale;
    }
    Ok(CirProfile {
        taps: buf,
        tap_spacing: 1.0 / (n as f64 * frame.grid.subcarrier_spacing),
        zero_pad_factor,
    })
}

/// Unitary forward DFT back to the frequency domain; returns the first
/// `num_subcarriers` bins, which reproduce the original frame values.
pub fn cir_to_cfr(profile: &CirProfile) -> Vec<Complex64> {
    let mut buf = profile.taps.clone();
    let len = buf.len();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let scale = 1.0 / (len as f64).sqrt();
    buf.truncate(profile.num_subcarriers());
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

fn check_same_grid(a: &CsiFrame, b: &CsiFrame) -> Result<()> {
    let ga = a.grid;
    let gb = b.grid;
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0);
    if ga.num_subcarriers != gb.num_subcarriers
        || !close(ga.center_freq, gb.center_freq)
        || !close(ga.subcarrier_spacing, gb.subcarrier_spacing)
    {
        return Err(NwbError::GridMismatch(format!(
            "frames on different grids: ({}, {}, {}) vs ({}, {}, {})",
            ga.center_freq,
            ga.subcarrier_spacing,
            ga.num_subcarriers,
            gb.center_freq,
            gb.subcarrier_spacing,
            gb.num_subcarriers
        )));
    }
    Ok(())
}

/// Mean over subcarriers of |a−b|²/2: the mean squared error over real and
/// imaginary components jointly.
pub fn mse(a: &CsiFrame, b: &CsiFrame) -> Result<f64> {
    check_same_grid(a, b)?;
    let sum: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    Ok(sum / (2.0 * a.len() as f64))
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(NwbError::ZeroVariance);
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Pearson correlation between the |CIR| profiles of the two frames
/// (zero-padded by [`CIR_ZERO_PAD`]).
pub fn acc_cir(ecsi: &CsiFrame, truth: &CsiFrame) -> Result<f64> {
    check_same_grid(ecsi, truth)?;
    let pa = cfr_to_cir(ecsi, CIR_ZERO_PAD)?.magnitudes();
    let pb = cfr_to_cir(truth, CIR_ZERO_PAD)?.magnitudes();
    pearson(&pa, &pb)
}

/// Sub-band of `frame` that coincides with `target` (same spacing,
/// integer-aligned, fully contained).
pub fn restrict_to_grid(frame: &CsiFrame, target: &FrequencyGrid) -> Result<CsiFrame> {
    let s = frame.grid.subcarrier_spacing;
    if (target.subcarrier_spacing - s).abs() > 1e-9 * s {
        return Err(NwbError::GridMismatch(format!(
            "target spacing {} differs from frame spacing {s}",
            target.subcarrier_spacing
        )));
    }
    let off_f = (target.frequency(0) - frame.grid.frequency(0)) / s;
    let off = off_f.round();
    if (off_f - off).abs() > 1e-6 {
        return Err(NwbError::GridMismatch(format!(
            "target band starts {off_f} subcarriers into the frame: not integer-aligned"
        )));
    }
    if off < 0.0 || off as usize + target.num_subcarriers > frame.len() {
        return Err(NwbError::GridMismatch(format!(
            "target band [{off}, +{}) not contained in the frame",
            target.num_subcarriers
        )));
    }
    slice_frame(
        frame,
        &SubbandSelection { start_subcarrier: off as usize, length: target.num_subcarriers },
    )
}

/// Standard-complex-normal frame on `grid`: the floor any learned
/// extrapolation must beat.
pub fn noise_frame(grid: &FrequencyGrid, seed: u64) -> Result<CsiFrame> {
    let mut rng = stream(mix3(seed, 0x4e4f_4953, grid.num_subcarriers as u64));
    let values: Vec<Complex64> = (0..grid.num_subcarriers)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    CsiFrame::new(*grid, 0, values, 0.0)
}

// ── evaluation harness ──────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub k: usize,
    pub metric: String,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
}

/// Per-(k, metric) sorted sample values; entry i has cumulative probability
/// (i+1)/len.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSamples {
    pub k: usize,
    pub metric: String,
    pub sorted_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<MetricRow>,
    pub cdf: Vec<MetricSamples>,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let rank = q * (m - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let w = rank - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Evaluate an extrapolation model over paired narrow/wide datasets.
///
/// `truth[i]` must cover every model output grid for `narrow[i]` (synthesize
/// it at the largest k of interest); the ground truth for smaller k is its
/// grid-aligned restriction. `model(i, frame, k)` returns the eCSI frame.
/// Both metrics run on max-magnitude-normalized frames, and a seeded
/// standard-normal noise frame provides `*_noise` baseline rows.
pub fn evaluate(
    narrow: &[DatasetRecord],
    truth: &[DatasetRecord],
    ks: &[usize],
    mut model: impl FnMut(usize, &CsiFrame, usize) -> Result<CsiFrame>,
) -> Result<EvalReport> {
    if narrow.is_empty() || ks.is_empty() {
        return Err(NwbError::EmptyDataset);
    }
    if narrow.len() != truth.len() {
        return Err(NwbError::ShapeMismatch(format!(
            "{} narrow frames vs {} truth frames",
            narrow.len(),
            truth.len()
        )));
    }
    let mut rows = Vec::new();
    let mut cdf = Vec::new();
    for &k in ks {
        let mut per_metric: [(&str, Vec<f64>); 4] = [
            ("mse", Vec::new()),
            ("acc_cir", Vec::new()),
            ("mse_noise", Vec::new()),
            ("acc_cir_noise", Vec::new()),
        ];
        for (i, (nar, tru)) in narrow.iter().zip(truth).enumerate() {
            let ecsi = model(i, &nar.frame, k)?;
            let truth_k = restrict_to_grid(&tru.frame, &ecsi.grid)?;
            let (e_n, _) = normalize(&ecsi);
            let (t_n, _) = normalize(&truth_k);
            per_metric[0].1.push(mse(&e_n, &t_n)?);
            per_metric[1].1.push(acc_cir(&e_n, &t_n)?);
            let noise = noise_frame(&ecsi.grid, mix3(0x4556_414c, k as u64, i as u64))?;
            let (n_n, _) = normalize(&noise);
            per_metric[2].1.push(mse(&n_n, &t_n)?);
            per_metric[3].1.push(acc_cir(&n_n, &t_n)?);
        }
        for (name, mut vals) in per_metric {
            vals.sort_by(|a, b| a.total_cmp(b));
            rows.push(MetricRow {
                k,
                metric: name.to_string(),
                median: percentile(&vals, 0.5),
                p10: percentile(&vals, 0.1),
                p90: percentile(&vals, 0.9),
            });
            cdf.push(MetricSamples { k, metric: name.to_string(), sorted_values: vals });
        }
    }
    Ok(EvalReport { rows, cdf })
}

pub fn write_eval_csv(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "k,metric,median,p10,p90")?;
    for r in &report.rows {
        writeln!(w, "{},{},{},{},{}", r.k, r.metric, r.median, r.p10, r.p90)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_eval_json(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(report)?)?;
    Ok(())
}
