//! Sensing case studies on CIR profiles: time-of-flight ranging by the first
//! dominant peak, and multi-person breathing estimation by spectral analysis
//! of per-path tap time series.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::channel::CsiFrame;
use crate::error::{NwbError, Result};
use crate::metrics::{cfr_to_cir, CIR_ZERO_PAD};

/// A peak must reach this fraction of the global |CIR| maximum to count.
pub const DEFAULT_DOMINANCE_RATIO: f64 = 0.5;

/// Indices of local |CIR| maxima at least `rho` times the global maximum,
/// ascending; runs of equal neighbors collapse onto their first tap.
pub fn dominant_peaks(mags: &[f64], rho: f64) -> Vec<usize> {
    let gmax = mags.iter().cloned().fold(0.0f64, f64::max);
    let mut peaks = Vec::new();
    for q in 0..mags.len() {
        let left_ok = q == 0 || mags[q] >= mags[q - 1];
        let right_ok = q + 1 == mags.len() || mags[q] >= mags[q + 1];
        if left_ok && right_ok && mags[q] >= rho * gmax && mags[q] > 0.0 {
            if peaks.last().is_some_and(|&p| p + 1 == q && mags[p] == mags[q]) {
                continue; // plateau: keep the earlier tap
            }
            peaks.push(q);
        }
    }
    peaks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TofEstimate {
    /// seconds
    pub tof: f64,
    /// index into the zero-padded CIR
    pub peak_tap: usize,
    pub peak_magnitude: f64,
}

/// Time of flight: the earliest local |CIR| maximum whose magnitude reaches
/// `dominance_ratio` times the global maximum (ties resolve earlier).
pub fn estimate_tof(frame: &CsiFrame, dominance_ratio: f64) -> Result<TofEstimate> {
    if !(dominance_ratio > 0.0 && dominance_ratio <= 1.0) {
        return Err(NwbError::InvalidParameter(format!(
            "dominance ratio must be in (0, 1], got {dominance_ratio}"
        )));
    }
    let cir = cfr_to_cir(frame, CIR_ZERO_PAD)?;
    let mags = cir.magnitudes();
    let peaks = dominant_peaks(&mags, dominance_ratio);
    let tap = *peaks.first().ok_or(NwbError::AllZeroCir)?;
    Ok(TofEstimate { tof: cir.delay_of(tap), peak_tap: tap, peak_magnitude: mags[tap] })
}

// ── breathing ───────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BreathConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub sample_rate_hz: f64,
    /// breathing band, Hz
    pub band_hz: (f64, f64),
    pub dominance_ratio: f64,
    /// fraction of frames a tap cluster must appear in to be tracked
    pub persistence: f64,
    /// spectral zero-padding of each STFT window
    pub stft_zero_pad: usize,
    /// window counts as breathing when band power ≥ this × the path median
    pub detection_ratio: f64,
}

impl Default for BreathConfig {
    fn default() -> Self {
        Self {
            window_s: 8.0,
            hop_s: 1.0,
            sample_rate_hz: 100.0,
            band_hz: (0.1, 0.5),
            dominance_ratio: DEFAULT_DOMINANCE_RATIO,
            persistence: 0.8,
            stft_zero_pad: 4,
            detection_ratio: 0.15,
        }
    }
}

impl BreathConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.window_s > 0.0
            && self.hop_s > 0.0
            && self.sample_rate_hz > 0.0
            && 0.0 < self.band_hz.0
            && self.band_hz.0 < self.band_hz.1
            && self.band_hz.1 <= self.sample_rate_hz / 2.0
            && self.dominance_ratio > 0.0
            && self.dominance_ratio <= 1.0
            && self.persistence > 0.0
            && self.persistence <= 1.0
            && self.stft_zero_pad >= 1
            && self.detection_ratio > 0.0;
        if !ok {
            return Err(NwbError::InvalidParameter(
                "breathing configuration out of range".into(),
            ));
        }
        Ok(())
    }

    fn window_samples(&self) -> usize {
        (self.window_s * self.sample_rate_hz).round() as usize
    }

    fn hop_samples(&self) -> usize {
        ((self.hop_s * self.sample_rate_hz).round() as usize).max(1)
    }
}

/// One tracked propagation path and its breathing analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBreath {
    /// tap index in the zero-padded CIR
    pub tap: usize,
    pub delay_s: f64,
    /// window centers, seconds
    pub times_s: Vec<f64>,
    pub bpm: Vec<f64>,
    pub band_power: Vec<f64>,
    pub detected: Vec<bool>,
    /// per window, |spectrum| over the breathing band
    pub spectrogram: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreathEstimate {
    /// subject paths, ascending delay (direct path removed)
    pub paths: Vec<PathBreath>,
    /// tap of the discarded direct path
    pub direct_tap: usize,
    /// frequency axis of the spectrogram band, Hz
    pub band_freqs_hz: Vec<f64>,
}

/// Tap clusters that persist across enough frames: consecutive occupied taps
/// (gap ≤ 2) merge, and a cluster is kept when at least `persistence` of all
/// frames put a peak inside it. Returns (center tap, support) ascending.
fn persistent_clusters(
    peak_sets: &[Vec<usize>],
    num_taps: usize,
    persistence: f64,
) -> Vec<(usize, usize)> {
    let mut occupancy = vec![0usize; num_taps];
    for peaks in peak_sets {
        for &p in peaks {
            occupancy[p] += 1;
        }
    }
    let occupied: Vec<usize> = (0..num_taps).filter(|&q| occupancy[q] > 0).collect();
    let mut clusters: Vec<(usize, usize)> = Vec::new(); // (lo, hi) inclusive
    for &q in &occupied {
        match clusters.last_mut() {
            Some((_, hi)) if q <= *hi + 2 => *hi = q,
            _ => clusters.push((q, q)),
        }
    }
    let need = (persistence * peak_sets.len() as f64).ceil() as usize;
    clusters
        .into_iter()
        .filter_map(|(lo, hi)| {
            let support = peak_sets
                .iter()
                .filter(|peaks| peaks.iter().any(|&p| lo <= p && p <= hi))
                .count();
            if support < need.max(1) {
                return None;
            }
            let weight: usize = (lo..=hi).map(|q| occupancy[q]).sum();
            let center: f64 =
                (lo..=hi).map(|q| q as f64 * occupancy[q] as f64).sum::<f64>() / weight as f64;
            Some((center.round() as usize, support))
        })
        .collect()
}

/// Quadratic interpolation of a sampled peak: offset in bins, clamped to ±0.5.
fn quadratic_offset(left: f64, center: f64, right: f64) -> f64 {
    let denom = left - 2.0 * center + right;
    if denom == 0.0 {
        return 0.0;
    }
    (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
}

/// Multi-person breathing estimation.
///
/// Per frame the |CIR| peaks are found; tap clusters persisting across the
/// series are tracked as paths and the earliest (direct path) is discarded.
/// Each remaining path's complex tap series runs through a short-time Fourier
/// transform (tapered window, per-window mean removal, spectral zero-padding)
/// and the per-window breathing rate is 60 × the interpolated peak frequency
/// in the breathing band.
pub fn estimate_breathing(series: &[CsiFrame], cfg: &BreathConfig) -> Result<BreathEstimate> {
    cfg.validate()?;
    let w = cfg.window_samples();
    if series.len() < w {
        return Err(NwbError::SeriesTooShort { len: series.len(), window: w });
    }
    let grid = series[0].grid;
    for f in series {
        if f.grid != grid {
            return Err(NwbError::GridMismatch(
                "breathing series must share one grid".into(),
            ));
        }
    }

    // per-frame CIR and dominant peaks
    let mut cirs = Vec::with_capacity(series.len());
    let mut peak_sets = Vec::with_capacity(series.len());
    for f in series {
        let cir = cfr_to_cir(f, CIR_ZERO_PAD)?;
        peak_sets.push(dominant_peaks(&cir.magnitudes(), cfg.dominance_ratio));
        cirs.push(cir);
    }
    let num_taps = cirs[0].taps.len();
    let clusters = persistent_clusters(&peak_sets, num_taps, cfg.persistence);
    if clusters.len() < 2 {
        return Err(NwbError::NoSecondaryPeaks);
    }
    let direct_tap = clusters[0].0;
    let subject_taps: Vec<usize> = clusters[1..].iter().map(|&(c, _)| c).collect();

    // STFT geometry
    let hop = cfg.hop_samples();
    let fft_len = w * cfg.stft_zero_pad;
    let df = cfg.sample_rate_hz / fft_len as f64;
    let b_lo = (cfg.band_hz.0 / df - 1e-9).ceil() as usize;
    let b_hi = (cfg.band_hz.1 / df + 1e-9).floor() as usize;
    let band_freqs_hz: Vec<f64> = (b_lo..=b_hi).map(|b| b as f64 * df).collect();
    let hann: Vec<f64> = (0..w)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / (w - 1) as f64).cos()))
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(fft_len);

    let mut paths = Vec::with_capacity(subject_taps.len());
    for &tap in &subject_taps {
        let tap_series: Vec<Complex64> = cirs.iter().map(|c| c.taps[tap]).collect();
        let mut times_s = Vec::new();
        let mut bpm = Vec::new();
        let mut band_power: Vec<f64> = Vec::new();
        let mut spectrogram = Vec::new();
        let mut start = 0;
        while start + w <= tap_series.len() {
            let seg = &tap_series[start..start + w];
            let mean = seg.iter().sum::<Complex64>() / w as f64;
            let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
            for (i, v) in seg.iter().enumerate() {
                buf[i] = (v - mean) * hann[i];
            }
            fft.process(&mut buf);
            // fold positive and negative frequencies: modulation sign-agnostic
            let power: Vec<f64> = (b_lo..=b_hi)
                .map(|b| buf[b].norm_sqr() + buf[fft_len - b].norm_sqr())
                .collect();
            let rel = power
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
            let b_star = b_lo + rel;
            let p_at = |b: usize| {
                if b == 0 || b >= fft_len / 2 {
                    0.0
                } else {
                    buf[b].norm_sqr() + buf[fft_len - b].norm_sqr()
                }
            };
            let delta = quadratic_offset(p_at(b_star - 1), p_at(b_star), p_at(b_star + 1));
            times_s.push((start as f64 + w as f64 / 2.0) / cfg.sample_rate_hz);
            bpm.push(60.0 * (b_star as f64 + delta) * df);
            band_power.push(power.iter().sum());
            spectrogram.push(power.iter().map(|p| p.sqrt()).collect());
            start += hop;
        }
        let mut sorted = band_power.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let median = sorted[sorted.len() / 2];
        let detected = band_power.iter().map(|&p| p >= cfg.detection_ratio * median).collect();
        paths.push(PathBreath {
            tap,
            delay_s: cirs[0].delay_of(tap),
            times_s,
            bpm,
            band_power,
            detected,
            spectrogram,
        });
    }
    Ok(BreathEstimate { paths, direct_tap, band_freqs_hz })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        synthesize_csi, synthesize_series_multi, FrequencyGrid, MotionProfile,
        MultipathEnvironment, PropagationPath,
    };
    use std::f64::consts::FRAC_PI_2;

    fn grid_mhz(bandwidth_mhz: f64) -> FrequencyGrid {
        let spacing = 312.5e3;
        let n = (bandwidth_mhz * 1e6 / spacing).round() as usize;
        FrequencyGrid::new(5.5e9, spacing, n).unwrap()
    }

    fn env(paths: &[(f64, f64)]) -> MultipathEnvironment {
        let p = paths
            .iter()
            .map(|&(gain, delay)| PropagationPath::new(gain, 0.0, delay, FRAC_PI_2).unwrap())
            .collect();
        MultipathEnvironment::new(p, "test").unwrap()
    }

    #[test]
    fn tof_single_path_within_one_wide_tap() {
        let frame = synthesize_csi(&env(&[(1.0, 31.25e-9)]), &grid_mhz(160.0), 0).unwrap();
        let est = estimate_tof(&frame, DEFAULT_DOMINANCE_RATIO).unwrap();
        assert!(
            (est.tof - 31.25e-9).abs() <= 6.25e-9,
            "tof {} vs 31.25 ns",
            est.tof * 1e9
        );
        assert!(est.peak_magnitude > 0.0);
        assert_eq!(est.tof, est.peak_tap as f64 * 1.5625e-9);
    }

    #[test]
    fn tof_picks_earliest_of_two_dominant_paths() {
        let e = env(&[(1.0, 20e-9), (1.0, 100e-9)]);
        let frame = synthesize_csi(&e, &grid_mhz(160.0), 0).unwrap();
        let est = estimate_tof(&frame, DEFAULT_DOMINANCE_RATIO).unwrap();
        assert!(
            (est.tof - 20e-9).abs() <= 6.25e-9,
            "earliest dominant path missed: {} ns",
            est.tof * 1e9
        );
    }

    #[test]
    fn narrowband_merges_the_two_paths() {
        // same scene at 20 MHz: 50 ns taps cannot carry both paths cleanly;
        // either they merge into one dominant peak or the estimate is biased
        let e = env(&[(1.0, 20e-9), (1.0, 100e-9)]);
        let frame = synthesize_csi(&e, &grid_mhz(20.0), 0).unwrap();
        let cir = cfr_to_cir(&frame, CIR_ZERO_PAD).unwrap();
        let peaks = dominant_peaks(&cir.magnitudes(), DEFAULT_DOMINANCE_RATIO);
        let est = estimate_tof(&frame, DEFAULT_DOMINANCE_RATIO).unwrap();
        let biased = (est.tof - 20e-9).abs() > 6.25e-9;
        assert!(
            peaks.len() < 2 || biased,
            "20 MHz unexpectedly resolved both paths: peaks {peaks:?}, tof {} ns",
            est.tof * 1e9
        );
    }

    #[test]
    fn two_peak_detection_never_degrades_with_bandwidth() {
        use crate::rng::{mix3, stream};
        use rand::Rng;
        let bandwidths = [20.0, 40.0, 80.0, 160.0];
        let mut detected = [0usize; 4];
        let scenes = 60;
        for s in 0..scenes {
            let mut rng = stream(mix3(0x5446, 0, s));
            let tau0 = rng.random_range(10e-9..80e-9);
            let dtau = rng.random_range(10e-9..60e-9);
            let e = env(&[(1.0, tau0), (rng.random_range(0.6..1.0), tau0 + dtau)]);
            for (bi, &bw) in bandwidths.iter().enumerate() {
                let frame = synthesize_csi(&e, &grid_mhz(bw), 0).unwrap();
                let cir = cfr_to_cir(&frame, CIR_ZERO_PAD).unwrap();
                if dominant_peaks(&cir.magnitudes(), DEFAULT_DOMINANCE_RATIO).len() >= 2 {
                    detected[bi] += 1;
                }
            }
        }
        for w in detected.windows(2) {
            assert!(w[1] >= w[0], "two-peak detection degraded: {detected:?}");
        }
        assert!(detected[3] > detected[0], "no bandwidth benefit: {detected:?}");
    }

    #[test]
    fn tof_invariant_to_global_scaling() {
        let frame = synthesize_csi(&env(&[(0.7, 45e-9)]), &grid_mhz(160.0), 0).unwrap();
        let base = estimate_tof(&frame, 0.5).unwrap();
        let mut scaled = frame.clone();
        for v in &mut scaled.values {
            *v *= Complex64::from_polar(3.7, 1.1);
        }
        let est = estimate_tof(&scaled, 0.5).unwrap();
        assert_eq!(est.peak_tap, base.peak_tap);
        assert_eq!(est.tof, base.tof);
    }

    #[test]
    fn tof_rejects_bad_inputs() {
        let frame = synthesize_csi(&env(&[(1.0, 10e-9)]), &grid_mhz(20.0), 0).unwrap();
        assert!(matches!(
            estimate_tof(&frame, 0.0),
            Err(NwbError::InvalidParameter(_))
        ));
        assert!(matches!(
            estimate_tof(&frame, 1.5),
            Err(NwbError::InvalidParameter(_))
        ));
        let zero = CsiFrame::new(
            grid_mhz(20.0),
            0,
            vec![Complex64::new(0.0, 0.0); 64],
            0.0,
        )
        .unwrap();
        assert!(matches!(estimate_tof(&zero, 0.5), Err(NwbError::AllZeroCir)));
    }

    /// Direct path at 30 ns plus three breathing subjects at well-separated
    /// delays, all at 15 bpm (0.25 Hz) with distinct phases.
    fn three_subject_series(duration_s: f64) -> Vec<CsiFrame> {
        let e = env(&[(1.0, 30e-9), (0.8, 80e-9), (0.7, 140e-9), (0.6, 200e-9)]);
        let motions = [
            MotionProfile::new(1, 0.04e-9, 0.25, 0.0).unwrap(),
            MotionProfile::new(2, 0.04e-9, 0.25, 1.3).unwrap(),
            MotionProfile::new(3, 0.04e-9, 0.25, 2.6).unwrap(),
        ];
        synthesize_series_multi(&e, &motions, &grid_mhz(160.0), 0, 100.0, duration_s).unwrap()
    }

    #[test]
    fn three_subjects_at_15_bpm_recovered() {
        let series = three_subject_series(20.0);
        let est = estimate_breathing(&series, &BreathConfig::default()).unwrap();
        assert_eq!(est.paths.len(), 3, "expected three subject paths");
        // direct path discarded: ~30 ns
        let cir_spacing = 1.5625e-9;
        assert!((est.direct_tap as f64 * cir_spacing - 30e-9).abs() < 5e-9);
        for (i, p) in est.paths.iter().enumerate() {
            assert!(!p.bpm.is_empty());
            let good = p.bpm.iter().filter(|&&b| (b - 15.0).abs() <= 1.0).count();
            assert!(
                good as f64 >= 0.9 * p.bpm.len() as f64,
                "path {i}: bpm {:?}",
                p.bpm
            );
            assert!(p.detected.iter().all(|&d| d), "path {i} dropouts");
            assert!(p.times_s.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(p.bpm.len(), p.spectrogram.len());
        }
        // subject delays ascending: 80, 140, 200 ns
        for (p, want) in est.paths.iter().zip([80e-9, 140e-9, 200e-9]) {
            assert!((p.delay_s - want).abs() < 5e-9, "delay {}", p.delay_s);
        }
    }

    #[test]
    fn off_bin_rate_interpolated_within_one_bpm() {
        // 0.3 Hz = 18 bpm sits between STFT bins; quadratic interpolation
        // must land within ±1 bpm
        let e = env(&[(1.0, 30e-9), (0.8, 100e-9)]);
        let motions = [MotionProfile::new(1, 0.04e-9, 0.3, 0.7).unwrap()];
        let series =
            synthesize_series_multi(&e, &motions, &grid_mhz(160.0), 0, 100.0, 16.0).unwrap();
        let est = estimate_breathing(&series, &BreathConfig::default()).unwrap();
        assert_eq!(est.paths.len(), 1);
        for b in &est.paths[0].bpm {
            assert!((b - 18.0).abs() <= 1.0, "bpm {b}");
        }
    }

    #[test]
    fn breath_hold_window_goes_undetected() {
        // 24 s breathing then 8 s still (phase continuous at the boundary)
        let e = env(&[(1.0, 30e-9), (0.8, 100e-9)]);
        let g = grid_mhz(160.0);
        let moving = synthesize_series_multi(
            &e,
            &[MotionProfile::new(1, 0.04e-9, 0.25, 0.0).unwrap()],
            &g,
            0,
            100.0,
            24.0,
        )
        .unwrap();
        let still = synthesize_series_multi(
            &e,
            &[MotionProfile::new(1, 0.0, 0.25, 0.0).unwrap()],
            &g,
            0,
            100.0,
            8.0,
        )
        .unwrap();
        let mut series = moving;
        series.extend(still);
        let est = estimate_breathing(&series, &BreathConfig::default()).unwrap();
        assert_eq!(est.paths.len(), 1);
        let p = &est.paths[0];
        // windows fully inside the breathing interval stay detected; the
        // window fully inside the hold does not
        let w = 800;
        for (i, (&t, &d)) in p.times_s.iter().zip(&p.detected).enumerate() {
            let start = (t * 100.0) as usize - w / 2;
            if start + w <= 2400 {
                assert!(d, "window {i} (breathing) undetected");
            }
            if start >= 2400 {
                assert!(!d, "window {i} (breath hold) detected");
            }
        }
        assert!(p.detected.iter().any(|&d| !d), "hold never undetected");
    }

    #[test]
    fn short_series_rejected() {
        let series = three_subject_series(2.0);
        assert!(matches!(
            estimate_breathing(&series, &BreathConfig::default()),
            Err(NwbError::SeriesTooShort { len: 200, window: 800 })
        ));
    }

    #[test]
    fn static_single_path_has_no_secondary_peaks() {
        let e = env(&[(1.0, 40e-9)]);
        let series = synthesize_series_multi(&e, &[], &grid_mhz(160.0), 0, 100.0, 9.0).unwrap();
        assert!(matches!(
            estimate_breathing(&series, &BreathConfig::default()),
            Err(NwbError::NoSecondaryPeaks)
        ));
    }

    #[test]
    fn plateau_and_ratio_edge_cases_in_peak_finding() {
        assert_eq!(dominant_peaks(&[0.0, 0.0, 0.0], 0.5), Vec::<usize>::new());
        assert_eq!(dominant_peaks(&[1.0, 1.0, 0.2], 0.5), vec![0]);
        assert_eq!(dominant_peaks(&[0.2, 1.0, 0.3, 0.6, 0.1], 0.5), vec![1, 3]);
        assert_eq!(dominant_peaks(&[0.2, 1.0, 0.3, 0.4, 0.1], 0.5), vec![1]);
        // boundary taps are eligible peaks
        assert_eq!(dominant_peaks(&[1.0, 0.5, 0.9], 0.5), vec![0, 2]);
    }
}
