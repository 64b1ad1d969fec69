//! Multipath channel synthesis.
//!
//! A propagation environment is a set of paths (gain, delay, angle of
//! arrival). The channel frequency response on antenna `n` at frequency `f`
//! is the coherent sum over paths of
//! `|α|·e^{jφ}·e^{−j2πfτ}·e^{−jπ·n·cosθ}` (half-wavelength array spacing).
//! The same parameters generate the response at any frequency, which is what
//! makes narrowband→wideband extrapolation well-posed: the wide band
//! restricted to the narrow lattice reproduces the narrow frame bit-exactly.

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::{PI, TAU};

use crate::error::{NwbError, Result};
use crate::rng::{mix, stream};

// ── domain types ──────────────────────────────────────────────────────────

/// One propagation path: gain magnitude/phase, delay, angle of arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationPath {
    /// nonnegative, unitless
    pub gain_magnitude: f64,
    /// radians, wrapped into [−π, π)
    pub gain_phase: f64,
    /// seconds, nonnegative
    pub delay: f64,
    /// radians in [0, π]
    pub aoa: f64,
}

impl PropagationPath {
    pub fn new(gain_magnitude: f64, gain_phase: f64, delay: f64, aoa: f64) -> Result<Self> {
        for (v, what) in [
            (gain_magnitude, "gain_magnitude"),
            (gain_phase, "gain_phase"),
            (delay, "delay"),
            (aoa, "aoa"),
        ] {
            if !v.is_finite() {
                return Err(NwbError::NonFinite(format!("path {what}")));
            }
        }
        if gain_magnitude < 0.0 {
            return Err(NwbError::InvalidParameter(format!(
                "gain_magnitude must be >= 0, got {gain_magnitude}"
            )));
        }
        if delay < 0.0 {
            return Err(NwbError::InvalidParameter(format!(
                "delay must be >= 0, got {delay}"
            )));
        }
        if !(0.0..=PI).contains(&aoa) {
            return Err(NwbError::InvalidParameter(format!(
                "aoa must be in [0, pi], got {aoa}"
            )));
        }
        let gain_phase = (gain_phase + PI).rem_euclid(TAU) - PI;
        Ok(Self { gain_magnitude, gain_phase, delay, aoa })
    }
}

/// The unknown Ω: an ordered set of propagation paths plus a bookkeeping label.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipathEnvironment {
    pub paths: Vec<PropagationPath>,
    pub label: String,
}

impl MultipathEnvironment {
    pub fn new(paths: Vec<PropagationPath>, label: impl Into<String>) -> Result<Self> {
        if paths.is_empty() {
            return Err(NwbError::EmptyPaths);
        }
        Ok(Self { paths, label: label.into() })
    }
}

/// A contiguous subcarrier lattice, symmetric about its center frequency.
///
/// Subcarrier `idx` sits at `center + (idx − (n−1)/2)·spacing`; the total
/// bandwidth is `n·spacing`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FrequencyGrid {
    pub center_freq: f64,
    pub subcarrier_spacing: f64,
    pub num_subcarriers: usize,
}

impl FrequencyGrid {
    pub fn new(center_freq: f64, subcarrier_spacing: f64, num_subcarriers: usize) -> Result<Self> {
        if !center_freq.is_finite() || !subcarrier_spacing.is_finite() {
            return Err(NwbError::NonFinite("frequency grid".into()));
        }
        if subcarrier_spacing <= 0.0 {
            return Err(NwbError::InvalidParameter(format!(
                "subcarrier_spacing must be > 0, got {subcarrier_spacing}"
            )));
        }
        if num_subcarriers == 0 {
            return Err(NwbError::InvalidParameter(
                "num_subcarriers must be >= 1".into(),
            ));
        }
        Ok(Self { center_freq, subcarrier_spacing, num_subcarriers })
    }

    /// Frequency of subcarrier `idx`.
    ///
    /// Half-integer offsets are exact in f64, so two grids sharing the same
    /// center and spacing produce bit-identical frequencies at overlapping
    /// lattice points.
    #[inline]
    pub fn frequency(&self, idx: usize) -> f64 {
        let half_span = (self.num_subcarriers - 1) as f64 * 0.5;
        self.center_freq + (idx as f64 - half_span) * self.subcarrier_spacing
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.num_subcarriers).map(|i| self.frequency(i)).collect()
    }

    pub fn bandwidth(&self) -> f64 {
        self.num_subcarriers as f64 * self.subcarrier_spacing
    }

    /// The k×-expanded lattice: same center, same spacing, k·n subcarriers.
    ///
    /// Requires n·(k−1) even, otherwise the original subcarriers fall between
    /// the expanded lattice points and restriction cannot be exact.
    pub fn expanded(&self, k: usize) -> Result<FrequencyGrid> {
        if k < 2 {
            return Err(NwbError::ExpansionTooSmall(k));
        }
        if self.num_subcarriers * (k - 1) % 2 != 0 {
            return Err(NwbError::MisalignedExpansion {
                num_subcarriers: self.num_subcarriers,
                k,
            });
        }
        FrequencyGrid::new(
            self.center_freq,
            self.subcarrier_spacing,
            self.num_subcarriers * k,
        )
    }
}

/// Complex channel samples over one grid, one antenna, one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiFrame {
    pub grid: FrequencyGrid,
    pub antenna_index: usize,
    pub values: Vec<Complex64>,
    /// seconds
    pub timestamp: f64,
}

impl CsiFrame {
    pub fn new(
        grid: FrequencyGrid,
        antenna_index: usize,
        values: Vec<Complex64>,
        timestamp: f64,
    ) -> Result<Self> {
        if values.len() != grid.num_subcarriers {
            return Err(NwbError::ShapeMismatch(format!(
                "frame has {} values for a {}-subcarrier grid",
                values.len(),
                grid.num_subcarriers
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(NwbError::NonFinite("frame values".into()));
        }
        if !timestamp.is_finite() {
            return Err(NwbError::NonFinite("timestamp".into()));
        }
        Ok(Self { grid, antenna_index, values, timestamp })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest value magnitude in the frame.
    pub fn max_magnitude(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0f64, f64::max)
    }
}

/// Sinusoidal delay modulation applied to one path (breathing motion).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionProfile {
    pub path_index: usize,
    /// peak delay deviation, seconds, nonnegative
    pub delay_amplitude: f64,
    /// modulation frequency, Hz, nonnegative
    pub rate_hz: f64,
    /// radians
    pub phase0: f64,
}

impl MotionProfile {
    pub fn new(path_index: usize, delay_amplitude: f64, rate_hz: f64, phase0: f64) -> Result<Self> {
        if !delay_amplitude.is_finite() || !rate_hz.is_finite() || !phase0.is_finite() {
            return Err(NwbError::NonFinite("motion profile".into()));
        }
        if delay_amplitude < 0.0 {
            return Err(NwbError::InvalidParameter(format!(
                "delay_amplitude must be >= 0, got {delay_amplitude}"
            )));
        }
        if rate_hz < 0.0 {
            return Err(NwbError::InvalidParameter(format!(
                "rate_hz must be >= 0, got {rate_hz}"
            )));
        }
        Ok(Self { path_index, delay_amplitude, rate_hz, phase0 })
    }
}

// ── synthesis ─────────────────────────────────────────────────────────────

/// Channel frequency response of `env` over `grid` on antenna `antenna`.
///
/// Pure and deterministic; path order does not affect the result beyond
/// floating-point associativity (summation runs in stored order).
pub fn synthesize_csi(
    env: &MultipathEnvironment,
    grid: &FrequencyGrid,
    antenna: usize,
) -> Result<CsiFrame> {
    if env.paths.is_empty() {
        return Err(NwbError::EmptyPaths);
    }
    for p in &env.paths {
        if !(p.gain_magnitude.is_finite()
            && p.gain_phase.is_finite()
            && p.delay.is_finite()
            && p.aoa.is_finite())
        {
            return Err(NwbError::NonFinite("path parameters".into()));
        }
    }
    // per-path phase that does not depend on frequency
    let static_phase: Vec<(f64, f64, f64)> = env
        .paths
        .iter()
        .map(|p| {
            let ant = PI * antenna as f64 * p.aoa.cos();
            (p.gain_magnitude, p.gain_phase - ant, p.delay)
        })
        .collect();

    let mut values = Vec::with_capacity(grid.num_subcarriers);
    for idx in 0..grid.num_subcarriers {
        let f = grid.frequency(idx);
        let mut acc = Complex64::new(0.0, 0.0);
        for &(mag, phase0, delay) in &static_phase {
            acc += Complex64::from_polar(mag, phase0 - TAU * f * delay);
        }
        values.push(acc);
    }
    CsiFrame::new(*grid, antenna, values, 0.0)
}

/// Synthesize the narrow frame over `narrow_grid` and the wide frame over its
/// k×-expanded lattice from the same environment.
///
/// The wide frame restricted to the narrow lattice equals the narrow frame
/// bit-exactly: both are produced by the same formula at bit-identical
/// frequencies.
pub fn synthesize_pair(
    env: &MultipathEnvironment,
    narrow_grid: &FrequencyGrid,
    k: usize,
    antenna: usize,
) -> Result<(CsiFrame, CsiFrame)> {
    let wide_grid = narrow_grid.expanded(k)?;
    let narrow = synthesize_csi(env, narrow_grid, antenna)?;
    let wide = synthesize_csi(env, &wide_grid, antenna)?;
    Ok((narrow, wide))
}

/// Central `count`-subcarrier restriction of a frame.
pub fn restrict_frame(frame: &CsiFrame, count: usize) -> Result<CsiFrame> {
    let n = frame.len();
    if count == 0 || count > n {
        return Err(NwbError::GridMismatch(format!(
            "cannot restrict {n} subcarriers to {count}"
        )));
    }
    if (n - count) % 2 != 0 {
        return Err(NwbError::GridMismatch(format!(
            "restriction {n} -> {count} is not center-aligned"
        )));
    }
    let offset = (n - count) / 2;
    let grid = FrequencyGrid::new(frame.grid.center_freq, frame.grid.subcarrier_spacing, count)?;
    CsiFrame::new(
        grid,
        frame.antenna_index,
        frame.values[offset..offset + count].to_vec(),
        frame.timestamp,
    )
}

/// Time series of frames with sinusoidally modulated path delays.
///
/// `motions` lists at most one profile per path; sampling must satisfy
/// Nyquist for every modulation rate.
pub fn synthesize_series_multi(
    env: &MultipathEnvironment,
    motions: &[MotionProfile],
    grid: &FrequencyGrid,
    antenna: usize,
    sample_rate_hz: f64,
    duration_s: f64,
) -> Result<Vec<CsiFrame>> {
    if duration_s <= 0.0 || !duration_s.is_finite() {
        return Err(NwbError::InvalidParameter(format!(
            "duration must be > 0, got {duration_s}"
        )));
    }
    if sample_rate_hz <= 0.0 || !sample_rate_hz.is_finite() {
        return Err(NwbError::InvalidParameter(format!(
            "sample rate must be > 0, got {sample_rate_hz}"
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for m in motions {
        if m.path_index >= env.paths.len() {
            return Err(NwbError::InvalidParameter(format!(
                "motion path_index {} out of range (env has {} paths)",
                m.path_index,
                env.paths.len()
            )));
        }
        if !seen.insert(m.path_index) {
            return Err(NwbError::InvalidParameter(format!(
                "duplicate motion for path {}",
                m.path_index
            )));
        }
        if sample_rate_hz <= 2.0 * m.rate_hz {
            return Err(NwbError::NyquistViolation {
                rate_hz: sample_rate_hz,
                motion_hz: m.rate_hz,
            });
        }
        if m.delay_amplitude > env.paths[m.path_index].delay {
            return Err(NwbError::InvalidParameter(format!(
                "delay_amplitude {} exceeds path delay {} (delay would go negative)",
                m.delay_amplitude, env.paths[m.path_index].delay
            )));
        }
    }

    let count = (duration_s * sample_rate_hz).floor() as usize;
    let mut frames = Vec::with_capacity(count);
    let mut moved = env.clone();
    for i in 0..count {
        let t = i as f64 / sample_rate_hz;
        for m in motions {
            let base = env.paths[m.path_index].delay;
            moved.paths[m.path_index].delay =
                base + m.delay_amplitude * (TAU * m.rate_hz * t + m.phase0).sin();
        }
        let mut frame = synthesize_csi(&moved, grid, antenna)?;
        frame.timestamp = t;
        frames.push(frame);
    }
    Ok(frames)
}

/// Single-motion convenience form of [`synthesize_series_multi`].
pub fn synthesize_series(
    env: &MultipathEnvironment,
    motion: &MotionProfile,
    grid: &FrequencyGrid,
    antenna: usize,
    sample_rate_hz: f64,
    duration_s: f64,
) -> Result<Vec<CsiFrame>> {
    synthesize_series_multi(env, std::slice::from_ref(motion), grid, antenna, sample_rate_hz, duration_s)
}

// ── random environments ───────────────────────────────────────────────────

/// Ranges for drawing random environments.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentSpec {
    /// inclusive path-count range
    pub path_count: (usize, usize),
    /// seconds
    pub delay_range: (f64, f64),
    /// log-uniform gain magnitude range, both ends > 0
    pub gain_range: (f64, f64),
    /// radians, within [0, π]
    pub aoa_range: (f64, f64),
    /// sort drawn paths by descending gain
    pub sorted_gains: bool,
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        Self {
            path_count: (1, 5),
            delay_range: (0.0, 200e-9),
            gain_range: (0.1, 1.0),
            aoa_range: (0.0, PI),
            sorted_gains: false,
        }
    }
}

impl EnvironmentSpec {
    fn validate(&self) -> Result<()> {
        if self.path_count.0 < 1 || self.path_count.0 > self.path_count.1 {
            return Err(NwbError::InvalidParameter(format!(
                "path_count range {:?} is empty",
                self.path_count
            )));
        }
        if !(self.delay_range.0 <= self.delay_range.1) || self.delay_range.0 < 0.0 {
            return Err(NwbError::InvalidParameter(format!(
                "delay_range {:?} is empty or negative",
                self.delay_range
            )));
        }
        if !(0.0 < self.gain_range.0 && self.gain_range.0 <= self.gain_range.1) {
            return Err(NwbError::InvalidParameter(format!(
                "gain_range {:?} must be positive and nonempty",
                self.gain_range
            )));
        }
        if !(0.0 <= self.aoa_range.0 && self.aoa_range.0 <= self.aoa_range.1 && self.aoa_range.1 <= PI)
        {
            return Err(NwbError::InvalidParameter(format!(
                "aoa_range {:?} must be nonempty within [0, pi]",
                self.aoa_range
            )));
        }
        Ok(())
    }
}

/// Draw a random environment. Deterministic per seed.
pub fn sample_environment(spec: &EnvironmentSpec, seed: u64) -> Result<MultipathEnvironment> {
    spec.validate()?;
    let mut rng = stream(mix(seed, 0x454e));
    let l = rng.random_range(spec.path_count.0..=spec.path_count.1);
    let (ln_lo, ln_hi) = (spec.gain_range.0.ln(), spec.gain_range.1.ln());
    let mut paths = Vec::with_capacity(l);
    for _ in 0..l {
        let delay = if spec.delay_range.0 == spec.delay_range.1 {
            spec.delay_range.0
        } else {
            rng.random_range(spec.delay_range.0..spec.delay_range.1)
        };
        let gain = if ln_lo == ln_hi {
            spec.gain_range.0
        } else {
            rng.random_range(ln_lo..ln_hi).exp()
        };
        let aoa = if spec.aoa_range.0 == spec.aoa_range.1 {
            spec.aoa_range.0
        } else {
            rng.random_range(spec.aoa_range.0..spec.aoa_range.1)
        };
        let phase = rng.random_range(-PI..PI);
        paths.push(PropagationPath::new(gain, phase, delay, aoa)?);
    }
    if spec.sorted_gains {
        paths.sort_by(|a, b| b.gain_magnitude.total_cmp(&a.gain_magnitude));
    }
    MultipathEnvironment::new(paths, format!("env-{seed:016x}"))
}

/// Draw `count` environments with per-index derived seeds.
pub fn sample_environments(
    spec: &EnvironmentSpec,
    count: usize,
    seed: u64,
) -> Result<Vec<MultipathEnvironment>> {
    (0..count)
        .map(|i| sample_environment(spec, mix(seed, i as u64)))
        .collect()
}

/// Add complex white Gaussian noise at the given SNR. Off by default in every
/// pipeline; provided for robustness experiments.
pub fn add_awgn(frame: &CsiFrame, snr_db: f64, seed: u64) -> CsiFrame {
    let n = frame.len();
    if n == 0 {
        return frame.clone();
    }
    let power: f64 = frame.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
    if power == 0.0 {
        return frame.clone();
    }
    let sigma = (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
    let mut rng = stream(mix(seed, 0x4157_474e));
    let mut out = frame.clone();
    for v in &mut out.values {
        let re: f64 = rng.sample(rand_distr::StandardNormal);
        let im: f64 = rng.sample(rand_distr::StandardNormal);
        *v += Complex64::new(sigma * re, sigma * im);
    }
    out
}

// ── tests ─────────────────────────────────────────────────────────────────
