//! Relative frequency embedding: anchor/band coordinates on the subcarrier
//! lattice and their sinusoidal feature encoding.
//!
//! The known narrowband segment acts as an anchor; the full (observed) band
//! is expressed in the anchor's frame, so the encoding depends only on where
//! each subcarrier sits relative to the anchor plus its physical frequency —
//! never on absolute lattice indices. Half of each feature vector encodes the
//! relative position, the other half the frequency, as sin/cos pairs with
//! geometrically spaced wavelengths.

use ndarray::Array2;

use crate::channel::FrequencyGrid;
use crate::error::{NwbError, Result};

/// Scale from Hz to the dimensionless range the frequency features use
/// (5.18 GHz -> 0.518). Matches the lattice tensor's frequency channel.
pub const FREQ_FEATURE_SCALE: f64 = 1e-10;

/// Anchor and observed band as (top, left, height, width) rectangles over
/// the (3, length) CSI matrix layout, in the anchor's frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RfeCoordinates {
    pub anchor: (i64, i64, i64, i64),
    pub observed: (i64, i64, i64, i64),
}

impl RfeCoordinates {
    /// Anchor start within the band (subcarriers left of the anchor).
    pub fn anchor_start(&self) -> i64 {
        -self.observed.1
    }

    /// Anchor length in subcarriers.
    pub fn anchor_len(&self) -> i64 {
        self.anchor.3
    }

    /// Total band length in subcarriers.
    pub fn band_len(&self) -> i64 {
        -self.observed.1 + self.anchor.3 + self.observed.3
    }
}

/// Coordinates of a band of `f` subcarriers whose anchor segment of length
/// `l` starts `a` subcarriers into the band.
///
/// The anchor sits at (0, 0, 3, l); the band, re-expressed in the anchor's
/// frame, at (0, -a, 3, f - a - l): `a` columns hang left of the anchor and
/// `f - a - l` hang right of it.
pub fn observed_coords(a: i64, l: i64, f: i64) -> Result<RfeCoordinates> {
    if a < 0 || l < 1 || a + l > f {
        return Err(NwbError::InvalidParameter(format!(
            "anchor [{a}, {a}+{l}) does not fit a band of {f} subcarriers"
        )));
    }
    Ok(RfeCoordinates { anchor: (0, 0, 3, l), observed: (0, -a, 3, f - a - l) })
}

/// Coordinates for extrapolation to `k` times the input band: the input is
/// the anchor, centered (floor split, remainder to the right) in a band of
/// `k * input_len` subcarriers.
pub fn extrapolation_coords(input_len: usize, k: usize) -> Result<RfeCoordinates> {
    if k < 2 {
        return Err(NwbError::ExpansionTooSmall(k));
    }
    let l = input_len as i64;
    let a = (k as i64 - 1) * l / 2;
    observed_coords(a, l, k as i64 * l)
}

/// One embedding row per band subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct RfeEmbedding {
    /// (tokens, embed_dim)
    pub values: Array2<f64>,
    pub embed_dim: usize,
}

/// Sinusoidal features for arbitrary (position, frequency) pairs.
///
/// `dim` must be divisible by 4: the first half encodes position, the second
/// half frequency, each as sin/cos pairs at wavelengths 10000^(2m/dim).
/// Positions are real-valued so callers may use fractional anchor units.
pub fn embed_features(positions: &[f64], freqs_hz: &[f64], dim: usize) -> Result<Array2<f64>> {
    if dim == 0 || dim % 4 != 0 {
        return Err(NwbError::InvalidParameter(format!(
            "embedding dim {dim} must be a positive multiple of 4"
        )));
    }
    if positions.len() != freqs_hz.len() {
        return Err(NwbError::ShapeMismatch(format!(
            "{} positions vs {} frequencies",
            positions.len(),
            freqs_hz.len()
        )));
    }
    let half = dim / 2;
    let pairs = half / 2;
    let mut out = Array2::zeros((positions.len(), dim));
    for (t, (&pos, &f)) in positions.iter().zip(freqs_hz).enumerate() {
        let fv = f * FREQ_FEATURE_SCALE;
        for m in 0..pairs {
            let wavelength = 10000f64.powf(2.0 * m as f64 / dim as f64);
            out[[t, 2 * m]] = (pos / wavelength).sin();
            out[[t, 2 * m + 1]] = (pos / wavelength).cos();
            out[[t, half + 2 * m]] = (fv / wavelength).sin();
            out[[t, half + 2 * m + 1]] = (fv / wavelength).cos();
        }
    }
    Ok(out)
}

/// Embed a band described by `coords`. `grid` must cover exactly the band's
/// subcarriers, one token each; token q gets relative position `q - a` in
/// anchor units plus its grid frequency.
pub fn embed(coords: &RfeCoordinates, grid: &FrequencyGrid, embed_dim: usize) -> Result<RfeEmbedding> {
    let f = coords.band_len();
    if f != grid.num_subcarriers as i64 {
        return Err(NwbError::ShapeMismatch(format!(
            "coordinates describe a {f}-subcarrier band but the grid has {}",
            grid.num_subcarriers
        )));
    }
    let a = coords.anchor_start();
    let positions: Vec<f64> = (0..f).map(|q| (q - a) as f64).collect();
    let freqs: Vec<f64> = (0..grid.num_subcarriers).map(|i| grid.frequency(i)).collect();
    let values = embed_features(&positions, &freqs, embed_dim)?;
    Ok(RfeEmbedding { values, embed_dim })
}

/// Patch-granularity embedding for a lattice-shaped latent: one row per
/// patch token, whose position/frequency are the means over the patch's
/// cells. `grid` is the lattice grid (rows*cols subcarriers, row-major) and
/// `anchor_cell` the lattice cell index where the anchor segment starts.
pub fn lattice_embedding(
    grid: &FrequencyGrid,
    rows: usize,
    cols: usize,
    patch: usize,
    anchor_cell: f64,
    embed_dim: usize,
) -> Result<RfeEmbedding> {
    if grid.num_subcarriers != rows * cols {
        return Err(NwbError::ShapeMismatch(format!(
            "lattice grid of {} cells for a {rows}x{cols} layout",
            grid.num_subcarriers
        )));
    }
    if patch == 0 || rows % patch != 0 || cols % patch != 0 {
        return Err(NwbError::IndivisibleDims { rows, cols, patch });
    }
    let (pr, pc) = (rows / patch, cols / patch);
    let cells = (patch * patch) as f64;
    let mut positions = Vec::with_capacity(pr * pc);
    let mut freqs = Vec::with_capacity(pr * pc);
    for br in 0..pr {
        for bc in 0..pc {
            let mut pos_sum = 0.0;
            let mut freq_sum = 0.0;
            for dr in 0..patch {
                for dc in 0..patch {
                    let q = (br * patch + dr) * cols + bc * patch + dc;
                    pos_sum += q as f64;
                    freq_sum += grid.frequency(q);
                }
            }
            positions.push(pos_sum / cells - anchor_cell);
            freqs.push(freq_sum / cells);
        }
    }
    let values = embed_features(&positions, &freqs, embed_dim)?;
    Ok(RfeEmbedding { values, embed_dim })
}
