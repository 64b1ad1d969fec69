//! Network-facing tensor form of a CSI frame.
//!
//! A frame is laid out row-major on an `(3, R, C)` lattice of `R·C`
//! subcarrier cells: channel 0 real part, channel 1 imaginary part, channel 2
//! the normalized frequency (MHz × 1e−4) of EVERY cell — including cells the
//! frame does not populate, so the frequency channel always describes the
//! whole lattice. Values sit at their true lattice positions (no left
//! alignment); unpopulated cells are zero and masked invalid.

use ndarray::{Array2, Array3};
use num_complex::Complex64;

use crate::channel::{CsiFrame, FrequencyGrid};
use crate::error::{NwbError, Result};

/// Hz → normalized frequency (equals MHz × 1e−4).
pub const FREQ_NORM_SCALE: f64 = 1e-10;

/// Default lattice shape.
pub const DEFAULT_ROWS: usize = 32;
pub const DEFAULT_COLS: usize = 32;

/// 3-channel lattice representation of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiTensor {
    /// shape (3, R, C)
    pub data: Array3<f64>,
    /// lattice of all R·C cells (cell q = row-major index)
    pub grid: FrequencyGrid,
    /// which cells the source frame populated
    pub valid_mask: Array2<bool>,
    pub antenna_index: usize,
    pub timestamp: f64,
}

impl CsiTensor {
    pub fn rows(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn cols(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn cells(&self) -> usize {
        self.rows() * self.cols()
    }
}

fn relative_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Lattice of `rows·cols` cells, same spacing as `grid`, positioned so the
/// grid's subcarriers land on integer cell offsets with the band centered.
pub fn fit_lattice(grid: &FrequencyGrid, rows: usize, cols: usize) -> Result<FrequencyGrid> {
    let cells = rows * cols;
    let n = grid.num_subcarriers;
    if n > cells {
        return Err(NwbError::ShapeMismatch(format!(
            "{n} subcarriers exceed the {cells}-cell lattice; decimate first"
        )));
    }
    let offset = (cells - n) / 2;
    let s = grid.subcarrier_spacing;
    let center = grid.frequency(0) + ((cells - 1) as f64 * 0.5 - offset as f64) * s;
    FrequencyGrid::new(center, s, cells)
}

/// Every `stride`-th subcarrier of a frame; the kept sub-lattice is itself a
/// valid grid (spacing multiplied by the stride).
pub fn decimate_frame(frame: &CsiFrame, stride: usize) -> Result<CsiFrame> {
    if stride == 0 {
        return Err(NwbError::InvalidParameter("stride must be >= 1".into()));
    }
    if stride == 1 {
        return Ok(frame.clone());
    }
    let kept: Vec<Complex64> = frame.values.iter().step_by(stride).cloned().collect();
    let m = kept.len();
    let s = frame.grid.subcarrier_spacing * stride as f64;
    let center = frame.grid.frequency(0) + (m - 1) as f64 * 0.5 * s;
    let grid = FrequencyGrid::new(center, s, m)?;
    CsiFrame::new(grid, frame.antenna_index, kept, frame.timestamp)
}

/// Place a frame onto the cells of `target` in an `(3, rows, cols)` tensor.
///
/// The frame's subcarriers must be a subset of the target lattice (same
/// spacing, integer-aligned offsets). Channel 2 carries the normalized
/// frequency of every cell; populated cells get the frame's values and a true
/// mask bit.
pub fn to_tensor(
    frame: &CsiFrame,
    target: &FrequencyGrid,
    rows: usize,
    cols: usize,
) -> Result<CsiTensor> {
    let cells = rows * cols;
    if target.num_subcarriers != cells {
        return Err(NwbError::ShapeMismatch(format!(
            "target lattice has {} subcarriers but the tensor has {}x{}={} cells",
            target.num_subcarriers, rows, cols, cells
        )));
    }
    let s = target.subcarrier_spacing;
    if !relative_close(frame.grid.subcarrier_spacing, s, 1e-9) {
        return Err(NwbError::GridMismatch(format!(
            "spacing {} does not match lattice spacing {}",
            frame.grid.subcarrier_spacing, s
        )));
    }
    let offset_f = (frame.grid.frequency(0) - target.frequency(0)) / s;
    let offset = offset_f.round();
    if (offset_f - offset).abs() > 1e-6 {
        return Err(NwbError::GridMismatch(format!(
            "frame start sits {offset_f} cells into the lattice: not integer-aligned"
        )));
    }
    if offset < 0.0 || offset as usize + frame.len() > cells {
        return Err(NwbError::GridMismatch(format!(
            "frame [{}..{}) falls outside the {cells}-cell lattice",
            offset,
            offset + frame.len() as f64
        )));
    }
    let offset = offset as usize;

    let mut data = Array3::<f64>::zeros((3, rows, cols));
    let mut mask = Array2::<bool>::from_elem((rows, cols), false);
    for q in 0..cells {
        let (r, c) = (q / cols, q % cols);
        data[[2, r, c]] = target.frequency(q) * FREQ_NORM_SCALE;
    }
    for (i, v) in frame.values.iter().enumerate() {
        let q = offset + i;
        let (r, c) = (q / cols, q % cols);
        data[[0, r, c]] = v.re;
        data[[1, r, c]] = v.im;
        mask[[r, c]] = true;
    }
    Ok(CsiTensor {
        data,
        grid: *target,
        valid_mask: mask,
        antenna_index: frame.antenna_index,
        timestamp: frame.timestamp,
    })
}

/// Tensorize a frame on an automatically fitted lattice, decimating by an
/// integer stride when the frame has more subcarriers than cells.
///
/// Returns the tensor and the stride used (1 = no decimation).
pub fn to_tensor_auto(frame: &CsiFrame, rows: usize, cols: usize) -> Result<(CsiTensor, usize)> {
    let cells = rows * cols;
    let stride = frame.len().div_ceil(cells);
    let reduced = decimate_frame(frame, stride)?;
    let target = fit_lattice(&reduced.grid, rows, cols)?;
    Ok((to_tensor(&reduced, &target, rows, cols)?, stride))
}

/// Rebuild the frame from a tensor whose valid mask is one contiguous
/// row-major run.
pub fn from_tensor(t: &CsiTensor) -> Result<CsiFrame> {
    let (rows, cols) = (t.rows(), t.cols());
    let flat: Vec<bool> = (0..rows * cols)
        .map(|q| t.valid_mask[[q / cols, q % cols]])
        .collect();
    let start = flat.iter().position(|&b| b);
    let start = match start {
        Some(s) => s,
        None => {
            return Err(NwbError::ShapeMismatch(
                "tensor has no valid cells".into(),
            ))
        }
    };
    let len = flat[start..].iter().take_while(|&&b| b).count();
    if flat[start + len..].iter().any(|&b| b) {
        return Err(NwbError::NonContiguousMask);
    }
    let s = t.grid.subcarrier_spacing;
    let center = t.grid.frequency(start) + (len - 1) as f64 * 0.5 * s;
    let grid = FrequencyGrid::new(center, s, len)?;
    let values: Vec<Complex64> = (start..start + len)
        .map(|q| {
            let (r, c) = (q / cols, q % cols);
            Complex64::new(t.data[[0, r, c]], t.data[[1, r, c]])
        })
        .collect();
    CsiFrame::new(grid, t.antenna_index, values, t.timestamp)
}
