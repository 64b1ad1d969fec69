//! Frozen latent codec: reversible mapping between CSI lattice tensors and
//! token sequences for the diffusion model.
//!
//! Two variants, both deterministic and stateless: a lossless patchify that
//! flattens non-overlapping p x p patches (all three channels) into tokens,
//! and a frozen-linear codec that additionally applies a seeded orthonormal
//! projection per token — decode is the transpose, so round trips hold to
//! floating-point round-off. Both are linear maps.

use ndarray::{Array2, Array3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::FrequencyGrid;
use crate::error::{NwbError, Result};
use crate::rng::{mix, stream};
use crate::tensor::CsiTensor;

/// Serializable codec description (stored inside checkpoints).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CodecSpec {
    Patchify { patch: usize },
    FrozenLinear { patch: usize, seed: u64 },
}

impl CodecSpec {
    pub fn patch(&self) -> usize {
        match *self {
            CodecSpec::Patchify { patch } => patch,
            CodecSpec::FrozenLinear { patch, .. } => patch,
        }
    }
}

/// Token sequence over a patch grid, with enough provenance to invert.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTensor {
    /// (tokens, latent_dim), row-major over patch rows then patch columns.
    pub values: Array2<f64>,
    pub grid: FrequencyGrid,
    pub rows: usize,
    pub cols: usize,
    pub valid_mask: ndarray::Array2<bool>,
    pub antenna_index: usize,
    pub timestamp: f64,
}

impl LatentTensor {
    pub fn tokens(&self) -> usize {
        self.values.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.values.ncols()
    }
}

/// Frozen encoder/decoder pair for a fixed lattice shape.
#[derive(Debug, Clone)]
pub struct LatentCodec {
    spec: CodecSpec,
    rows: usize,
    cols: usize,
    /// Orthonormal per-token mixing matrix (dim x dim); None for plain patchify.
    mixing: Option<Array2<f64>>,
}

impl LatentCodec {
    pub fn new(spec: CodecSpec, rows: usize, cols: usize) -> Result<Self> {
        let p = spec.patch();
        if p == 0 || rows % p != 0 || cols % p != 0 {
            return Err(NwbError::IndivisibleDims { rows, cols, patch: p });
        }
        let mixing = match spec {
            CodecSpec::Patchify { .. } => None,
            CodecSpec::FrozenLinear { patch, seed } => {
                Some(orthonormal_matrix(3 * patch * patch, seed))
            }
        };
        Ok(Self { spec, rows, cols, mixing })
    }

    pub fn spec(&self) -> CodecSpec {
        self.spec
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn tokens(&self) -> usize {
        let p = self.spec.patch();
        (self.rows / p) * (self.cols / p)
    }

    pub fn latent_dim(&self) -> usize {
        let p = self.spec.patch();
        3 * p * p
    }

    fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        if rows != self.rows || cols != self.cols {
            return Err(NwbError::ShapeMismatch(format!(
                "codec built for ({}, {}) lattice, got ({rows}, {cols})",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    /// Flatten p x p patches (channel-major within each token) and apply the
    /// frozen mixing if configured.
    pub fn encode(&self, t: &CsiTensor) -> Result<LatentTensor> {
        self.check_shape(t.rows(), t.cols())?;
        let p = self.spec.patch();
        let (pr, pc) = (self.rows / p, self.cols / p);
        let dim = self.latent_dim();
        let mut values = Array2::zeros((pr * pc, dim));
        for br in 0..pr {
            for bc in 0..pc {
                let tok = br * pc + bc;
                for ch in 0..3 {
                    for dr in 0..p {
                        for dc in 0..p {
                            values[[tok, ch * p * p + dr * p + dc]] =
                                t.data[[ch, br * p + dr, bc * p + dc]];
                        }
                    }
                }
            }
        }
        if let Some(m) = &self.mixing {
            values = values.dot(&m.t());
        }
        Ok(LatentTensor {
            values,
            grid: t.grid.clone(),
            rows: self.rows,
            cols: self.cols,
            valid_mask: t.valid_mask.clone(),
            antenna_index: t.antenna_index,
            timestamp: t.timestamp,
        })
    }

    /// Invert [`encode`]: unmix (transpose of the orthonormal matrix) and
    /// unfold tokens back onto the lattice.
    pub fn decode(&self, z: &LatentTensor) -> Result<CsiTensor> {
        self.check_shape(z.rows, z.cols)?;
        let p = self.spec.patch();
        let (pr, pc) = (self.rows / p, self.cols / p);
        let dim = self.latent_dim();
        if z.values.dim() != (pr * pc, dim) {
            return Err(NwbError::ShapeMismatch(format!(
                "latent shape {:?}, codec expects ({}, {dim})",
                z.values.dim(),
                pr * pc
            )));
        }
        let values = match &self.mixing {
            Some(m) => z.values.dot(m),
            None => z.values.clone(),
        };
        let mut data = Array3::zeros((3, self.rows, self.cols));
        for br in 0..pr {
            for bc in 0..pc {
                let tok = br * pc + bc;
                for ch in 0..3 {
                    for dr in 0..p {
                        for dc in 0..p {
                            data[[ch, br * p + dr, bc * p + dc]] =
                                values[[tok, ch * p * p + dr * p + dc]];
                        }
                    }
                }
            }
        }
        Ok(CsiTensor {
            data,
            grid: z.grid.clone(),
            valid_mask: z.valid_mask.clone(),
            antenna_index: z.antenna_index,
            timestamp: z.timestamp,
        })
    }
}

/// Seeded random orthonormal matrix via modified Gram-Schmidt, run twice for
/// numerical orthogonality at the 1e-14 level.
fn orthonormal_matrix(dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = stream(mix(seed, 0x4f52_5448));
    let mut m = Array2::zeros((dim, dim));
    for v in m.iter_mut() {
        *v = rng.sample::<f64, _>(StandardNormal);
    }
    for _ in 0..2 {
        for i in 0..dim {
            for j in 0..i {
                let proj = m.row(i).dot(&m.row(j));
                let prev = m.row(j).to_owned();
                m.row_mut(i).zip_mut_with(&prev, |a, &b| *a -= proj * b);
            }
            let norm = m.row(i).dot(&m.row(i)).sqrt();
            m.row_mut(i).mapv_inplace(|x| x / norm);
        }
    }
    m
}
