//! Extrapolation inference: narrowband frame in, k×-wider eCSI frame out.
//!
//! The input is normalized by its own peak magnitude and encoded at its true
//! position on the training lattice; a standard-normal virtual container the
//! size of the k× band is then denoised step by step, conditioned on the
//! input latent and the band's frequency embedding, and decoded back to a
//! frame on the expanded grid. Deterministic per seed.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{CsiFrame, FrequencyGrid};
use crate::checkpoint::{latest_checkpoint, load_checkpoint, Checkpoint};
use crate::codec::{CodecSpec, LatentCodec, LatentTensor};
use crate::data::{denormalize, normalize};
use crate::diffusion::{estimate_z0, reverse_step, NoiseSchedule, ScheduleSpec};
use crate::embed::lattice_embedding;
use crate::error::{NwbError, Result};
use crate::metrics::{mse, restrict_to_grid};
use crate::net::{init_parameters, predict_noise, ModelConfig, ModelParameters};
use crate::rng::{mix3, stream};
use crate::tensor::{fit_lattice, from_tensor, to_tensor};

/// Frozen inference bundle: trained parameters plus the codec, lattice, and
/// schedule they were trained with.
pub struct ExtrapolationModel {
    pub params: ModelParameters,
    codec: LatentCodec,
    sched: NoiseSchedule,
}

impl ExtrapolationModel {
    pub fn new(
        params: ModelParameters,
        codec_spec: CodecSpec,
        rows: usize,
        cols: usize,
        schedule: ScheduleSpec,
    ) -> Result<Self> {
        let codec = LatentCodec::new(codec_spec, rows, cols)?;
        if codec.latent_dim() != params.config.latent_dim {
            return Err(NwbError::IncompatibleCheckpoint(format!(
                "codec latent dim {} vs model latent dim {}",
                codec.latent_dim(),
                params.config.latent_dim
            )));
        }
        Ok(Self { params, codec, sched: NoiseSchedule::from_spec(schedule)? })
    }

    /// Untrained model with the same shape: the fresh-initialization baseline.
    pub fn fresh(
        config: ModelConfig,
        codec_spec: CodecSpec,
        rows: usize,
        cols: usize,
        schedule: ScheduleSpec,
        seed: u64,
    ) -> Result<Self> {
        Self::new(init_parameters(config, seed)?, codec_spec, rows, cols, schedule)
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        Self::new(ck.params, ck.codec_spec, ck.lattice_rows, ck.lattice_cols, ck.schedule)
    }

    pub fn codec(&self) -> &LatentCodec {
        &self.codec
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.sched
    }
}

/// Load a model from a checkpoint directory, or from the latest `epoch-N`
/// checkpoint under a training output directory.
pub fn load_model(dir: impl AsRef<Path>) -> Result<ExtrapolationModel> {
    let dir = dir.as_ref();
    let ck = if dir.join("manifest.json").is_file() {
        load_checkpoint(dir)?
    } else {
        let latest = latest_checkpoint(dir)?.ok_or_else(|| {
            NwbError::IncompatibleCheckpoint(format!("no checkpoint under {}", dir.display()))
        })?;
        load_checkpoint(latest)?
    };
    ExtrapolationModel::from_checkpoint(ck)
}

/// One extrapolation result.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation {
    pub ecsi: CsiFrame,
    /// MSE between the regenerated central band (before any clamping) and
    /// the normalized input — a consistency diagnostic, never asserted.
    pub input_residual: f64,
}

/// Extrapolate `input` to a k×-wider eCSI frame.
///
/// With `clamp_input_band` the measured band replaces the regenerated central
/// cells, making the eCSI exactly consistent with the input; without it the
/// whole band is model output.
pub fn extrapolate(
    model: &ExtrapolationModel,
    input: &CsiFrame,
    k: usize,
    seed: u64,
    clamp_input_band: bool,
) -> Result<Extrapolation> {
    let codec = &model.codec;
    let (rows, cols) = (codec.rows(), codec.cols());
    let wide_grid = input.grid.expanded(k)?;
    if wide_grid.num_subcarriers > rows * cols {
        return Err(NwbError::InvalidParameter(format!(
            "k={k} band of {} subcarriers exceeds the {rows}x{cols} training lattice",
            wide_grid.num_subcarriers
        )));
    }
    let lattice_grid: FrequencyGrid = fit_lattice(&wide_grid, rows, cols)?;

    // condition: the input at its true position, normalized by its own peak
    let (input_norm, scale) = normalize(input);
    let tensor_a = to_tensor(&input_norm, &lattice_grid, rows, cols)?;
    let anchor_cell = tensor_a
        .valid_mask
        .iter()
        .position(|&m| m)
        .expect("input band populates the lattice");
    let z_a = codec.encode(&tensor_a)?;
    let embed = lattice_embedding(
        &lattice_grid,
        rows,
        cols,
        codec.spec().patch(),
        anchor_cell as f64,
        model.params.config.embed_dim,
    )?;

    // virtual container sized for the k× band, filled with standard noise
    let zero_wide = CsiFrame::new(
        wide_grid,
        input.antenna_index,
        vec![num_complex::Complex64::new(0.0, 0.0); wide_grid.num_subcarriers],
        input.timestamp,
    )?;
    let template = codec.encode(&to_tensor(&zero_wide, &lattice_grid, rows, cols)?)?;
    let mut rng = stream(mix3(seed, 0x4558_54, k as u64));
    let mut z_t = LatentTensor {
        values: template.values.mapv(|_| rng.sample::<f64, _>(StandardNormal)),
        ..template.clone()
    };

    // ancestral denoising T..1; the final step emits the mean (variance 0)
    for t in (1..=model.sched.t_max()).rev() {
        let eps_hat = predict_noise(&model.params, &z_a, &z_t, &embed, t)?;
        let z0_hat = estimate_z0(&z_t, &eps_hat, t, &model.sched)?;
        let (mean, var) = reverse_step(&z_t, &z0_hat, t, &model.sched)?;
        z_t = if t > 1 {
            let sd = var.sqrt();
            LatentTensor {
                values: mean.values.mapv(|m| m + sd * rng.sample::<f64, _>(StandardNormal)),
                ..mean
            }
        } else {
            mean
        };
    }

    let wide_norm = from_tensor(&codec.decode(&z_t)?)?;
    let residual_band = restrict_to_grid(&wide_norm, &input_norm.grid)?;
    let input_residual = mse(&residual_band, &input_norm)?;

    let mut ecsi = denormalize(&wide_norm, scale);
    if clamp_input_band {
        let offset = (wide_grid.num_subcarriers - input.len()) / 2;
        ecsi.values[offset..offset + input.len()].copy_from_slice(&input.values);
    }
    Ok(Extrapolation { ecsi, input_residual })
}
