//! Training loop: self-conditioned sub-band sampling, noise-prediction loss,
//! decoupled weight-decay adaptive-moment updates, per-epoch checkpoints.
//!
//! Every random draw is keyed by (run seed, absolute step, lane), never by
//! shared mutable generator state, so an interrupted run resumed from its
//! latest checkpoint replays the exact same trajectory bit for bit.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::FrequencyGrid;
use crate::checkpoint::{save_checkpoint, Checkpoint, TrainProgress};
use crate::codec::{CodecSpec, LatentCodec, LatentTensor};
use crate::data::{normalize, sample_subband_with, slice_frame, DatasetRecord};
use crate::diffusion::{forward_sample, NoiseSchedule, ScheduleSpec};
use crate::embed::lattice_embedding;
use crate::error::{NwbError, Result};
use crate::net::{
    backward_batch, forward_batch, init_parameters, BatchInput, ModelConfig, ModelParameters,
};
use crate::rng::{mix3, stream};
use crate::tensor::{to_tensor, to_tensor_auto};

/// First-moment decay of the adaptive update (companion to the configurable
/// second-moment decay).
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_EPS: f64 = 1e-8;

// rng lanes: frame picks (run loop), per-frame draws, per-pair draws
const LANE_PICK: u64 = u64::MAX;
const LANE_FRAME: u64 = 0;
const STEP_TAG: u64 = 0x5354_4550;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub total_steps: usize,
    pub batch_size: usize,
    pub subband_augment: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta2: f64,
    pub warmup_epochs: usize,
    pub min_lr: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Paper-scale preset (GPU-sized; hours on one core).
    pub fn full_scale() -> Self {
        Self {
            epochs: 100,
            total_steps: 20_000,
            batch_size: 1024,
            subband_augment: 4,
            learning_rate: 0.02,
            weight_decay: 0.01,
            beta2: 0.99,
            warmup_epochs: 10,
            min_lr: 0.0,
            seed: 0,
        }
    }

    /// Single-core preset: small batch and a learning rate that adaptive
    /// moments tolerate at that batch size.
    pub fn desk_scale() -> Self {
        Self {
            epochs: 20,
            total_steps: 2_000,
            batch_size: 64,
            subband_augment: 4,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            beta2: 0.99,
            warmup_epochs: 1,
            min_lr: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0
            || self.total_steps == 0
            || self.batch_size == 0
            || self.subband_augment == 0
        {
            return Err(NwbError::InvalidParameter(
                "epochs, steps, batch size, and sub-band augment must be positive".into(),
            ));
        }
        if self.warmup_epochs >= self.epochs {
            return Err(NwbError::InvalidParameter(format!(
                "warmup ({} epochs) must be shorter than the run ({} epochs)",
                self.warmup_epochs, self.epochs
            )));
        }
        if !(self.learning_rate.is_finite()
            && self.learning_rate >= 0.0
            && self.weight_decay.is_finite()
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.beta2)
            && self.min_lr >= 0.0
            && self.min_lr <= self.learning_rate)
        {
            return Err(NwbError::InvalidParameter(
                "learning-rate / decay settings out of range".into(),
            ));
        }
        Ok(())
    }
}

/// Warmup-ramped cosine schedule: linear 0 -> learning_rate over the warmup
/// epochs, then cosine decay down to min_lr at the final step.
pub fn lr_at(step: usize, cfg: &TrainConfig) -> f64 {
    let total = cfg.total_steps as f64;
    let warmup = total * cfg.warmup_epochs as f64 / cfg.epochs as f64;
    let s = step as f64;
    if s < warmup {
        return cfg.learning_rate * s / warmup;
    }
    let span = (total - warmup).max(1.0);
    let progress = ((s - warmup) / span).clamp(0.0, 1.0);
    cfg.min_lr
        + (cfg.learning_rate - cfg.min_lr) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Bundle of everything a training run is parameterized by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSetup {
    pub model: ModelConfig,
    pub codec: CodecSpec,
    pub lattice_rows: usize,
    pub lattice_cols: usize,
    pub schedule: ScheduleSpec,
    pub train: TrainConfig,
}

impl TrainSetup {
    /// Desk-scale bundle for frames of `num_subcarriers` (which must fill
    /// the lattice exactly at stride 1 for training).
    pub fn desk_scale(num_subcarriers: usize) -> Self {
        let patch = 4;
        let (rows, cols) = (8, 16);
        debug_assert_eq!(rows * cols, num_subcarriers);
        Self {
            model: ModelConfig::desk_scale(3 * patch * patch),
            codec: CodecSpec::Patchify { patch },
            lattice_rows: rows,
            lattice_cols: cols,
            schedule: ScheduleSpec::linear(50),
            train: TrainConfig::desk_scale(),
        }
    }
}

/// Mutable training state: parameters, optimizer moments, step counter.
pub struct Trainer {
    pub params: ModelParameters,
    opt_m: ModelParameters,
    opt_v: ModelParameters,
    pub step: usize,
    pub config: TrainConfig,
    codec: LatentCodec,
    sched: NoiseSchedule,
}

impl Trainer {
    pub fn new(setup: &TrainSetup) -> Result<Self> {
        setup.train.validate()?;
        let codec = LatentCodec::new(setup.codec, setup.lattice_rows, setup.lattice_cols)?;
        if codec.latent_dim() != setup.model.latent_dim {
            return Err(NwbError::InvalidParameter(format!(
                "codec latent dim {} vs model latent dim {}",
                codec.latent_dim(),
                setup.model.latent_dim
            )));
        }
        Ok(Self {
            params: init_parameters(setup.model, setup.train.seed)?,
            opt_m: ModelParameters::zeros(setup.model)?,
            opt_v: ModelParameters::zeros(setup.model)?,
            step: 0,
            config: setup.train,
            codec,
            sched: NoiseSchedule::from_spec(setup.schedule)?,
        })
    }

    /// Resume from a checkpoint; the checkpoint must describe the same model,
    /// codec, lattice, and schedule as `setup`.
    pub fn from_checkpoint(ck: Checkpoint, setup: &TrainSetup) -> Result<Self> {
        setup.train.validate()?;
        if ck.params.config != setup.model
            || ck.codec_spec != setup.codec
            || ck.lattice_rows != setup.lattice_rows
            || ck.lattice_cols != setup.lattice_cols
            || ck.schedule != setup.schedule
        {
            return Err(NwbError::IncompatibleCheckpoint(
                "checkpoint was produced by a different setup".into(),
            ));
        }
        Ok(Self {
            params: ck.params,
            opt_m: ck.opt_m,
            opt_v: ck.opt_v,
            step: ck.progress.step,
            config: setup.train,
            codec: LatentCodec::new(setup.codec, setup.lattice_rows, setup.lattice_cols)?,
            sched: NoiseSchedule::from_spec(setup.schedule)?,
        })
    }

    pub fn checkpoint(&self, epoch: usize) -> Checkpoint {
        Checkpoint {
            params: self.params.clone(),
            opt_m: self.opt_m.clone(),
            opt_v: self.opt_v.clone(),
            codec_spec: self.codec.spec(),
            lattice_rows: self.codec.rows(),
            lattice_cols: self.codec.cols(),
            schedule: self.sched.spec(),
            progress: TrainProgress { step: self.step, epoch },
        }
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.sched
    }

    pub fn codec(&self) -> &LatentCodec {
        &self.codec
    }

    fn encode_lattice(&self, frame: &crate::channel::CsiFrame) -> Result<(LatentTensor, FrequencyGrid)> {
        let (tensor, stride) = to_tensor_auto(frame, self.codec.rows(), self.codec.cols())?;
        if stride != 1 {
            return Err(NwbError::InvalidParameter(format!(
                "frame of {} subcarriers needs stride {stride} on the {}x{} lattice; \
                 training requires frames that fit at stride 1",
                frame.len(),
                self.codec.rows(),
                self.codec.cols()
            )));
        }
        let grid = tensor.grid.clone();
        Ok((self.codec.encode(&tensor)?, grid))
    }

    /// Deterministically assemble the stacked pair batch for `step` from the
    /// given records: per frame one shared timestep and full-band latent,
    /// `subband_augment` sub-band conditions each with fresh noise.
    pub fn assemble_batch(
        &self,
        records: &[&DatasetRecord],
        step: usize,
    ) -> Result<(BatchInput, Array2<f64>)> {
        if records.is_empty() {
            return Err(NwbError::EmptyDataset);
        }
        let step_seed = mix3(self.config.seed, STEP_TAG, step as u64);
        let n_tokens = self.codec.tokens();
        let latent_dim = self.codec.latent_dim();
        let pairs = records.len() * self.config.subband_augment;
        let rows_total = pairs * n_tokens;
        let mut z_bt = Array2::zeros((rows_total, latent_dim));
        let mut z_a = Array2::zeros((rows_total, latent_dim));
        let mut embed = Array2::zeros((rows_total, self.params.config.embed_dim));
        let mut eps_all = Array2::zeros((rows_total, latent_dim));
        let mut timesteps = Vec::with_capacity(pairs);
        let patch = self.codec.spec().patch();

        for (j, rec) in records.iter().enumerate() {
            let mut frame_rng = stream(mix3(step_seed, LANE_FRAME, j as u64));
            let t = frame_rng.random_range(1..=self.sched.t_max());
            let (frame_norm, _) = normalize(&rec.frame);
            let (z_b, lattice_grid) = self.encode_lattice(&frame_norm)?;

            for i in 0..self.config.subband_augment {
                let mut pair_rng = stream(mix3(step_seed, 1 + j as u64, i as u64));
                let sel = sample_subband_with(&mut pair_rng, rec.frame.len())?;
                let narrow = slice_frame(&rec.frame, &sel)?;
                let (narrow_norm, _) = normalize(&narrow);
                let tensor_a =
                    to_tensor(&narrow_norm, &lattice_grid, self.codec.rows(), self.codec.cols())?;
                let anchor_cell = tensor_a
                    .valid_mask
                    .iter()
                    .position(|&m| m)
                    .expect("sub-band placement sets mask cells");
                let za_tok = self.codec.encode(&tensor_a)?;

                let mut eps = z_b.clone();
                for v in eps.values.iter_mut() {
                    *v = pair_rng.sample::<f64, _>(StandardNormal);
                }
                let zbt_tok = forward_sample(&z_b, t, &eps, &self.sched)?;
                let e = lattice_embedding(
                    &lattice_grid,
                    self.codec.rows(),
                    self.codec.cols(),
                    patch,
                    anchor_cell as f64,
                    self.params.config.embed_dim,
                )?;

                let p = j * self.config.subband_augment + i;
                let rows = ndarray::s![p * n_tokens..(p + 1) * n_tokens, ..];
                z_bt.slice_mut(rows).assign(&zbt_tok.values);
                z_a.slice_mut(rows).assign(&za_tok.values);
                embed.slice_mut(rows).assign(&e.values);
                eps_all.slice_mut(rows).assign(&eps.values);
                timesteps.push(t);
            }
        }
        Ok((BatchInput { z_bt, z_a, embed, timesteps, n_tokens }, eps_all))
    }

    /// One optimization step on the given frame batch. Returns the loss.
    pub fn train_step(&mut self, records: &[&DatasetRecord]) -> Result<f64> {
        let step = self.step;
        let (input, targets) = self.assemble_batch(records, step)?;
        let (y, cache) = forward_batch(&self.params, &input)?;
        let scale = 1.0 / y.len() as f64;
        let diff = &y - &targets;
        let loss = diff.iter().map(|d| d * d).sum::<f64>() * scale;
        if !loss.is_finite() {
            return Err(NwbError::NonFiniteLoss { step, loss });
        }
        let d_y = diff.mapv(|d| 2.0 * d * scale);
        let grads = backward_batch(&self.params, &input, &cache, &d_y)?;

        let lr = lr_at(step, &self.config);
        let (b1, b2) = (ADAM_BETA1, self.config.beta2);
        let t_adam = (step + 1) as i32;
        let bc1 = 1.0 - b1.powi(t_adam);
        let bc2 = 1.0 - b2.powi(t_adam);
        let wd = self.config.weight_decay;
        let mut p_arrays = self.params.named_arrays_mut();
        let mut m_arrays = self.opt_m.named_arrays_mut();
        let mut v_arrays = self.opt_v.named_arrays_mut();
        let g_arrays = grads.named_arrays();
        for idx in 0..p_arrays.len() {
            let p = p_arrays[idx].1.as_slice_mut().unwrap();
            let m = m_arrays[idx].1.as_slice_mut().unwrap();
            let v = v_arrays[idx].1.as_slice_mut().unwrap();
            let g = g_arrays[idx].1.as_slice().unwrap();
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                p[k] -= lr * (mhat / (vhat.sqrt() + ADAM_EPS) + wd * p[k]);
            }
        }
        self.step += 1;
        Ok(loss)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss per step executed in this run (resumes start mid-schedule).
    pub losses: Vec<f64>,
    pub lrs: Vec<f64>,
    pub start_step: usize,
    pub wall_clock_s: f64,
    pub final_checkpoint: PathBuf,
}

/// Record indices of the step's batch: `batch_size` independent uniform
/// draws keyed by (seed, step, slot), so any step's batch can be rebuilt
/// without replaying the run.
pub fn step_batch_indices(
    seed: u64,
    step: usize,
    batch_size: usize,
    dataset_len: usize,
) -> Vec<usize> {
    let step_seed = mix3(seed, STEP_TAG, step as u64);
    (0..batch_size)
        .map(|j| {
            let mut rng = stream(mix3(step_seed, LANE_PICK, j as u64));
            rng.random_range(0..dataset_len)
        })
        .collect()
}

/// Full training run with per-epoch checkpoints. If `out_dir` already holds
/// checkpoints from the same setup, training resumes after the latest one.
pub fn run_training(
    dataset: &[DatasetRecord],
    setup: &TrainSetup,
    out_dir: impl AsRef<Path>,
) -> Result<TrainReport> {
    let out_dir = out_dir.as_ref();
    if dataset.is_empty() {
        return Err(NwbError::EmptyDataset);
    }
    setup.train.validate()?;
    let mut trainer = match crate::checkpoint::latest_checkpoint(out_dir)? {
        Some(dir) => Trainer::from_checkpoint(crate::checkpoint::load_checkpoint(dir)?, setup)?,
        None => Trainer::new(setup)?,
    };
    let cfg = setup.train;
    let steps_per_epoch = cfg.total_steps.div_ceil(cfg.epochs);
    let start_step = trainer.step;
    let started = Instant::now();
    let mut losses = Vec::new();
    let mut lrs = Vec::new();
    let mut final_dir = out_dir.join(format!(
        "epoch-{:04}",
        start_step.div_ceil(steps_per_epoch)
    ));
    while trainer.step < cfg.total_steps {
        let step = trainer.step;
        let batch: Vec<&DatasetRecord> =
            step_batch_indices(cfg.seed, step, cfg.batch_size, dataset.len())
                .into_iter()
                .map(|i| &dataset[i])
                .collect();
        lrs.push(lr_at(step, &cfg));
        losses.push(trainer.train_step(&batch)?);
        let done = trainer.step;
        if done % steps_per_epoch == 0 || done == cfg.total_steps {
            let epoch = done.div_ceil(steps_per_epoch);
            final_dir = out_dir.join(format!("epoch-{epoch:04}"));
            save_checkpoint(&final_dir, &trainer.checkpoint(epoch))?;
        }
    }
    let report = TrainReport {
        losses,
        lrs,
        start_step,
        wall_clock_s: started.elapsed().as_secs_f64(),
        final_checkpoint: final_dir,
    };
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_environment, synthesize_csi, EnvironmentSpec};
    use crate::checkpoint::load_checkpoint;

    /// Tiny setup: 32-subcarrier frames on a 4x8 lattice, patch 2.
    fn tiny_setup() -> TrainSetup {
        TrainSetup {
            model: ModelConfig {
                latent_dim: 12,
                model_dim: 16,
                num_blocks: 2,
                num_heads: 2,
                embed_dim: 8,
                timestep_embed_dim: 8,
            },
            codec: CodecSpec::Patchify { patch: 2 },
            lattice_rows: 4,
            lattice_cols: 8,
            schedule: ScheduleSpec::linear(50),
            train: TrainConfig {
                epochs: 3,
                total_steps: 6,
                batch_size: 2,
                subband_augment: 2,
                learning_rate: 1e-3,
                weight_decay: 0.01,
                beta2: 0.99,
                warmup_epochs: 1,
                min_lr: 0.0,
                seed: 7,
            },
        }
    }

    fn tiny_dataset(count: usize) -> Vec<DatasetRecord> {
        let spec = EnvironmentSpec { path_count: (2, 2), ..Default::default() };
        (0..count)
            .map(|i| {
                let e = sample_environment(&spec, i as u64).unwrap();
                let g = FrequencyGrid::new(5.18e9, 312.5e3, 32).unwrap();
                let f = synthesize_csi(&e, &g, 0).unwrap();
                DatasetRecord::new(f, e.label.clone())
            })
            .collect()
    }

    #[test]
    fn first_loss_is_near_one() {
        // zero-initialized output conv predicts zero noise, so the loss is
        // the mean square of standard-normal targets
        let setup = tiny_setup();
        let data = tiny_dataset(4);
        let mut tr = Trainer::new(&setup).unwrap();
        let batch: Vec<&DatasetRecord> = data.iter().take(2).collect();
        let loss = tr.train_step(&batch).unwrap();
        assert!((loss - 1.0).abs() < 0.3, "first loss {loss}");
        assert!(loss >= 0.0);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_untouched() {
        let mut setup = tiny_setup();
        setup.train.learning_rate = 0.0;
        setup.train.min_lr = 0.0;
        let data = tiny_dataset(4);
        let mut tr = Trainer::new(&setup).unwrap();
        let before = tr.params.clone();
        let batch: Vec<&DatasetRecord> = data.iter().take(2).collect();
        tr.train_step(&batch).unwrap();
        tr.train_step(&batch).unwrap();
        for ((_, a), (_, b)) in before.named_arrays().iter().zip(tr.params.named_arrays()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let setup = tiny_setup();
        let data = tiny_dataset(6);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let r1 = run_training(&data, &setup, d1.path()).unwrap();
        let r2 = run_training(&data, &setup, d2.path()).unwrap();
        assert_eq!(r1.losses.len(), 6);
        for (a, b) in r1.losses.iter().zip(&r2.losses) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // loss and lr series align with executed steps
        assert_eq!(r1.lrs.len(), r1.losses.len());
        assert_eq!(lr_at(0, &setup.train), 0.0);
    }

    #[test]
    fn resume_replays_the_uninterrupted_trajectory() {
        // interrupt a finished run by deleting its last checkpoint, then
        // resume with the same setup: steps 4..6 must replay bit for bit
        let setup = tiny_setup();
        let data = tiny_dataset(6);
        let dir = tempfile::tempdir().unwrap();
        let full = run_training(&data, &setup, dir.path()).unwrap();
        assert_eq!(full.losses.len(), 6);
        let ck_full = load_checkpoint(&full.final_checkpoint).unwrap();
        assert_eq!(ck_full.progress.step, 6);

        std::fs::remove_dir_all(&full.final_checkpoint).unwrap();
        let part2 = run_training(&data, &setup, dir.path()).unwrap();
        assert_eq!(part2.start_step, 4);
        assert_eq!(part2.losses.len(), 2);
        for (a, b) in part2.losses.iter().zip(&full.losses[4..]) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let ck_resumed = load_checkpoint(&part2.final_checkpoint).unwrap();
        assert_eq!(ck_full, ck_resumed);
    }

    #[test]
    fn trainer_batch_gradients_match_finite_differences() {
        // re-run the finite-difference oracle on a trainer-assembled batch:
        // spot-check a stride of entries in every parameter group
        let setup = tiny_setup();
        let data = tiny_dataset(3);
        let mut tr = Trainer::new(&setup).unwrap();
        // non-degenerate conv so gradients reach every group
        {
            let mut rng = stream(mix3(99, 0, 0));
            for k in &mut tr.params.conv {
                for v in k.iter_mut() {
                    *v = 0.25 * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
        let batch: Vec<&DatasetRecord> = data.iter().collect();
        let (input, targets) = tr.assemble_batch(&batch, 0).unwrap();
        let loss_of = |params: &ModelParameters| -> f64 {
            let (y, _) = forward_batch(params, &input).unwrap();
            (&y - &targets).iter().map(|d| d * d).sum::<f64>() / y.len() as f64
        };
        let (y, cache) = forward_batch(&tr.params, &input).unwrap();
        let d_y = (&y - &targets).mapv(|d| 2.0 * d / y.len() as f64);
        let grads = backward_batch(&tr.params, &input, &cache, &d_y).unwrap();
        // step large enough that central differences sit above the f64 noise
        // floor of the forward pass even for 1e-7-scale gradients
        let h = 1e-4;
        let groups = tr.params.named_arrays().len();
        for gi in 0..groups {
            let len = tr.params.named_arrays()[gi].1.len();
            let name = tr.params.named_arrays()[gi].0.clone();
            let stride = (len / 7).max(1);
            for idx in (0..len).step_by(stride) {
                let orig = tr.params.named_arrays()[gi].1.as_slice().unwrap()[idx];
                tr.params.named_arrays_mut()[gi].1.as_slice_mut().unwrap()[idx] = orig + h;
                let lp = loss_of(&tr.params);
                tr.params.named_arrays_mut()[gi].1.as_slice_mut().unwrap()[idx] = orig - h;
                let lm = loss_of(&tr.params);
                tr.params.named_arrays_mut()[gi].1.as_slice_mut().unwrap()[idx] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let an = grads.named_arrays()[gi].1.as_slice().unwrap()[idx];
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
                assert!(rel <= 1e-4, "{name}[{idx}]: analytic {an:.3e} vs fd {fd:.3e}");
            }
        }
    }

    #[test]
    fn lr_schedule_reference_points() {
        let cfg = TrainConfig {
            epochs: 100,
            total_steps: 1000,
            batch_size: 1,
            subband_augment: 1,
            learning_rate: 0.02,
            weight_decay: 0.0,
            beta2: 0.99,
            warmup_epochs: 10,
            min_lr: 0.002,
            seed: 0,
        };
        assert_eq!(lr_at(0, &cfg), 0.0);
        // warmup covers 100 steps; halfway up the ramp
        assert!((lr_at(50, &cfg) - 0.01).abs() < 1e-15);
        assert!((lr_at(100, &cfg) - 0.02).abs() < 1e-15);
        // cosine midpoint: step 100 + 450
        let mid = 0.002 + (0.02 - 0.002) * 0.5;
        assert!((lr_at(550, &cfg) - mid).abs() < 1e-12);
        assert_eq!(lr_at(1000, &cfg), 0.002);
        assert_eq!(lr_at(5000, &cfg), 0.002);
    }

    #[test]
    fn empty_dataset_rejected() {
        let setup = tiny_setup();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            run_training(&[], &setup, dir.path()),
            Err(NwbError::EmptyDataset)
        ));
    }

    #[test]
    fn exploding_update_aborts_with_nonfinite_loss() {
        // row normalization keeps hidden activations bounded no matter how
        // far the weights run, so the overflow must come through the output
        // convolution itself: one adaptive step moves it to ~±lr, and the
        // next forward pass squares ~1e156-scale predictions into the loss
        let mut setup = tiny_setup();
        setup.train.learning_rate = 1e155;
        setup.train.weight_decay = 0.0;
        setup.train.warmup_epochs = 0;
        let data = tiny_dataset(4);
        let dir = tempfile::tempdir().unwrap();
        let err = run_training(&data, &setup, dir.path());
        assert!(
            matches!(err, Err(NwbError::NonFiniteLoss { .. })),
            "expected divergence, got {err:?}"
        );
    }

    #[test]
    fn incompatible_checkpoint_rejected() {
        let setup = tiny_setup();
        let data = tiny_dataset(4);
        let dir = tempfile::tempdir().unwrap();
        run_training(&data, &setup, dir.path()).unwrap();
        let mut other = setup;
        other.model.model_dim = 32;
        assert!(matches!(
            run_training(&data, &other, dir.path()),
            Err(NwbError::IncompatibleCheckpoint(_))
        ));
    }
}
