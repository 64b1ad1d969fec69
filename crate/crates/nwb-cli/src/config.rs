//! TOML run configuration: one optional file with a section per pipeline
//! stage. Unknown keys are rejected with their path; command-line flags
//! override file values wherever both exist.

use std::path::Path;

use serde::Deserialize;

use nwb_core::channel::EnvironmentSpec;
use nwb_core::codec::CodecSpec;
use nwb_core::diffusion::ScheduleSpec;
use nwb_core::net::ModelConfig;
use nwb_core::sensing::BreathConfig;
use nwb_core::train::{TrainConfig, TrainSetup};
use nwb_core::{NwbError, Result};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub simulation: SimulationSection,
    pub data: DataSection,
    pub model: ModelSection,
    pub schedule: Option<ScheduleSpec>,
    pub training: TrainingSection,
    pub evaluation: EvaluationSection,
    pub sensing: BreathConfig,
}

impl RunConfig {
    /// Defaults when no file is given; schema errors carry the file path.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text)
            .map_err(|e| NwbError::SchemaViolation(format!("{}: {e}", path.display())))
    }

    pub fn schedule(&self) -> ScheduleSpec {
        self.schedule.unwrap_or_else(|| ScheduleSpec::linear(50))
    }

    pub fn train_setup(&self) -> TrainSetup {
        TrainSetup {
            model: self.model.model_config(),
            codec: self.model.codec_spec(),
            lattice_rows: self.model.lattice_rows,
            lattice_cols: self.model.lattice_cols,
            schedule: self.schedule(),
            train: self.training.resolve(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub count: usize,
    pub subcarriers: usize,
    pub center_freq_hz: f64,
    pub spacing_hz: f64,
    pub antenna: usize,
    pub seed: u64,
    pub environment: EnvironmentSpec,
    /// when present, `simulate` emits one environment's time series instead
    /// of a frame-per-environment family
    pub motion: Option<MotionSection>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            count: 256,
            subcarriers: 128,
            center_freq_hz: 5.18e9,
            spacing_hz: 312.5e3,
            antenna: 0,
            seed: 0,
            environment: EnvironmentSpec::default(),
            motion: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSection {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    /// explicit scene paths; empty → one environment sampled from the family
    #[serde(default)]
    pub paths: Vec<ScenePath>,
    pub subjects: Vec<SubjectMotion>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenePath {
    pub gain: f64,
    #[serde(default)]
    pub phase: f64,
    pub delay_ns: f64,
    #[serde(default = "quarter_turn")]
    pub aoa: f64,
}

fn quarter_turn() -> f64 {
    std::f64::consts::FRAC_PI_2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectMotion {
    /// index into the scene's path list
    pub path: usize,
    pub amplitude_ns: f64,
    pub rate_hz: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// fraction of frames kept for training
    pub split: f64,
    /// width of the derived narrowband input frames
    pub narrow_subcarriers: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { split: 0.75, narrow_subcarriers: 64 }
    }
}

/// Network and codec geometry; the latent width is fixed by the patch size.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub model_dim: usize,
    pub num_blocks: usize,
    pub num_heads: usize,
    pub embed_dim: usize,
    pub timestep_embed_dim: usize,
    pub patch: usize,
    pub lattice_rows: usize,
    pub lattice_cols: usize,
    /// fixed random-projection codec; absent → plain patchify
    pub frozen_codec_seed: Option<u64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            model_dim: 128,
            num_blocks: 4,
            num_heads: 4,
            embed_dim: 64,
            timestep_embed_dim: 64,
            patch: 4,
            lattice_rows: 8,
            lattice_cols: 16,
            frozen_codec_seed: None,
        }
    }
}

impl ModelSection {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            latent_dim: 3 * self.patch * self.patch,
            model_dim: self.model_dim,
            num_blocks: self.num_blocks,
            num_heads: self.num_heads,
            embed_dim: self.embed_dim,
            timestep_embed_dim: self.timestep_embed_dim,
        }
    }

    pub fn codec_spec(&self) -> CodecSpec {
        match self.frozen_codec_seed {
            Some(seed) => CodecSpec::FrozenLinear { patch: self.patch, seed },
            None => CodecSpec::Patchify { patch: self.patch },
        }
    }
}

/// Per-key overrides on top of the desk-scale training preset.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub epochs: Option<usize>,
    pub total_steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub subband_augment: Option<usize>,
    pub learning_rate: Option<f64>,
    pub weight_decay: Option<f64>,
    pub beta2: Option<f64>,
    pub warmup_epochs: Option<usize>,
    pub min_lr: Option<f64>,
    pub seed: Option<u64>,
}

impl TrainingSection {
    pub fn resolve(&self) -> TrainConfig {
        let d = TrainConfig::desk_scale();
        TrainConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            total_steps: self.total_steps.unwrap_or(d.total_steps),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            subband_augment: self.subband_augment.unwrap_or(d.subband_augment),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            weight_decay: self.weight_decay.unwrap_or(d.weight_decay),
            beta2: self.beta2.unwrap_or(d.beta2),
            warmup_epochs: self.warmup_epochs.unwrap_or(d.warmup_epochs),
            min_lr: self.min_lr.unwrap_or(d.min_lr),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub ks: Vec<usize>,
    pub seed: u64,
    /// copy the measured band into the extrapolated frame
    pub clamp_input_band: bool,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self { ks: vec![2], seed: 0, clamp_input_band: false }
    }
}
