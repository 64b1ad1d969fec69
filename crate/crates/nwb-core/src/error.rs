//! Error type shared across the crate.
//!
//! Every failure mode carries enough context to be actionable from a CLI
//! message, and `kind()` gives a stable machine-readable tag per variant.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NwbError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("environment has no propagation paths")]
    EmptyPaths,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("expansion factor must be >= 2, got {0}")]
    ExpansionTooSmall(usize),

    #[error(
        "narrow band of {num_subcarriers} subcarriers cannot expand by k={k}: \
         offset {num_subcarriers}*({k}-1)/2 is not an integer subcarrier count"
    )]
    MisalignedExpansion { num_subcarriers: usize, k: usize },

    #[error("grids are misaligned: {0}")]
    GridMismatch(String),

    #[error("sampling rate {rate_hz} Hz below Nyquist for motion at {motion_hz} Hz")]
    NyquistViolation { rate_hz: f64, motion_hz: f64 },

    #[error("frame too short: {len} subcarriers, need at least {min}")]
    FrameTooShort { len: usize, min: usize },

    #[error("valid mask is not one contiguous run")]
    NonContiguousMask,

    #[error("tensor dims ({rows}x{cols}) not divisible by patch size {patch}")]
    IndivisibleDims { rows: usize, cols: usize, patch: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("timestep {t} outside schedule range [1, {t_max}]")]
    TimestepOutOfRange { t: usize, t_max: usize },

    #[error("bad magic bytes: not an NWBD file")]
    BadMagic,

    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("file truncated: {0}")]
    Truncated(String),

    #[error("schema violation: {0}")]
    SchemaViolation(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("checkpoint incompatible: {0}")]
    IncompatibleCheckpoint(String),

    #[error("non-finite loss at step {step}: {loss}")]
    NonFiniteLoss { step: usize, loss: f64 },

    #[error("zero-variance profile: correlation undefined")]
    ZeroVariance,

    #[error("series too short: {len} frames, window needs {window}")]
    SeriesTooShort { len: usize, window: usize },

    #[error("no secondary CIR peaks found (only the direct path persists)")]
    NoSecondaryPeaks,

    #[error("all-zero impulse response")]
    AllZeroCir,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl NwbError {
    /// Stable machine-readable tag for this error class.
    pub fn kind(&self) -> &'static str {
        match self {
            NwbError::InvalidParameter(_) => "invalid_parameter",
            NwbError::EmptyPaths => "empty_paths",
            NwbError::NonFinite(_) => "non_finite",
            NwbError::ExpansionTooSmall(_) => "expansion_too_small",
            NwbError::MisalignedExpansion { .. } => "misaligned_expansion",
            NwbError::GridMismatch(_) => "grid_mismatch",
            NwbError::NyquistViolation { .. } => "nyquist_violation",
            NwbError::FrameTooShort { .. } => "frame_too_short",
            NwbError::NonContiguousMask => "non_contiguous_mask",
            NwbError::IndivisibleDims { .. } => "indivisible_dims",
            NwbError::ShapeMismatch(_) => "shape_mismatch",
            NwbError::TimestepOutOfRange { .. } => "timestep_out_of_range",
            NwbError::BadMagic => "bad_magic",
            NwbError::UnsupportedVersion { .. } => "unsupported_version",
            NwbError::Truncated(_) => "truncated",
            NwbError::SchemaViolation(_) => "schema_violation",
            NwbError::EmptyDataset => "empty_dataset",
            NwbError::IncompatibleCheckpoint(_) => "incompatible_checkpoint",
            NwbError::NonFiniteLoss { .. } => "non_finite_loss",
            NwbError::ZeroVariance => "zero_variance",
            NwbError::SeriesTooShort { .. } => "series_too_short",
            NwbError::NoSecondaryPeaks => "no_secondary_peaks",
            NwbError::AllZeroCir => "all_zero_cir",
            NwbError::Io(_) => "io",
            NwbError::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, NwbError>;
