//! Neuro-Wideband (NWB) core.
//!
//! Expands the effective sensing bandwidth of narrowband WiFi CSI by learned
//! extrapolation: a multipath channel simulator provides physically grounded
//! frames and exact wideband ground truth; a self-conditioned latent
//! diffusion model with a frequency-aware transformer generates extrapolated
//! CSI (eCSI) over a k×-wider band; channel metrics (MSE, impulse-response
//! correlation) and two sensing case studies (time-of-flight ranging,
//! multi-person breathing estimation) validate the result.

pub mod channel;
pub mod checkpoint;
pub mod codec;
pub mod data;
pub mod diffusion;
pub mod embed;
pub mod error;
pub mod metrics;
pub mod net;
pub mod pipeline;
pub mod rng;
pub mod sensing;
pub mod tensor;
pub mod train;

pub use channel::{
    CsiFrame, EnvironmentSpec, FrequencyGrid, MotionProfile, MultipathEnvironment,
    PropagationPath,
};
pub use error::{NwbError, Result};
