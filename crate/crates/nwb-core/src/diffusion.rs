//! Noise schedule, forward corruption, and the reverse ancestral sampler.
//!
//! The schedule is a linear beta ramp with precomputed cumulative products.
//! Forward sampling uses the closed-form marginal; the reverse step returns
//! the posterior mean/variance given an estimate of the clean latent, with
//! alpha_bar(0) defined as 1 so the final step collapses onto the estimate.

use serde::{Deserialize, Serialize};

use crate::codec::LatentTensor;
use crate::error::{NwbError, Result};

/// Serializable schedule description (stored inside checkpoints).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub t_max: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl ScheduleSpec {
    pub fn linear(t_max: usize) -> Self {
        Self { t_max, beta_start: 1e-4, beta_end: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    spec: ScheduleSpec,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    /// Linear beta ramp over `t_max` steps (defaults 1e-4 to 0.02).
    pub fn linear(t_max: usize) -> Result<Self> {
        Self::from_spec(ScheduleSpec::linear(t_max))
    }

    pub fn from_spec(spec: ScheduleSpec) -> Result<Self> {
        if spec.t_max == 0 {
            return Err(NwbError::InvalidParameter("schedule needs at least one step".into()));
        }
        if !(spec.beta_start > 0.0 && spec.beta_end < 1.0 && spec.beta_start <= spec.beta_end) {
            return Err(NwbError::InvalidParameter(format!(
                "beta ramp [{}, {}] outside (0, 1)",
                spec.beta_start, spec.beta_end
            )));
        }
        let t_max = spec.t_max;
        let beta: Vec<f64> = (0..t_max)
            .map(|i| {
                if t_max == 1 {
                    spec.beta_start
                } else {
                    spec.beta_start
                        + (spec.beta_end - spec.beta_start) * i as f64 / (t_max - 1) as f64
                }
            })
            .collect();
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(t_max);
        let mut prod = 1.0;
        for &a in &alpha {
            prod *= a;
            alpha_bar.push(prod);
        }
        Ok(Self { spec, beta, alpha, alpha_bar })
    }

    pub fn spec(&self) -> ScheduleSpec {
        self.spec
    }

    pub fn t_max(&self) -> usize {
        self.spec.t_max
    }

    fn check(&self, t: usize) -> Result<()> {
        if t < 1 || t > self.t_max() {
            return Err(NwbError::TimestepOutOfRange { t, t_max: self.t_max() });
        }
        Ok(())
    }

    pub fn beta(&self, t: usize) -> Result<f64> {
        self.check(t)?;
        Ok(self.beta[t - 1])
    }

    pub fn alpha(&self, t: usize) -> Result<f64> {
        self.check(t)?;
        Ok(self.alpha[t - 1])
    }

    /// Cumulative product of alphas; alpha_bar(0) = 1 by definition.
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Ok(1.0);
        }
        self.check(t)?;
        Ok(self.alpha_bar[t - 1])
    }
}

/// Closed-form forward marginal: z_t = sqrt(abar_t) z_0 + sqrt(1-abar_t) eps.
pub fn forward_sample(
    z_b0: &LatentTensor,
    t: usize,
    eps: &LatentTensor,
    sched: &NoiseSchedule,
) -> Result<LatentTensor> {
    if z_b0.values.dim() != eps.values.dim() {
        return Err(NwbError::ShapeMismatch(format!(
            "latent {:?} vs noise {:?}",
            z_b0.values.dim(),
            eps.values.dim()
        )));
    }
    sched.check(t)?;
    let abar = sched.alpha_bar(t)?;
    let (a, b) = (abar.sqrt(), (1.0 - abar).sqrt());
    let values = z_b0.values.mapv(|v| a * v) + &eps.values.mapv(|v| b * v);
    Ok(LatentTensor { values, ..z_b0.clone() })
}

/// Invert the forward marginal given a noise estimate:
/// z0 = (z_t - sqrt(1-abar_t) eps_hat) / sqrt(abar_t).
pub fn estimate_z0(
    z_bt: &LatentTensor,
    eps_hat: &LatentTensor,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<LatentTensor> {
    if z_bt.values.dim() != eps_hat.values.dim() {
        return Err(NwbError::ShapeMismatch(format!(
            "latent {:?} vs noise estimate {:?}",
            z_bt.values.dim(),
            eps_hat.values.dim()
        )));
    }
    sched.check(t)?;
    let abar = sched.alpha_bar(t)?;
    let (a, b) = (abar.sqrt(), (1.0 - abar).sqrt());
    let values = (&z_bt.values - &eps_hat.values.mapv(|v| b * v)).mapv(|v| v / a);
    Ok(LatentTensor { values, ..z_bt.clone() })
}

/// Posterior parameters of the reverse transition given the clean estimate:
/// mean = sqrt(abar_{t-1}) beta_t / (1-abar_t) * z0_hat
///      + sqrt(alpha_t) (1-abar_{t-1}) / (1-abar_t) * z_t,
/// variance = (1-abar_{t-1}) / (1-abar_t) * beta_t.
pub fn reverse_step(
    z_bt: &LatentTensor,
    z0_hat: &LatentTensor,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<(LatentTensor, f64)> {
    if z_bt.values.dim() != z0_hat.values.dim() {
        return Err(NwbError::ShapeMismatch(format!(
            "latent {:?} vs clean estimate {:?}",
            z_bt.values.dim(),
            z0_hat.values.dim()
        )));
    }
    let beta_t = sched.beta(t)?;
    let alpha_t = sched.alpha(t)?;
    let abar_t = sched.alpha_bar(t)?;
    let abar_prev = sched.alpha_bar(t - 1)?;
    let c0 = abar_prev.sqrt() * beta_t / (1.0 - abar_t);
    let ct = alpha_t.sqrt() * (1.0 - abar_prev) / (1.0 - abar_t);
    let var = (1.0 - abar_prev) / (1.0 - abar_t) * beta_t;
    let values = z0_hat.values.mapv(|v| c0 * v) + &z_bt.values.mapv(|v| ct * v);
    Ok((LatentTensor { values, ..z_bt.clone() }, var))
}
