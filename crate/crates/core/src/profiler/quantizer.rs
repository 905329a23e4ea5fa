use serde::{Deserialize, Serialize};

use crate::channel::SystemConfig;
use crate::error::{Error, Result};
use crate::wrap_phase;

/// Uniform mid-tread quantizer applied to path parameters before
/// reconstruction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    /// Delay step, seconds.
    pub delay_step: f64,
    /// Linear amplitude step.
    pub amp_step: f64,
    /// Phase step, radians.
    pub phase_step: f64,
}

impl QuantizerSpec {
    /// Defaults: delay step `T_s / (64·n_st)` (one sinc bank entry),
    /// amplitude step 1e-3 and phase step `2π/4096`.
    pub fn for_config(cfg: &SystemConfig) -> Self {
        Self {
            delay_step: cfg.tap_spacing() / 64.0,
            amp_step: 1e-3,
            phase_step: std::f64::consts::TAU / 4096.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if ok(self.delay_step) && ok(self.amp_step) && ok(self.phase_step) {
            Ok(())
        } else {
            Err(Error::Config("quantizer steps must be positive and finite".into()))
        }
    }

    #[inline]
    pub fn delay(&self, tau: f64) -> f64 {
        (tau / self.delay_step).round() * self.delay_step
    }

    #[inline]
    pub fn amplitude(&self, alpha: f64) -> f64 {
        ((alpha / self.amp_step).round() * self.amp_step).max(0.0)
    }

    #[inline]
    pub fn phase(&self, phi: f64) -> f64 {
        wrap_phase((phi / self.phase_step).round() * self.phase_step)
    }
}
