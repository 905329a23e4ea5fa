use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::channel::SystemConfig;
use crate::error::{Error, Result};
use crate::profiler::{EvalWindow, QuantizerSpec};

/// Search granularity κ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Coarse,
    Medium,
    Fine,
}

/// Parameter variation `(Δτ, Δα, Δφ)` of one level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSet {
    /// Seconds.
    pub delay: f64,
    pub amplitude: f64,
    /// Radians.
    pub phase: f64,
}

impl StepSet {
    fn positive(&self) -> bool {
        [self.delay, self.amplitude, self.phase].iter().all(|x| *x > 0.0 && x.is_finite())
    }

    fn dominates(&self, other: &StepSet) -> bool {
        self.delay >= other.delay && self.amplitude >= other.amplitude && self.phase >= other.phase
    }
}

/// Step sizes per level plus iteration and tracking controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSchedule {
    pub coarse: StepSet,
    pub medium: StepSet,
    pub fine: StepSet,
    pub max_iterations_per_level: usize,
    /// A level stops once one sweep improves the window error by less than
    /// this fraction.
    pub convergence_tol: f64,
    /// Tracking confines each parameter to `±radius · Δ_medium` of its
    /// previous value.
    pub tracking_radius: f64,
    pub max_model_order: usize,
    pub window: EvalWindow,
    /// Tracking steps ending above this loss are flagged as lost.
    pub track_lost_db: f64,
    /// Minimum window energy a tracking target must carry.
    pub energy_floor: f64,
}

impl SearchSchedule {
    /// Standard schedule: coarse `(T_s/2, 0.1, π/8)`, medium
    /// `(T_s/16, 0.02, π/32)`, fine `(T_s/128, 0.002, π/256)`.
    pub fn for_config(cfg: &SystemConfig) -> Self {
        let ts = cfg.sample_period();
        Self {
            coarse: StepSet { delay: ts / 2.0, amplitude: 0.1, phase: PI / 8.0 },
            medium: StepSet { delay: ts / 16.0, amplitude: 0.02, phase: PI / 32.0 },
            fine: StepSet { delay: ts / 128.0, amplitude: 0.002, phase: PI / 256.0 },
            max_iterations_per_level: 200,
            convergence_tol: 1e-6,
            tracking_radius: 8.0,
            max_model_order: 16,
            window: EvalWindow::new(1, cfg.obs_window_w),
            track_lost_db: -10.0,
            energy_floor: 1e-12,
        }
    }

    /// Named presets: `standard` (the default), `lattice32` (fine delay step
    /// `T_s/32`, cheaper but limited to roughly −35 dB on off-lattice paths)
    /// and `precise` (fine delay step `T_s/384`).
    pub fn preset(name: &str, cfg: &SystemConfig) -> Result<Self> {
        let ts = cfg.sample_period();
        let base = Self::for_config(cfg);
        match name {
            "standard" => Ok(base),
            "lattice32" => Ok(Self {
                medium: StepSet { delay: ts / 8.0, amplitude: 0.02, phase: PI / 32.0 },
                fine: StepSet { delay: ts / 32.0, amplitude: 0.005, phase: PI / 128.0 },
                ..base
            }),
            "precise" => Ok(Self {
                fine: StepSet { delay: ts / 384.0, amplitude: 0.001, phase: PI / 1024.0 },
                ..base
            }),
            other => Err(Error::Config(format!("unknown schedule preset '{other}'"))),
        }
    }

    pub fn steps(&self, level: Level) -> StepSet {
        match level {
            Level::Coarse => self.coarse,
            Level::Medium => self.medium,
            Level::Fine => self.fine,
        }
    }

    pub fn validate(&self, q: &QuantizerSpec) -> Result<()> {
        if !(self.coarse.positive() && self.medium.positive() && self.fine.positive()) {
            return Err(Error::Config("all search steps must be positive".into()));
        }
        if !(self.coarse.dominates(&self.medium) && self.medium.dominates(&self.fine)) {
            return Err(Error::Config("steps must shrink from coarse to fine".into()));
        }
        if self.fine.delay < q.delay_step * (1.0 - 1e-9) {
            return Err(Error::Config("fine delay step is below the quantizer delay step".into()));
        }
        if self.max_iterations_per_level == 0 || self.max_model_order == 0 {
            return Err(Error::Config("iteration cap and maximum model order must be positive".into()));
        }
        if !(self.tracking_radius > 0.0) || !(self.convergence_tol >= 0.0) {
            return Err(Error::Config("tracking radius must be positive".into()));
        }
        Ok(())
    }
}
