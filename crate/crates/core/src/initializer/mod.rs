//! Start parameters for the search: a convolutional network driven by an
//! external [`WeightBundle`], or deterministic peak picking when no weights
//! are available.

mod bundle;
mod network;
mod peak;

pub use bundle::{
    mpc_cnn_flatten_len, mpc_cnn_layers, Activation, BundleHeader, LayerSpec, Tensor, TensorEntry,
    WeightBundle, BUNDLE_FORMAT_VERSION, BUNDLE_MAGIC, MODEL_ORDER_ARCH, MPC_CNN_ARCH,
};
pub use network::forward;
pub use peak::{peak_pick_init, Seed};

use crate::channel::{Mpc, MpcParamSet, SystemConfig};
use crate::error::{Error, Result};
use crate::profiler::ComplexCir;
use crate::wrap_phase;

/// Network input: `W` rows of `(|h|, ∠h)` with phases in `(−π, π]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NnInput {
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
    pub t_index: i64,
}

impl NnInput {
    pub fn window(&self) -> usize {
        self.magnitude.len()
    }

    /// Row-major `W × 2` single-precision matrix.
    pub fn to_f32(&self) -> Vec<f32> {
        self.magnitude
            .iter()
            .zip(&self.phase)
            .flat_map(|(&m, &p)| [m as f32, p as f32])
            .collect()
    }
}

/// Takes the first `W` taps of the complex CIR as magnitude and
/// principal-value phase.
pub fn prepare_input(cir: &ComplexCir, cfg: &SystemConfig) -> Result<NnInput> {
    let w = cfg.obs_window_w;
    if cir.len() < w {
        return Err(Error::Domain(format!("CIR has {} taps, network needs {w}", cir.len())));
    }
    let taps = &cir.samples[..w];
    let magnitude = taps.iter().map(|z| z.norm()).collect();
    let phase = taps
        .iter()
        .map(|z| if z.norm_sqr() == 0.0 { 0.0 } else { z.im.atan2(z.re) })
        .collect();
    Ok(NnInput { magnitude, phase, t_index: cir.t_index })
}

/// Decodes `L` raw `(τ/T_s, α, φ/π)` triples into a delay-sorted set.
pub fn decode_output(raw: &[f32], cfg: &SystemConfig, t_index: i64) -> Result<MpcParamSet> {
    if raw.is_empty() || raw.len() % 3 != 0 {
        return Err(Error::Format(format!("output width {} is not a positive multiple of 3", raw.len())));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite network output".into()));
    }
    let ts = cfg.sample_period();
    let tau_hi = cfg.max_delay() * (1.0 - f64::EPSILON);
    let mpcs = raw
        .chunks_exact(3)
        .map(|t| {
            let tau = (t[0] as f64 * ts).clamp(0.0, tau_hi);
            let alpha = (t[1] as f64).max(0.0);
            let phi = wrap_phase(t[2] as f64 * std::f64::consts::PI);
            Mpc::new(tau, alpha, phi)
        })
        .collect();
    Ok(MpcParamSet::new(mpcs, t_index).normalized())
}

/// Start parameters from the convolutional network.
pub fn nn_infer(input: &NnInput, weights: &WeightBundle, cfg: &SystemConfig) -> Result<MpcParamSet> {
    let h = weights.header();
    if h.architecture_id != MPC_CNN_ARCH {
        return Err(Error::Format(format!("bundle architecture '{}' is not a start-parameter network", h.architecture_id)));
    }
    if input.window() != h.input_window {
        return Err(Error::Format(format!("input window {} does not match bundle window {}", input.window(), h.input_window)));
    }
    let raw = forward(weights, &input.to_f32())?;
    decode_output(&raw, cfg, input.t_index)
}
