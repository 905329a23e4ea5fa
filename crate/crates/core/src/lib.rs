//! Multipath component (MPC) parameter estimation from band-limited channel
//! impulse responses.
//!
//! The crate models a massive-MIMO OFDM link whose frequency response is the
//! superposition of a handful of delayed, scaled and rotated paths. The
//! observable is the magnitude of the band-limited, oversampled impulse
//! response (the *profile*). Path parameters are recovered by greedy lattice
//! search over a cached-sinc reconstruction, followed over time by a confined
//! tracking search and extrapolated with cubic splines to predict future
//! channel states.
//!
//! Modules:
//! - [`channel`]: system constants, steering vectors, beamforming, synthetic
//!   channels and the on-disk dataset format.
//! - [`profiler`]: impulse response sampling, cached-sinc reconstruction,
//!   quantization and loss functions.
//! - [`estimator`]: full-space start search, 27-variation refinement and
//!   tracking.
//! - [`model_order`]: HOSVD mode singular values and model order decisions.
//! - [`initializer`]: start parameters from a convolutional network or from
//!   peak picking, plus the portable weight bundle format.
//! - [`esprit`]: Unitary ESPRIT delay estimation baseline.
//! - [`predictor`]: track association, spline extrapolation and prediction
//!   horizon evaluation.
//! - [`bench`]: latency/accuracy benchmark harness and CDF tables.

pub mod bench;
pub mod channel;
pub mod error;
pub mod esprit;
pub mod estimator;
pub mod initializer;
pub mod model_order;
pub mod predictor;
pub mod profiler;

pub use channel::{
    BeamformedChannel, ChannelTensor, DatasetSpec, Mpc, MpcParamSet, SystemConfig,
};
pub use error::{Error, Result};
pub use estimator::{EstimateReport, SearchSchedule};
pub use profiler::{ComplexCir, ProfiledCir, QuantizerSpec, SincBank};

pub use num_complex::Complex64;

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = phi.rem_euclid(tau);
    // rem_euclid can return exactly TAU for tiny negative inputs
    if w >= tau {
        0.0
    } else {
        w
    }
}

/// Wraps an angle difference into `(-π, π]`.
pub fn wrap_pi(phi: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = phi.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}
