//! Band-limited CIR sampling, cached-sinc reconstruction and the profiling
//! cost functions.
//!
//! Sinc convention: `sinc(x) = sin(πx)/(πx)` evaluated at `x = (t − τ)·B`, so
//! zero crossings fall on integer multiples of `T_s = 1/B`.

mod cir;
mod loss;
mod quantizer;
mod sinc;

pub use cir::{
    denoise_threshold, profile, reconstruct, reconstruct_extended, reconstruct_taps, sample_cir,
    write_profile_csv, ComplexCir, ProfiledCir,
};
pub(crate) use cir::path_coefficient;
pub use loss::{loss_db, profiling_loss, profiling_loss_db, window_error, EvalWindow, LOSS_DB_FLOOR};
pub use quantizer::QuantizerSpec;
pub use sinc::{sinc, SincBank};
