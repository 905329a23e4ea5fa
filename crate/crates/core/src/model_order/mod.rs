//! Model order from HOSVD mode singular values.
//!
//! Mode `d` of a tensor `H ∈ C^(n_0 × n_1 × n_2)` is unfolded cyclically:
//! row `i_d`, column `i_{d+1} · n_{d+2} + i_{d+2}` with indices taken
//! modulo 3. Singular values do not depend on the column order, so any
//! unfolding convention yields the same features; this one is fixed so that
//! exported feature files are reproducible.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

mod synth;

pub use synth::OrderScenario;

use crate::channel::ChannelTensor;
use crate::error::{Error, Result};
use crate::initializer::{forward, WeightBundle, MODEL_ORDER_ARCH};

/// Singular values kept per mode in the classifier features.
pub const FEATURES_PER_MODE: usize = 8;

/// Singular values of the three mode unfoldings, each sorted descending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSingularValues {
    pub values: [Vec<f64>; 3],
    pub tensor_shape: [usize; 3],
    /// The tensor was identically zero.
    pub degenerate: bool,
}

/// Mode-`d` unfolding as a dense matrix.
pub fn unfold(h: &ChannelTensor, mode: usize) -> DMatrix<Complex64> {
    let (a, b, c) = h.shape();
    let dims = [a, b, c];
    let (d1, d2) = ((mode + 1) % 3, (mode + 2) % 3);
    let mut m = DMatrix::zeros(dims[mode], dims[d1] * dims[d2]);
    let mut idx = [0usize; 3];
    for i0 in 0..a {
        for i1 in 0..b {
            for i2 in 0..c {
                idx[0] = i0;
                idx[1] = i1;
                idx[2] = i2;
                m[(idx[mode], idx[d1] * dims[d2] + idx[d2])] = h.get(i0, i1, i2);
            }
        }
    }
    m
}

pub fn hosvd_singular_values(h: &ChannelTensor) -> Result<ModeSingularValues> {
    let (a, b, c) = h.shape();
    if a * b * c == 0 {
        return Err(Error::Domain("empty tensor".into()));
    }
    if !h.is_finite() {
        return Err(Error::Domain("tensor has non-finite entries".into()));
    }
    let mut values: Vec<Vec<f64>> = (0..3)
        .into_par_iter()
        .map(|d| {
            let mut sv: Vec<f64> = unfold(h, d).singular_values().iter().copied().collect();
            sv.sort_by(|x, y| y.total_cmp(x));
            sv
        })
        .collect();
    let degenerate = values.iter().all(|v| v.iter().all(|&x| x == 0.0));
    let v2 = values.pop().expect("three modes");
    let v1 = values.pop().expect("three modes");
    let v0 = values.pop().expect("three modes");
    Ok(ModeSingularValues { values: [v0, v1, v2], tensor_shape: [a, b, c], degenerate })
}

/// Number of values within `floor_db` (negative) of the largest, measured as
/// `20·log10(σ/σ_max)`.
fn count_above(values: &[f64], floor_db: f64) -> usize {
    let max = values.first().copied().unwrap_or(0.0);
    if !(max > 0.0) {
        return 0;
    }
    values.iter().filter(|&&s| s > 0.0 && 20.0 * (s / max).log10() > floor_db).count()
}

/// Model order over all three modes.
pub fn select_model_order(sv: &ModeSingularValues, noise_floor_db: f64) -> usize {
    select_model_order_modes(sv, noise_floor_db, &[0, 1, 2])
}

/// Per listed mode, counts the values above the floor; returns the median of
/// the counts (lower median for an even number of modes), at least 1.
pub fn select_model_order_modes(sv: &ModeSingularValues, noise_floor_db: f64, modes: &[usize]) -> usize {
    let mut counts: Vec<usize> = modes
        .iter()
        .filter(|&&d| d < 3)
        .map(|&d| count_above(&sv.values[d], noise_floor_db))
        .collect();
    if counts.is_empty() {
        return 1;
    }
    counts.sort_unstable();
    counts[(counts.len() - 1) / 2].max(1)
}

/// Classifier features: for each listed mode the top
/// [`FEATURES_PER_MODE`] values divided by the mode maximum, zero-padded,
/// concatenated in mode order.
pub fn model_order_features(sv: &ModeSingularValues, modes: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(FEATURES_PER_MODE * modes.len());
    for &d in modes {
        let v = sv.values.get(d).map(Vec::as_slice).unwrap_or(&[]);
        let max = v.first().copied().unwrap_or(0.0);
        for k in 0..FEATURES_PER_MODE {
            let x = v.get(k).copied().unwrap_or(0.0);
            out.push(if max > 0.0 { x / max } else { 0.0 });
        }
    }
    out
}

/// Dense classifier over the features of all three modes; `L = 1 + argmax`.
pub fn nn_model_order(sv: &ModeSingularValues, weights: &WeightBundle) -> Result<usize> {
    nn_model_order_modes(sv, weights, &[0, 1, 2])
}

pub fn nn_model_order_modes(sv: &ModeSingularValues, weights: &WeightBundle, modes: &[usize]) -> Result<usize> {
    let h = weights.header();
    if h.architecture_id != MODEL_ORDER_ARCH {
        return Err(Error::Format(format!("bundle architecture '{}' is not a model order classifier", h.architecture_id)));
    }
    let x: Vec<f32> = model_order_features(sv, modes).into_iter().map(|v| v as f32).collect();
    if h.input_channels != 1 || h.input_window != x.len() {
        return Err(Error::Format(format!(
            "classifier expects {}x{} inputs, features have {}",
            h.input_window,
            h.input_channels,
            x.len()
        )));
    }
    let scores = forward(weights, &x)?;
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |b, (i, s)| if *s > scores[b] { i } else { b });
    Ok(best + 1)
}

/// Feature CSV for the external trainer: `label,f0,…,f{n−1}` where `label` is
/// the true model order or empty.
pub fn write_features_csv<W: Write>(mut w: W, rows: &[(Option<usize>, Vec<f64>)]) -> Result<()> {
    let n = rows.first().map_or(0, |r| r.1.len());
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain((0..n).map(|k| format!("f{k}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (label, f) in rows {
        if f.len() != n {
            return Err(Error::Domain("feature rows differ in length".into()));
        }
        let label = label.map(|l| l.to_string()).unwrap_or_default();
        let vals: Vec<String> = f.iter().map(|x| format!("{x:e}")).collect();
        writeln!(w, "{label},{}", vals.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
