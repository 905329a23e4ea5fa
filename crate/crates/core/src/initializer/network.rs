//! Single-precision forward pass over a validated [`WeightBundle`].

use super::bundle::{Activation, LayerSpec, WeightBundle};
use crate::error::{Error, Result};

enum Act {
    /// `len × ch`, row-major (`t·ch + c`).
    Map { data: Vec<f32>, len: usize, ch: usize },
    Flat(Vec<f32>),
}

fn activate(v: f32, a: Activation) -> f32 {
    match a {
        Activation::Relu => v.max(0.0),
        Activation::Linear => v,
    }
}

/// Same-padded, stride-1 1-D convolution. Kernel layout `[k, in, out]`.
fn conv1d(x: &[f32], len: usize, ch: usize, kernel: &[f32], bias: &[f32], k: usize, out: usize, a: Activation) -> Vec<f32> {
    let left = (k - 1) / 2;
    let mut y = vec![0.0f32; len * out];
    for t in 0..len {
        let row = &mut y[t * out..(t + 1) * out];
        row.copy_from_slice(bias);
        for j in 0..k {
            let src = t as isize + j as isize - left as isize;
            if src < 0 || src >= len as isize {
                continue;
            }
            let xr = &x[src as usize * ch..(src as usize + 1) * ch];
            for (c, &xv) in xr.iter().enumerate() {
                let w = &kernel[(j * ch + c) * out..(j * ch + c + 1) * out];
                for (r, &wv) in row.iter_mut().zip(w) {
                    *r += xv * wv;
                }
            }
        }
        for r in row.iter_mut() {
            *r = activate(*r, a);
        }
    }
    y
}

fn maxpool(x: &[f32], len: usize, ch: usize, pool: usize) -> (Vec<f32>, usize) {
    let n = len / pool;
    let mut y = vec![f32::NEG_INFINITY; n * ch];
    for t in 0..n * pool {
        let o = t / pool;
        for c in 0..ch {
            y[o * ch + c] = y[o * ch + c].max(x[t * ch + c]);
        }
    }
    (y, n)
}

fn dense(x: &[f32], kernel: &[f32], bias: &[f32], a: Activation) -> Vec<f32> {
    let out = bias.len();
    let mut y = bias.to_vec();
    for (i, &xv) in x.iter().enumerate() {
        if xv == 0.0 {
            continue;
        }
        for (r, &wv) in y.iter_mut().zip(&kernel[i * out..(i + 1) * out]) {
            *r += xv * wv;
        }
    }
    y.iter_mut().for_each(|v| *v = activate(*v, a));
    y
}

/// Runs the layer stack on `input` (`input_window × input_channels`,
/// row-major) and returns the final layer output.
pub fn forward(bundle: &WeightBundle, input: &[f32]) -> Result<Vec<f32>> {
    let h = bundle.header();
    if input.len() != h.input_window * h.input_channels {
        return Err(Error::Format(format!(
            "input has {} values, bundle expects {}x{}",
            input.len(),
            h.input_window,
            h.input_channels
        )));
    }
    let mut act = Act::Map { data: input.to_vec(), len: h.input_window, ch: h.input_channels };
    for layer in &h.layers {
        act = match (layer, act) {
            (LayerSpec::Conv1d { name, filters, kernel_size, activation }, Act::Map { data, len, ch }) => {
                let k = bundle.tensor(&format!("{name}.kernel"))?;
                let b = bundle.tensor(&format!("{name}.bias"))?;
                let y = conv1d(&data, len, ch, &k.data, &b.data, *kernel_size, *filters, *activation);
                Act::Map { data: y, len, ch: *filters }
            }
            (LayerSpec::Maxpool1d { pool, .. }, Act::Map { data, len, ch }) => {
                let (y, n) = maxpool(&data, len, ch, *pool);
                Act::Map { data: y, len: n, ch }
            }
            (LayerSpec::Flatten { .. }, Act::Map { data, .. }) => Act::Flat(data),
            (LayerSpec::Dense { name, activation, .. }, Act::Flat(x)) => {
                let k = bundle.tensor(&format!("{name}.kernel"))?;
                let b = bundle.tensor(&format!("{name}.bias"))?;
                Act::Flat(dense(&x, &k.data, &b.data, *activation))
            }
            _ => return Err(Error::Format("layer stack does not chain".into())),
        };
        let data = match &act {
            Act::Map { data, .. } | Act::Flat(data) => data,
        };
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite activation after layer {layer:?}")));
        }
    }
    match act {
        Act::Flat(y) => Ok(y),
        Act::Map { .. } => Err(Error::Format("layer stack does not end in a dense layer".into())),
    }
}
