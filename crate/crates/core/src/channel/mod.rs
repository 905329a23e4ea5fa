//! System model: constants, path parameter sets, URA beamforming, synthetic
//! channel generation and the on-disk dataset format.

mod array;
mod config;
mod dataset;
mod params;
mod synth;

pub use array::{array_response, beam_weights, beamform, select_strongest_beam, steering_vector};
pub use config::SystemConfig;
pub use dataset::{
    generate_dataset, read_dataset, write_dataset, DatasetMeta, DatasetRecord, DatasetSpec,
    DATASET_FORMAT_VERSION,
};
pub use params::{Mpc, MpcParamSet};
pub use synth::{band_limited_noise, synth_freq_response, synth_tensor, Direction};

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Frequency-domain channel `H ∈ C^(n_t × M × I)`: antenna × frequency sample
/// × time instant, stored row-major with the time index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelTensor {
    n_t: usize,
    m: usize,
    i: usize,
    data: Vec<Complex64>,
}

impl ChannelTensor {
    pub fn zeros(n_t: usize, m: usize, i: usize) -> Self {
        Self { n_t, m, i, data: vec![Complex64::new(0.0, 0.0); n_t * m * i] }
    }

    pub fn from_fn(n_t: usize, m: usize, i: usize, mut f: impl FnMut(usize, usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(n_t * m * i);
        for a in 0..n_t {
            for mm in 0..m {
                for ii in 0..i {
                    data.push(f(a, mm, ii));
                }
            }
        }
        Self { n_t, m, i, data }
    }

    pub fn from_vec(n_t: usize, m: usize, i: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n_t * m * i {
            return Err(Error::Config(format!(
                "tensor data length {} does not match shape {n_t}x{m}x{i}",
                data.len()
            )));
        }
        Ok(Self { n_t, m, i, data })
    }

    /// `(n_t, M, I)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_t, self.m, self.i)
    }

    #[inline]
    fn idx(&self, a: usize, m: usize, i: usize) -> usize {
        (a * self.m + m) * self.i + i
    }

    #[inline]
    pub fn get(&self, a: usize, m: usize, i: usize) -> Complex64 {
        self.data[self.idx(a, m, i)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, m: usize, i: usize, v: Complex64) {
        let k = self.idx(a, m, i);
        self.data[k] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { data: self.data.iter().map(|z| z * c).collect(), ..*self }
    }

    /// Elementwise `a·self + b·other`.
    pub fn lin_comb(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Config("tensor shapes differ".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { data, ..*self })
    }
}

/// Beamformed frequency-domain channel `(M × I)` for one selected beam.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamformedChannel {
    m: usize,
    i: usize,
    data: Vec<Complex64>,
    /// `(i_v, i_h)`, zero-based into the tilt and azimuth sets.
    pub beam_index: (usize, usize),
}

impl BeamformedChannel {
    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.i)
    }

    #[inline]
    pub fn get(&self, m: usize, i: usize) -> Complex64 {
        self.data[m * self.i + i]
    }

    /// Frequency response (length M) at one time instant.
    pub fn column(&self, i: usize) -> Vec<Complex64> {
        (0..self.m).map(|m| self.get(m, i)).collect()
    }

    pub fn mean_power(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.data.len() as f64
    }
}
