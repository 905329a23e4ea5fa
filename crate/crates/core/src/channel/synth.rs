use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::{array_response, ChannelTensor, MpcParamSet, SystemConfig};
use crate::error::{Error, Result};
use crate::profiler::sinc;

/// Arrival direction of a path at the URA, radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub elevation: f64,
    pub azimuth: f64,
}

/// Frequency response of a parameter set at the M CSI-RS positions:
/// `H(f_m) = Σ_l α_l e^{jφ_l} e^{-j2π f_m τ_l}`, `f_m = m · Δf`.
pub fn synth_freq_response(theta: &MpcParamSet, cfg: &SystemConfig) -> Vec<Complex64> {
    (0..cfg.m_prb)
        .map(|m| {
            let f = cfg.frequency(m);
            theta
                .mpcs
                .iter()
                .map(|p| Complex64::from_polar(p.alpha, p.phi - TAU * f * p.tau))
                .sum()
        })
        .collect()
}

/// Builds `H ∈ C^(N_t × M × I)` from one parameter set per instant; path `l`
/// arrives from `directions[l]` at every instant.
pub fn synth_tensor(thetas: &[MpcParamSet], directions: &[Direction], cfg: &SystemConfig) -> Result<ChannelTensor> {
    let n_i = thetas.len();
    if n_i == 0 {
        return Err(Error::Domain("no time instants".into()));
    }
    let n_l = directions.len();
    if thetas.iter().any(|t| t.len() != n_l) {
        return Err(Error::Domain("every instant needs one parameter triple per direction".into()));
    }
    let responses: Vec<Vec<Complex64>> = directions
        .iter()
        .map(|d| array_response(cfg, d.elevation, d.azimuth))
        .collect();
    // per-path frequency responses, [instant][path][m]
    let freq: Vec<Vec<Vec<Complex64>>> = thetas
        .iter()
        .map(|t| {
            t.mpcs
                .iter()
                .map(|p| {
                    let single = MpcParamSet::new(vec![*p], t.t_index);
                    synth_freq_response(&single, cfg)
                })
                .collect()
        })
        .collect();
    Ok(ChannelTensor::from_fn(cfg.n_antennas(), cfg.m_prb, n_i, |a, m, i| {
        (0..n_l).map(|l| responses[l][a] * freq[i][l][m]).sum()
    }))
}

/// Circularly-symmetric complex Gaussian noise band-limited to B, sampled on
/// the first `n_taps` points of the delay grid. White noise over the band is
/// represented by i.i.d. `CN(0, variance)` Shannon coefficients at the
/// `T_s` rate and interpolated with the sinc kernel, so every grid sample
/// has variance `variance` (up to the truncated kernel tail).
pub fn band_limited_noise<R: Rng + ?Sized>(rng: &mut R, variance: f64, n_taps: usize, cfg: &SystemConfig) -> Vec<Complex64> {
    const MARGIN: i64 = 48;
    let ts = cfg.sample_period();
    let span = (cfg.tap_delay(n_taps.saturating_sub(1)) / ts).ceil() as i64;
    let sd = (variance / 2.0).sqrt();
    let coeffs: Vec<(i64, Complex64)> = (-MARGIN..=span + MARGIN)
        .map(|k| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            (k, Complex64::new(re * sd, im * sd))
        })
        .collect();
    (0..n_taps)
        .map(|idx| {
            let x = cfg.tap_delay(idx) / ts;
            coeffs.iter().map(|(k, w)| w * sinc(x - *k as f64)).sum()
        })
        .collect()
}
