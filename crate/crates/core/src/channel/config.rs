use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Link and array constants shared by every stage of the pipeline.
///
/// Defaults describe a 600-subcarrier OFDM system with one CSI reference
/// symbol per PRB (50 samples, 180 kHz apart), a 4 × 16 URA at 2.136 GHz and
/// a 10 MHz single-sided bandwidth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    pub n_sc: usize,
    /// Number of frequency samples M (one per PRB).
    pub m_prb: usize,
    /// Spacing of the frequency samples, Hz.
    pub csi_rs_spacing: f64,
    /// URA rows (vertical elements).
    pub n1: usize,
    /// URA columns (horizontal elements).
    pub n2: usize,
    /// Vertical element spacing in wavelengths.
    pub d_v: f64,
    /// Horizontal element spacing in wavelengths.
    pub d_h: f64,
    /// Carrier wavelength, m.
    pub carrier_wavelength: f64,
    /// Single-sided bandwidth B, Hz. The sample period is `T_s = 1/B`.
    pub bandwidth_b: f64,
    /// Oversampling factor of the delay grid.
    pub n_st: usize,
    /// Vertical beam tilt angles, radians.
    pub tilt_angles: Vec<f64>,
    /// Horizontal beam azimuth angles, radians.
    pub azimuth_angles: Vec<f64>,
    /// Observation window W in taps.
    pub obs_window_w: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let deg = std::f64::consts::PI / 180.0;
        Self {
            n_sc: 600,
            m_prb: 50,
            csi_rs_spacing: 180e3,
            n1: 4,
            n2: 16,
            d_v: 0.7,
            d_h: 0.5,
            carrier_wavelength: 0.14,
            bandwidth_b: 10e6,
            n_st: 6,
            tilt_angles: vec![7.0 * deg, 12.0 * deg],
            azimuth_angles: vec![-45.0 * deg, -15.0 * deg, 15.0 * deg, 45.0 * deg],
            obs_window_w: 256,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.m_prb == 0 || self.n_st == 0 {
            return bad("m_prb and n_st must be positive");
        }
        if self.n1 == 0 || self.n2 == 0 {
            return bad("URA dimensions must be positive");
        }
        if !(self.d_v > 0.0 && self.d_h > 0.0 && self.csi_rs_spacing > 0.0 && self.carrier_wavelength > 0.0) {
            return bad("spacings and wavelength must be positive");
        }
        if !(self.bandwidth_b > 0.0) {
            return bad("bandwidth_b must be positive");
        }
        if self.m_prb * self.n_st < self.obs_window_w {
            return bad("m_prb * n_st must cover the observation window");
        }
        if self.obs_window_w == 0 {
            return bad("observation window must be nonempty");
        }
        if self.tilt_angles.is_empty() || self.azimuth_angles.is_empty() {
            return bad("beam angle sets must be nonempty");
        }
        Ok(())
    }

    /// Sample period `T_s = 1/B`, seconds.
    #[inline]
    pub fn sample_period(&self) -> f64 {
        1.0 / self.bandwidth_b
    }

    /// Spacing of the oversampled delay grid, `T_s / n_st`.
    #[inline]
    pub fn tap_spacing(&self) -> f64 {
        self.sample_period() / self.n_st as f64
    }

    /// Taps on the delay grid `t_s` (`M · n_st`).
    #[inline]
    pub fn n_taps(&self) -> usize {
        self.m_prb * self.n_st
    }

    /// Taps on the extended grid `t'_s` (`2 · M · n_st`).
    #[inline]
    pub fn n_taps_extended(&self) -> usize {
        2 * self.n_taps()
    }

    /// Delay of zero-based tap `idx`. Tap numbering on the grid starts at
    /// one, so index 0 sits at `T_s / n_st`.
    #[inline]
    pub fn tap_delay(&self, idx: usize) -> f64 {
        (idx + 1) as f64 * self.tap_spacing()
    }

    /// Upper (exclusive) bound on path delays, `M · T_s`.
    #[inline]
    pub fn max_delay(&self) -> f64 {
        self.m_prb as f64 * self.sample_period()
    }

    /// Antenna count `N_t = n1 · n2`.
    #[inline]
    pub fn n_antennas(&self) -> usize {
        self.n1 * self.n2
    }

    /// Frequency offset of zero-based sample `m`, Hz.
    #[inline]
    pub fn frequency(&self, m: usize) -> f64 {
        m as f64 * self.csi_rs_spacing
    }

    pub fn n_beams(&self) -> usize {
        self.tilt_angles.len() * self.azimuth_angles.len()
    }
}
