use std::f64::consts::PI;

use crate::channel::SystemConfig;
use crate::error::{Error, Result};

/// Normalized sinc, `sin(πx)/(πx)`.
#[inline]
pub fn sinc(x: f64) -> f64 {
    let px = PI * x;
    if px.abs() < 1e-8 {
        1.0 - px * px / 6.0
    } else {
        px.sin() / px
    }
}

/// Precomputed `sinc((Δt)·B)` on a fine delay grid. Delay offsets are read
/// out by index shift; offsets between table points are linearly
/// interpolated. Only nonnegative offsets are stored, readout uses `|Δt|`.
#[derive(Clone, Debug)]
pub struct SincBank {
    resolution: f64,
    inv_resolution: f64,
    bandwidth: f64,
    table: Vec<f64>,
}

impl SincBank {
    /// Bank covering offsets up to `±(2·M + 1)·T_s`, enough for every pair of
    /// extended-grid tap and in-range path delay.
    pub fn new(cfg: &SystemConfig, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::Config("sinc bank resolution must be positive".into()));
        }
        let span = (2 * cfg.m_prb + 1) as f64 * cfg.sample_period();
        let n = (span / resolution).ceil() as usize;
        if n > 50_000_000 {
            return Err(Error::Config(format!("sinc bank of {n} entries is too large")));
        }
        let table = (0..=n).map(|k| sinc(k as f64 * resolution * cfg.bandwidth_b)).collect();
        Ok(Self { resolution, inv_resolution: 1.0 / resolution, bandwidth: cfg.bandwidth_b, table })
    }

    /// Default bank with resolution `T_s / (64·n_st)`.
    pub fn for_config(cfg: &SystemConfig) -> Result<Self> {
        Self::new(cfg, cfg.tap_spacing() / 64.0)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Largest representable `|Δt|`.
    pub fn span(&self) -> f64 {
        (self.table.len() - 1) as f64 * self.resolution
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Worst-case linear interpolation error, `max|sinc''|·h²/8` with
    /// `max|sinc''| = π²/3` and `h` in units of `T_s`.
    pub fn interpolation_bound(&self) -> f64 {
        let h = self.resolution * self.bandwidth;
        PI * PI / 3.0 * h * h / 8.0
    }

    /// `sinc(Δt·B)` for an offset in seconds, `None` outside the table.
    #[inline]
    pub fn value(&self, offset: f64) -> Option<f64> {
        let p = offset.abs() * self.inv_resolution;
        let i = p as usize;
        let frac = p - i as f64;
        if i + 1 < self.table.len() {
            let a = self.table[i];
            Some(a + frac * (self.table[i + 1] - a))
        } else if i + 1 == self.table.len() && frac == 0.0 {
            Some(self.table[i])
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_zeros_and_peak() {
        assert_eq!(sinc(0.0), 1.0);
        for k in 1..20 {
            assert!(sinc(k as f64).abs() < 1e-15);
            assert!(sinc(-(k as f64)).abs() < 1e-15);
        }
        assert!((sinc(0.5) - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn bank_is_symmetric_and_accurate() {
        let cfg = SystemConfig::default();
        let bank = SincBank::for_config(&cfg).unwrap();
        assert!(bank.resolution() <= cfg.tap_spacing() / 64.0 + 1e-24);
        let ts = cfg.sample_period();
        for k in 0..2000 {
            let off = (k as f64 * 0.0371 - 30.0) * ts;
            let v = bank.value(off).unwrap();
            assert_eq!(v, bank.value(-off).unwrap());
            assert!((v - sinc(off / ts)).abs() <= bank.interpolation_bound());
        }
        assert!(bank.value(bank.span() * 1.01).is_none());
        assert!(bank.value(2.0 * cfg.max_delay()).is_some());
    }

    #[test]
    fn table_points_are_exact() {
        let cfg = SystemConfig::default();
        let bank = SincBank::for_config(&cfg).unwrap();
        for k in 0..500 {
            let off = k as f64 * bank.resolution();
            assert!((bank.value(off).unwrap() - sinc(off * cfg.bandwidth_b)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_resolution() {
        let cfg = SystemConfig::default();
        assert!(SincBank::new(&cfg, 0.0).is_err());
        assert!(SincBank::new(&cfg, f64::NAN).is_err());
    }
}
