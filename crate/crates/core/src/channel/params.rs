use serde::{Deserialize, Serialize};

use super::SystemConfig;
use crate::error::{Error, Result};
use crate::wrap_phase;

/// One multipath component: delay (s), linear amplitude and phase (rad).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mpc {
    pub tau: f64,
    pub alpha: f64,
    pub phi: f64,
}

impl Mpc {
    pub fn new(tau: f64, alpha: f64, phi: f64) -> Self {
        Self { tau, alpha, phi }
    }
}

/// Parameter set of all L paths at one observation instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcParamSet {
    pub mpcs: Vec<Mpc>,
    pub t_index: i64,
}

impl MpcParamSet {
    pub fn new(mpcs: Vec<Mpc>, t_index: i64) -> Self {
        Self { mpcs, t_index }
    }

    pub fn single(tau: f64, alpha: f64, phi: f64) -> Self {
        Self::new(vec![Mpc::new(tau, alpha, phi)], 0)
    }

    /// Model order L.
    pub fn len(&self) -> usize {
        self.mpcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mpcs.is_empty()
    }

    pub fn taus(&self) -> impl Iterator<Item = f64> + '_ {
        self.mpcs.iter().map(|p| p.tau)
    }

    /// Sorts paths by delay and wraps phases into `[0, 2π)`.
    pub fn normalized(mut self) -> Self {
        for p in &mut self.mpcs {
            p.phi = wrap_phase(p.phi);
        }
        self.mpcs.sort_by(|a, b| a.tau.total_cmp(&b.tau));
        self
    }

    pub fn with_t_index(mut self, t_index: i64) -> Self {
        self.t_index = t_index;
        self
    }

    /// Parameter-level checks that do not depend on ordering: finite
    /// values, nonnegative amplitudes, wrapped phases and delays inside
    /// `[0, M·T_s)`.
    pub fn validate_values(&self, cfg: &SystemConfig) -> Result<()> {
        if self.mpcs.is_empty() {
            return Err(Error::Domain("parameter set has no paths".into()));
        }
        let max = cfg.max_delay();
        for (l, p) in self.mpcs.iter().enumerate() {
            if !(p.tau.is_finite() && p.alpha.is_finite() && p.phi.is_finite()) {
                return Err(Error::Domain(format!("path {l} has non-finite parameters")));
            }
            if p.alpha < 0.0 {
                return Err(Error::Domain(format!("path {l} has negative amplitude")));
            }
            if !(0.0..std::f64::consts::TAU).contains(&p.phi) {
                return Err(Error::Domain(format!("path {l} phase not wrapped into [0, 2pi)")));
            }
            if !(0.0..max).contains(&p.tau) {
                return Err(Error::Domain(format!("path {l} delay {} outside [0, {max})", p.tau)));
            }
        }
        Ok(())
    }

    /// Full invariant check, including strictly ascending delays.
    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        self.validate_values(cfg)?;
        if self.mpcs.windows(2).any(|w| w[1].tau <= w[0].tau) {
            return Err(Error::Domain("path delays are not strictly ascending".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_sorts_and_wraps() {
        let set = MpcParamSet::new(
            vec![Mpc::new(3e-7, 0.5, -0.1), Mpc::new(1e-7, 1.0, 7.0)],
            4,
        )
        .normalized();
        assert!(set.mpcs[0].tau < set.mpcs[1].tau);
        assert!(set.mpcs.iter().all(|p| (0.0..std::f64::consts::TAU).contains(&p.phi)));
        set.validate(&SystemConfig::default()).unwrap();
    }

    #[test]
    fn rejects_invalid_sets() {
        let cfg = SystemConfig::default();
        assert!(MpcParamSet::new(vec![], 0).validate(&cfg).is_err());
        assert!(MpcParamSet::single(1e-7, -1.0, 0.0).validate(&cfg).is_err());
        assert!(MpcParamSet::single(cfg.max_delay(), 1.0, 0.0).validate(&cfg).is_err());
        let dup = MpcParamSet::new(vec![Mpc::new(1e-7, 1.0, 0.0); 2], 0);
        assert!(dup.validate(&cfg).is_err());
        dup.validate_values(&cfg).unwrap();
    }
}
