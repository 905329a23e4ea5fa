use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;

use super::{sinc, QuantizerSpec, SincBank};
use crate::channel::{Mpc, MpcParamSet, SystemConfig};
use crate::error::{Error, Result};

/// Complex band-limited CIR on the oversampled delay grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexCir {
    pub samples: Vec<Complex64>,
    pub t_index: i64,
}

impl ComplexCir {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// Profiled CIR: nonnegative magnitudes on the delay grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfiledCir {
    pub samples: Vec<f64>,
    pub t_index: i64,
}

impl ProfiledCir {
    pub fn zeros(n: usize, t_index: i64) -> Self {
        Self { samples: vec![0.0; n], t_index }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum()
    }

    pub fn truncated(&self, n: usize) -> Self {
        Self { samples: self.samples[..n.min(self.samples.len())].to_vec(), t_index: self.t_index }
    }
}

/// Exact band-limited CIR of a parameter set on the `M·n_st` tap grid:
/// `Σ_l α_l e^{jφ_l} sinc((t − τ_l)·B)`.
pub fn sample_cir(theta: &MpcParamSet, cfg: &SystemConfig) -> ComplexCir {
    let b = cfg.bandwidth_b;
    let samples = (0..cfg.n_taps())
        .map(|k| {
            let t = cfg.tap_delay(k);
            theta
                .mpcs
                .iter()
                .map(|p| Complex64::from_polar(p.alpha, p.phi) * sinc((t - p.tau) * b))
                .sum()
        })
        .collect();
    ComplexCir { samples, t_index: theta.t_index }
}

/// Elementwise modulus.
pub fn profile(cir: &ComplexCir) -> ProfiledCir {
    ProfiledCir { samples: cir.samples.iter().map(|z| z.norm()).collect(), t_index: cir.t_index }
}

/// Quantized complex gain `Q(α)·e^{jQ(φ)}` of one path.
#[inline]
pub(crate) fn path_coefficient(p: &Mpc, q: &QuantizerSpec) -> Complex64 {
    Complex64::from_polar(q.amplitude(p.alpha), q.phase(p.phi))
}

/// Complex reconstruction on the first `n` extended-grid taps, before the
/// modulus.
pub(crate) fn reconstruct_complex(
    theta: &MpcParamSet,
    cfg: &SystemConfig,
    q: &QuantizerSpec,
    bank: &SincBank,
    n: usize,
) -> Result<Vec<Complex64>> {
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    for p in &theta.mpcs {
        let c = path_coefficient(p, q);
        let tau = q.delay(p.tau);
        for (k, a) in acc.iter_mut().enumerate() {
            let s = bank.value(cfg.tap_delay(k) - tau).ok_or_else(|| {
                Error::Domain(format!("delay {tau:e} s is outside the sinc bank range"))
            })?;
            *a += c * s;
        }
    }
    Ok(acc)
}

/// Discrete reconstruction `|Σ_l Q(α_l) e^{jQ(φ_l)} sinc(t' − Q(τ_l))|` on the
/// first `n` taps of the extended grid.
pub fn reconstruct_taps(
    theta: &MpcParamSet,
    cfg: &SystemConfig,
    q: &QuantizerSpec,
    bank: &SincBank,
    n: usize,
) -> Result<ProfiledCir> {
    if n > cfg.n_taps_extended() {
        return Err(Error::Domain(format!("{n} taps exceed the extended grid")));
    }
    let acc = reconstruct_complex(theta, cfg, q, bank, n)?;
    Ok(ProfiledCir { samples: acc.iter().map(|z| z.norm()).collect(), t_index: theta.t_index })
}

/// Reconstruction truncated to the `M·n_st` taps of the observation grid,
/// directly comparable with `profile(sample_cir(..))`.
pub fn reconstruct(theta: &MpcParamSet, cfg: &SystemConfig, q: &QuantizerSpec, bank: &SincBank) -> Result<ProfiledCir> {
    reconstruct_taps(theta, cfg, q, bank, cfg.n_taps())
}

/// Reconstruction over the full `2·M·n_st` extended grid.
pub fn reconstruct_extended(
    theta: &MpcParamSet,
    cfg: &SystemConfig,
    q: &QuantizerSpec,
    bank: &SincBank,
) -> Result<ProfiledCir> {
    reconstruct_taps(theta, cfg, q, bank, cfg.n_taps_extended())
}

/// Zeroes every sample below three times the noise floor.
pub fn denoise_threshold(cir: &ProfiledCir, noise_floor_estimate: f64) -> ProfiledCir {
    let thr = 3.0 * noise_floor_estimate.max(0.0);
    ProfiledCir {
        samples: cir.samples.iter().map(|&x| if x < thr { 0.0 } else { x }).collect(),
        t_index: cir.t_index,
    }
}

/// Debug dump: `tap_index,delay_s,magnitude` with one-based tap numbers.
pub fn write_profile_csv<W: Write>(mut w: W, cir: &ProfiledCir, cfg: &SystemConfig) -> Result<()> {
    writeln!(w, "tap_index,delay_s,magnitude")?;
    for (k, v) in cir.samples.iter().enumerate() {
        writeln!(w, "{},{:e},{:e}", k + 1, cfg.tap_delay(k), v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (SystemConfig, QuantizerSpec, SincBank) {
        let cfg = SystemConfig::default();
        let q = QuantizerSpec::for_config(&cfg);
        let bank = SincBank::for_config(&cfg).unwrap();
        (cfg, q, bank)
    }

    /// Direct per-tap triple sum, written independently of `sample_cir`.
    fn naive_cir(theta: &MpcParamSet, cfg: &SystemConfig) -> Vec<Complex64> {
        let mut out = Vec::new();
        for k in 1..=cfg.m_prb * cfg.n_st {
            let t = k as f64 / (cfg.bandwidth_b * cfg.n_st as f64);
            let mut acc = Complex64::new(0.0, 0.0);
            for p in &theta.mpcs {
                let x = std::f64::consts::PI * (t - p.tau) * cfg.bandwidth_b;
                let s = if x == 0.0 { 1.0 } else { x.sin() / x };
                acc += Complex64::new(p.alpha * p.phi.cos(), p.alpha * p.phi.sin()) * s;
            }
            out.push(acc);
        }
        out
    }

    #[test]
    fn on_grid_path_hits_single_tap() {
        let (cfg, ..) = setup();
        let ts = cfg.sample_period();
        let cir = sample_cir(&MpcParamSet::single(10.0 * ts, 1.0, 0.0), &cfg);
        let peak = 10 * cfg.n_st - 1;
        assert!((cir.samples[peak] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        for k in (peak % cfg.n_st..cir.len()).step_by(cfg.n_st) {
            if k != peak {
                assert!(cir.samples[k].norm() < 1e-12, "tap {k}");
            }
        }
    }

    #[test]
    fn zero_amplitude_gives_zero_cir() {
        let (cfg, ..) = setup();
        let cir = sample_cir(&MpcParamSet::single(3e-7, 0.0, 1.0), &cfg);
        assert!(cir.samples.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn sample_cir_matches_naive_sum() {
        let (cfg, ..) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mpcs = (0..3)
                .map(|_| Mpc::new(rng.random_range(0.0..5e-7), rng.random_range(0.0..1.0), rng.random_range(0.0..6.28)))
                .collect();
            let theta = MpcParamSet::new(mpcs, 0);
            let a = sample_cir(&theta, &cfg);
            for (x, y) in a.samples.iter().zip(naive_cir(&theta, &cfg)) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn profile_is_modulus() {
        let p = profile(&ComplexCir { samples: vec![Complex64::new(3.0, 4.0), Complex64::new(0.0, 0.0)], t_index: 2 });
        assert_eq!(p.samples, vec![5.0, 0.0]);
        assert_eq!(p.t_index, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z: Vec<Complex64> = (0..64).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let p = profile(&ComplexCir { samples: z.clone(), t_index: 0 });
        for (a, b) in p.samples.iter().zip(&z) {
            assert!((a - (b.re * b.re + b.im * b.im).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn reconstruct_on_grid_peak() {
        let (cfg, q, bank) = setup();
        let ts = cfg.sample_period();
        let r = reconstruct(&MpcParamSet::single(10.0 * ts, 1.0, 0.0), &cfg, &q, &bank).unwrap();
        assert_eq!(r.len(), cfg.n_taps());
        assert!((r.samples[10 * cfg.n_st - 1] - 1.0).abs() < 1e-9);
        let ext = reconstruct_extended(&MpcParamSet::single(10.0 * ts, 1.0, 0.0), &cfg, &q, &bank).unwrap();
        assert_eq!(ext.len(), 2 * cfg.n_taps());
        assert_eq!(&ext.samples[..cfg.n_taps()], &r.samples[..]);
    }

    #[test]
    fn reconstruct_matches_analytic_for_quantized_params() {
        let (cfg, q, bank) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let mpcs: Vec<Mpc> = (0..3)
                .map(|_| Mpc::new(rng.random_range(0.0..5e-7), rng.random_range(0.0..1.0), rng.random_range(0.0..6.28)))
                .collect();
            let theta = MpcParamSet::new(mpcs.clone(), 0);
            let quantized = MpcParamSet::new(
                mpcs.iter().map(|p| Mpc::new(q.delay(p.tau), q.amplitude(p.alpha), q.phase(p.phi))).collect(),
                0,
            );
            let a = reconstruct(&theta, &cfg, &q, &bank).unwrap();
            let b = profile(&sample_cir(&quantized, &cfg));
            let diff = a.samples.iter().zip(&b.samples).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(diff <= 1e-6, "diff {diff}");
        }
    }

    #[test]
    fn opposite_paths_cancel_in_profile() {
        let (cfg, q, bank) = setup();
        let theta = MpcParamSet::new(
            vec![Mpc::new(2e-7, 0.5, 0.0), Mpc::new(2e-7, 0.5, std::f64::consts::PI)],
            0,
        );
        let r = reconstruct(&theta, &cfg, &q, &bank).unwrap();
        assert!(r.samples.iter().all(|&x| x < 1e-12));
    }

    #[test]
    fn out_of_range_delay_is_domain_error() {
        let (cfg, q, bank) = setup();
        let theta = MpcParamSet::single(10.0 * cfg.max_delay(), 1.0, 0.0);
        assert!(matches!(reconstruct(&theta, &cfg, &q, &bank), Err(Error::Domain(_))));
    }

    #[test]
    fn denoise_cases() {
        let p = ProfiledCir { samples: vec![0.01, 1.0, 0.01, 0.02], t_index: 0 };
        assert_eq!(denoise_threshold(&p, 0.0), p);
        assert_eq!(denoise_threshold(&p, 1.0).samples, vec![0.0; 4]);
        assert_eq!(denoise_threshold(&p, 0.01).samples, vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn separated_paths_keep_energy() {
        let (cfg, ..) = setup();
        let ts = cfg.sample_period();
        let theta = MpcParamSet::new(
            vec![Mpc::new(5.3 * ts, 1.0, 0.2), Mpc::new(20.7 * ts, 0.6, 2.0), Mpc::new(33.1 * ts, 0.3, 4.0)],
            0,
        );
        // grid energy of one unit path is n_st (sample spacing T_s/n_st)
        let e = profile(&sample_cir(&theta, &cfg)).energy() / cfg.n_st as f64;
        let expect = 1.0 + 0.36 + 0.09;
        assert!((e - expect).abs() / expect < 0.05, "energy {e}");
    }

    #[test]
    fn csv_rows() {
        let cfg = SystemConfig::default();
        let mut out = Vec::new();
        write_profile_csv(&mut out, &ProfiledCir { samples: vec![0.5, 0.25], t_index: 0 }, &cfg).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "tap_index,delay_s,magnitude");
        assert!(lines[1].starts_with("1,"));
        assert_eq!(lines.len(), 3);
    }
}
