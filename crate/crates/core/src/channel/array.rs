use num_complex::Complex64;
use std::f64::consts::TAU;

use super::{BeamformedChannel, ChannelTensor, SystemConfig};
use crate::error::{Error, Result};

/// Uniform linear steering vector: element k (zero-based) is
/// `exp(j·2π·k·spacing·sin(angle))`.
pub fn steering_vector(angle: f64, n_elems: usize, spacing_wavelengths: f64) -> Vec<Complex64> {
    let step = TAU * spacing_wavelengths * angle.sin();
    (0..n_elems).map(|k| Complex64::from_polar(1.0, step * k as f64)).collect()
}

fn kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// URA weights `v_h(i_h) ⊗ v_v(i_v)`. Antenna `n2·n1_count + n1` carries
/// vertical element `n1` of column `n2`, i.e. the vertical index runs fastest.
pub fn beam_weights(cfg: &SystemConfig, i_v: usize, i_h: usize) -> Result<Vec<Complex64>> {
    let tilt = cfg
        .tilt_angles
        .get(i_v)
        .ok_or_else(|| Error::Config(format!("vertical beam index {i_v} out of range")))?;
    let az = cfg
        .azimuth_angles
        .get(i_h)
        .ok_or_else(|| Error::Config(format!("horizontal beam index {i_h} out of range")))?;
    let v_v = steering_vector(*tilt, cfg.n1, cfg.d_v);
    let v_h = steering_vector(*az, cfg.n2, cfg.d_h);
    Ok(kron(&v_h, &v_v))
}

/// Array response of a plane wave from `(elevation, azimuth)`. Beamforming
/// applies weights without conjugation, so the response is the conjugate of
/// the steering weights and the matched beam maximizes output power.
pub fn array_response(cfg: &SystemConfig, elevation: f64, azimuth: f64) -> Vec<Complex64> {
    let v_v = steering_vector(elevation, cfg.n1, cfg.d_v);
    let v_h = steering_vector(azimuth, cfg.n2, cfg.d_h);
    kron(&v_h, &v_v).into_iter().map(|z| z.conj()).collect()
}

/// Wideband beamforming: `out(m, i) = H(·, m, i)^T · (v_h ⊗ v_v)`.
pub fn beamform(h: &ChannelTensor, i_v: usize, i_h: usize, cfg: &SystemConfig) -> Result<BeamformedChannel> {
    let (n_t, m, i) = h.shape();
    if n_t != cfg.n_antennas() {
        return Err(Error::Config(format!(
            "tensor has {n_t} antennas, configuration expects {}",
            cfg.n_antennas()
        )));
    }
    let w = beam_weights(cfg, i_v, i_h)?;
    let mut data = vec![Complex64::new(0.0, 0.0); m * i];
    for (a, wa) in w.iter().enumerate() {
        for mm in 0..m {
            for ii in 0..i {
                data[mm * i + ii] += h.get(a, mm, ii) * wa;
            }
        }
    }
    Ok(BeamformedChannel { m, i, data, beam_index: (i_v, i_h) })
}

/// Beam with the strongest mean received power over all frequency samples
/// and instants. Ties go to the lexicographically smallest `(i_v, i_h)`.
pub fn select_strongest_beam(h: &ChannelTensor, cfg: &SystemConfig) -> Result<(usize, usize)> {
    let mut best = (0, 0);
    let mut best_power = f64::NEG_INFINITY;
    for i_v in 0..cfg.tilt_angles.len() {
        for i_h in 0..cfg.azimuth_angles.len() {
            let p = beamform(h, i_v, i_h, cfg)?.mean_power();
            if p > best_power {
                best_power = p;
                best = (i_v, i_h);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_tensor(cfg: &SystemConfig, m: usize, i: usize, seed: u64) -> ChannelTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ChannelTensor::from_fn(cfg.n_antennas(), m, i, |_, _, _| {
            c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn boresight_is_all_ones() {
        for z in steering_vector(0.0, 4, 0.7) {
            assert_eq!(z, c(1.0, 0.0));
        }
    }

    #[test]
    fn endfire_half_wavelength() {
        let v = steering_vector(PI / 2.0, 2, 0.5);
        assert!((v[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((v[1] - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fifteen_degree_phase() {
        let v = steering_vector(15f64.to_radians(), 16, 0.5);
        // 2π · 0.5 · sin 15° = 0.813104...
        assert!((v[1].arg() - 0.813_104_0).abs() < 1e-6);
        assert!(v.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn beamform_constant_boresight() {
        let cfg = SystemConfig { tilt_angles: vec![0.0], azimuth_angles: vec![0.0], ..Default::default() };
        let val = c(0.3, -1.2);
        let h = ChannelTensor::from_fn(64, 5, 2, |_, _, _| val);
        let out = beamform(&h, 0, 0, &cfg).unwrap();
        for m in 0..5 {
            for i in 0..2 {
                assert!((out.get(m, i) - val * 64.0).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_antenna_passthrough() {
        let cfg = SystemConfig { n1: 1, n2: 1, ..Default::default() };
        let h = random_tensor(&cfg, 7, 3, 1);
        let out = beamform(&h, 1, 2, &cfg).unwrap();
        for m in 0..7 {
            for i in 0..3 {
                assert_eq!(out.get(m, i), h.get(0, m, i));
            }
        }
    }

    #[test]
    fn beamform_matches_double_loop() {
        let cfg = SystemConfig::default();
        let h = random_tensor(&cfg, 6, 2, 7);
        // beam (7°, 15°)
        let out = beamform(&h, 0, 2, &cfg).unwrap();
        let (tilt, az) = (7f64.to_radians(), 15f64.to_radians());
        for m in 0..6 {
            for i in 0..2 {
                let mut acc = c(0.0, 0.0);
                for n2 in 0..cfg.n2 {
                    for n1 in 0..cfg.n1 {
                        let ph = TAU * (n1 as f64 * cfg.d_v * tilt.sin() + n2 as f64 * cfg.d_h * az.sin());
                        acc += h.get(n2 * cfg.n1 + n1, m, i) * Complex64::from_polar(1.0, ph);
                    }
                }
                assert!((acc - out.get(m, i)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_config_error() {
        let cfg = SystemConfig::default();
        let h = ChannelTensor::zeros(8, 2, 1);
        assert!(matches!(beamform(&h, 0, 0, &cfg), Err(Error::Config(_))));
        let h = ChannelTensor::zeros(64, 2, 1);
        assert!(beamform(&h, 2, 0, &cfg).is_err());
    }

    #[test]
    fn matched_beam_wins() {
        let cfg = SystemConfig::default();
        let resp = array_response(&cfg, 12f64.to_radians(), 45f64.to_radians());
        let h = ChannelTensor::from_fn(64, 4, 2, |a, m, _| resp[a] * Complex64::from_polar(1.0, m as f64));
        assert_eq!(select_strongest_beam(&h, &cfg).unwrap(), (1, 3));
    }

    #[test]
    fn isotropic_element_ties_to_first_beam() {
        // a single excited element radiates equally into every beam
        let cfg = SystemConfig::default();
        let h = ChannelTensor::from_fn(64, 3, 2, |a, _, _| if a == 0 { c(1.0, 1.0) } else { c(0.0, 0.0) });
        assert_eq!(select_strongest_beam(&h, &cfg).unwrap(), (0, 0));
    }

    #[test]
    fn strongest_beam_matches_power_scan() {
        let cfg = SystemConfig::default();
        for seed in 0..5 {
            let h = random_tensor(&cfg, 4, 2, 100 + seed);
            let mut table = Vec::new();
            for iv in 0..2 {
                for ih in 0..4 {
                    let w = beam_weights(&cfg, iv, ih).unwrap();
                    let mut p = 0.0;
                    for m in 0..4 {
                        for i in 0..2 {
                            let y: Complex64 = (0..64).map(|a| h.get(a, m, i) * w[a]).sum();
                            p += y.norm_sqr();
                        }
                    }
                    table.push(((iv, ih), p));
                }
            }
            let best = table.iter().fold(table[0], |acc, x| if x.1 > acc.1 { *x } else { acc });
            assert_eq!(select_strongest_beam(&h, &cfg).unwrap(), best.0);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn steering_unit_modulus(angle in -PI..PI, n in 1usize..32, d in 0.1f64..2.0) {
                for z in steering_vector(angle, n, d) {
                    prop_assert!((z.norm() - 1.0).abs() < 1e-12);
                }
            }

            #[test]
            fn beamform_is_linear(seed in 0u64..1000, ar in -2.0f64..2.0, ai in -2.0f64..2.0, br in -2.0f64..2.0) {
                let cfg = SystemConfig::default();
                let h1 = random_tensor(&cfg, 3, 2, seed);
                let h2 = random_tensor(&cfg, 3, 2, seed + 7919);
                let (a, b) = (c(ar, ai), c(br, 0.5));
                let lhs = beamform(&h1.lin_comb(a, &h2, b).unwrap(), 1, 1, &cfg).unwrap();
                let y1 = beamform(&h1, 1, 1, &cfg).unwrap();
                let y2 = beamform(&h2, 1, 1, &cfg).unwrap();
                for m in 0..3 {
                    for i in 0..2 {
                        let rhs = a * y1.get(m, i) + b * y2.get(m, i);
                        let scale = rhs.norm().max(1.0);
                        prop_assert!((lhs.get(m, i) - rhs).norm() <= 1e-10 * scale);
                    }
                }
            }

            #[test]
            fn beam_choice_ignores_global_scale(seed in 0u64..1000, mag in 0.01f64..100.0, ph in 0.0f64..TAU) {
                let cfg = SystemConfig::default();
                let h = random_tensor(&cfg, 3, 2, seed);
                let scaled = h.scaled(Complex64::from_polar(mag, ph));
                prop_assert_eq!(select_strongest_beam(&h, &cfg).unwrap(), select_strongest_beam(&scaled, &cfg).unwrap());
            }
        }
    }
}
