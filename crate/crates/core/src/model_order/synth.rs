use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::{synth_tensor, ChannelTensor, Direction, Mpc, MpcParamSet, SystemConfig};
use crate::error::{Error, Result};
use crate::Complex64;

/// Recipe for turning one parameter set into a space-frequency-time tensor:
/// every path gets a random arrival direction and a random per-instant phase
/// rotation (Doppler), and white noise is added at `snr_db`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrderScenario {
    pub n_instants: usize,
    /// Per-element SNR against the mean tensor power; `None` for noiseless.
    pub snr_db: Option<f64>,
    pub noise_floor_db: f64,
    /// Largest phase rotation per instant, radians.
    pub max_doppler: f64,
    pub elevation_range: [f64; 2],
    pub azimuth_range: [f64; 2],
    pub seed: u64,
}

impl Default for OrderScenario {
    fn default() -> Self {
        Self {
            n_instants: 16,
            snr_db: Some(20.0),
            noise_floor_db: -25.0,
            max_doppler: std::f64::consts::FRAC_PI_2,
            elevation_range: [-0.3, 0.3],
            azimuth_range: [-1.0, 1.0],
            seed: 0,
        }
    }
}

impl OrderScenario {
    /// Tensor for channel `index`; the random stream depends only on
    /// `(seed, index)`.
    pub fn tensor(&self, theta: &MpcParamSet, index: usize, cfg: &SystemConfig) -> Result<ChannelTensor> {
        if self.n_instants == 0 || theta.is_empty() {
            return Err(Error::Config("need at least one instant and one path".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let draw = |rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]| if hi > lo { rng.random_range(lo..hi) } else { lo };
        let dirs: Vec<Direction> = theta
            .mpcs
            .iter()
            .map(|_| Direction {
                elevation: draw(&mut rng, self.elevation_range),
                azimuth: draw(&mut rng, self.azimuth_range),
            })
            .collect();
        let d = self.max_doppler;
        let rates: Vec<f64> = theta.mpcs.iter().map(|_| draw(&mut rng, [-d, d])).collect();
        let thetas: Vec<MpcParamSet> = (0..self.n_instants)
            .map(|t| {
                let mpcs = theta
                    .mpcs
                    .iter()
                    .zip(&rates)
                    .map(|(p, w)| Mpc::new(p.tau, p.alpha, p.phi + w * t as f64))
                    .collect();
                MpcParamSet::new(mpcs, t as i64)
            })
            .collect();
        let h = synth_tensor(&thetas, &dirs, cfg)?;
        let Some(snr) = self.snr_db else { return Ok(h) };
        let (n_t, m, n_i) = h.shape();
        let power = h.norm_sqr() / h.as_slice().len() as f64;
        let sd = (power / 10f64.powf(snr / 10.0) / 2.0).sqrt();
        let noise: Vec<Complex64> = (0..n_t * m * n_i)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re * sd, im * sd)
            })
            .collect();
        h.lin_comb(Complex64::new(1.0, 0.0), &ChannelTensor::from_vec(n_t, m, n_i, noise)?, Complex64::new(1.0, 0.0))
    }
}
