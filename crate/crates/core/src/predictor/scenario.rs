//! Declarative parameter-evolution scenarios for prediction experiments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate_horizon, fit_tracks, predict_csi, Association, HorizonRow, SplineBoundary};
use crate::channel::{band_limited_noise, Mpc, MpcParamSet, SystemConfig};
use crate::error::{Error, Result};
use crate::estimator::{estimate_initial, track, SearchSchedule};
use crate::profiler::{profile, sample_cir, ProfiledCir, QuantizerSpec, SincBank};
use crate::wrap_phase;

/// Milliseconds between observation instants.
pub const DEFAULT_SPACING_MS: f64 = 2.0;

/// Evolution of one parameter over the instant index `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Law {
    Constant { value: f64 },
    Linear { start: f64, rate: f64 },
    Quadratic { start: f64, rate: f64, accel: f64 },
    Sinusoidal { mean: f64, amplitude: f64, period: f64, #[serde(default)] phase: f64 },
}

impl Law {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Law::Constant { value } => value,
            Law::Linear { start, rate } => start + rate * t,
            Law::Quadratic { start, rate, accel } => start + rate * t + accel * t * t,
            Law::Sinusoidal { mean, amplitude, period, phase } => {
                mean + amplitude * (std::f64::consts::TAU * t / period + phase).sin()
            }
        }
    }
}

/// One path: delay in multiples of `T_s`, linear amplitude, phase in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathScenario {
    pub tau_ts: Law,
    pub alpha: Law,
    pub phi: Law,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub paths: Vec<PathScenario>,
    /// Inclusive range of observed instants.
    pub observe: [i64; 2],
    /// Instants predicted after the last observation.
    pub horizon: usize,
    #[serde(default = "default_spacing")]
    pub spacing_ms: f64,
    /// SNR of the observed CIRs; truth for scoring is always noiseless.
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_spacing() -> f64 {
    DEFAULT_SPACING_MS
}

/// Where the observed parameter sets come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    /// Start estimate at the first instant, then tracking.
    #[default]
    Estimated,
    /// The scenario's own parameters, isolating the prediction stage.
    Truth,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.observe;
        if self.paths.is_empty() {
            return Err(Error::Config("scenario has no paths".into()));
        }
        if b <= a {
            return Err(Error::Config(format!("observation range [{a}, {b}] holds fewer than 2 instants")));
        }
        if !(self.spacing_ms > 0.0) {
            return Err(Error::Config("spacing_ms must be positive".into()));
        }
        Ok(())
    }

    /// Ground-truth parameters at instant `t`.
    pub fn theta_at(&self, t: i64, cfg: &SystemConfig) -> Result<MpcParamSet> {
        let ts = cfg.sample_period();
        let x = t as f64;
        let mpcs: Vec<Mpc> = self
            .paths
            .iter()
            .map(|p| Mpc::new(p.tau_ts.at(x) * ts, p.alpha.at(x).max(0.0), wrap_phase(p.phi.at(x))))
            .collect();
        let theta = MpcParamSet::new(mpcs, t);
        theta
            .validate_values(cfg)
            .map_err(|e| Error::Config(format!("scenario invalid at instant {t}: {e}")))?;
        Ok(theta)
    }

    fn observed_profile(&self, t: i64, cfg: &SystemConfig) -> Result<ProfiledCir> {
        let mut cir = sample_cir(&self.theta_at(t, cfg)?, cfg);
        if let Some(snr) = self.snr_db {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(t as u64);
            let var = cir.mean_power() / 10f64.powf(snr / 10.0);
            for (s, n) in cir.samples.iter_mut().zip(band_limited_noise(&mut rng, var, cfg.n_taps(), cfg)) {
                *s += n;
            }
        }
        Ok(profile(&cir))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub observed: Vec<MpcParamSet>,
    /// Loss of each observed estimate against its observed profile.
    pub observed_loss_db: Vec<f64>,
    pub rows: Vec<HorizonRow>,
}

/// Observes the scenario, fits tracks and scores every predicted instant
/// against the noiseless truth `profile(sample_cir(θ(t)))`.
pub fn run_scenario(
    scn: &Scenario,
    mode: ObservationMode,
    boundary: SplineBoundary,
    cfg: &SystemConfig,
    q: &QuantizerSpec,
    bank: &SincBank,
    schedule: &SearchSchedule,
) -> Result<ScenarioRun> {
    scn.validate()?;
    let [a, b] = scn.observe;
    let mut observed = Vec::new();
    let mut observed_loss_db = Vec::new();
    for t in a..=b {
        let est = match mode {
            ObservationMode::Truth => {
                observed_loss_db.push(crate::profiler::LOSS_DB_FLOOR);
                scn.theta_at(t, cfg)?
            }
            ObservationMode::Estimated => {
                let target = scn.observed_profile(t, cfg)?;
                let report = match observed.last() {
                    None => estimate_initial(&target, scn.paths.len(), cfg, q, bank, schedule)?,
                    Some(prev) => track(prev, &target, cfg, q, bank, schedule)?,
                };
                observed_loss_db.push(report.loss_db);
                report.theta_hat
            }
        };
        observed.push(est);
    }
    let tracks = fit_tracks(&observed, Association::Tracked)?;
    let mut truth = Vec::with_capacity(scn.horizon);
    let mut predicted = Vec::with_capacity(scn.horizon);
    for k in 1..=scn.horizon as i64 {
        let t = b + k;
        truth.push(profile(&sample_cir(&scn.theta_at(t, cfg)?, cfg)));
        predicted.push(predict_csi(&tracks, t, boundary, cfg, q, bank)?);
    }
    let rows = evaluate_horizon(&truth, &predicted)?;
    Ok(ScenarioRun { observed, observed_loss_db, rows })
}
