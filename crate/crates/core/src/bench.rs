//! Per-channel estimation pipelines, latency/accuracy benchmarking and CDF
//! tables.
//!
//! Every reported loss is recomputed here from the returned parameters
//! against the noiseless truth profile of the channel, never copied from an
//! estimator's own report.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use crate::channel::{band_limited_noise, synth_freq_response, DatasetMeta, DatasetRecord, Mpc, MpcParamSet, SystemConfig};
use crate::error::{Error, Result};
use crate::esprit::{esprit_delays, ls_amp_phase, EspritConfig};
use crate::estimator::{estimate_from_seed, estimate_initial, track, SearchSchedule};
use crate::initializer::{nn_infer, peak_pick_init, prepare_input, WeightBundle};
use crate::profiler::{profile, profiling_loss_db, reconstruct_taps, sample_cir, ProfiledCir, QuantizerSpec, SincBank};

pub const BENCH_SCHEMA_VERSION: u32 = 1;
pub const MIN_TRIALS: usize = 3;
pub const WARMUP_RUNS: usize = 2;
/// Delay drift applied to the truth between a start estimate and the tracked
/// instant, in multiples of `T_s`.
pub const TRACKING_DRIFT_TS: f64 = 0.1;

/// How parameters are obtained for one channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    /// Peak picking only.
    Peak,
    /// Network inference only.
    Nn,
    /// Full start search.
    Profiling,
    /// Unitary ESPRIT delays plus least-squares gains.
    Esprit,
}

impl FromStr for EstimateMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "peak" => Ok(Self::Peak),
            "nn" => Ok(Self::Nn),
            "profiling" => Ok(Self::Profiling),
            "esprit" => Ok(Self::Esprit),
            _ => Err(Error::Config(format!("unknown method {s:?} (peak, nn, profiling, esprit)"))),
        }
    }
}

/// Shared state for running pipelines over a dataset.
pub struct Pipeline<'a> {
    pub meta: &'a DatasetMeta,
    pub q: QuantizerSpec,
    pub bank: SincBank,
    pub schedule: SearchSchedule,
    pub weights: Option<&'a WeightBundle>,
    /// Refine peak or network seeds through all three lattice levels.
    pub refine: bool,
}

impl<'a> Pipeline<'a> {
    pub fn new(meta: &'a DatasetMeta, schedule: SearchSchedule) -> Result<Self> {
        let cfg = &meta.config;
        cfg.validate()?;
        Ok(Self {
            meta,
            q: QuantizerSpec::for_config(cfg),
            bank: SincBank::for_config(cfg)?,
            schedule,
            weights: None,
            refine: false,
        })
    }

    pub fn cfg(&self) -> &SystemConfig {
        &self.meta.config
    }

    /// Noiseless profile of the record's ground truth, cut to the stored
    /// window.
    pub fn truth_profile(&self, rec: &DatasetRecord) -> ProfiledCir {
        profile(&sample_cir(&rec.theta, self.cfg())).truncated(rec.profile.len())
    }

    /// Loss of `theta_hat` against the record's truth, in dB.
    pub fn score_db(&self, rec: &DatasetRecord, theta_hat: &MpcParamSet) -> Result<f64> {
        let truth = self.truth_profile(rec);
        let recon = reconstruct_taps(theta_hat, self.cfg(), &self.q, &self.bank, truth.len())?;
        profiling_loss_db(&truth, &recon)
    }

    /// Frequency response seen by ESPRIT: the truth plus white noise at the
    /// dataset SNR, drawn from stream `index` of the dataset seed.
    pub fn observed_freq_response(&self, rec: &DatasetRecord, index: usize) -> Vec<crate::Complex64> {
        let mut h = synth_freq_response(&rec.theta, self.cfg());
        if let Some(snr) = self.meta.spec.snr_db {
            let power = h.iter().map(|z| z.norm_sqr()).sum::<f64>() / h.len() as f64;
            let sd = (power / 10f64.powf(snr / 10.0) / 2.0).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(self.meta.seed ^ 0x5eed_e5b1);
            rng.set_stream(index as u64);
            for z in &mut h {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *z += crate::Complex64::new(re * sd, im * sd);
            }
        }
        h
    }

    /// Parameters for one record with its true model order.
    pub fn estimate(&self, rec: &DatasetRecord, index: usize, method: EstimateMethod) -> Result<MpcParamSet> {
        let cfg = self.cfg();
        let l = rec.theta.len();
        let seed = match method {
            EstimateMethod::Profiling => {
                return Ok(estimate_initial(&rec.profile, l, cfg, &self.q, &self.bank, &self.schedule)?.theta_hat)
            }
            EstimateMethod::Esprit => {
                let h = self.observed_freq_response(rec, index);
                let delays = esprit_delays(&h, &EspritConfig::new(l), cfg)?;
                return Ok(ls_amp_phase(&delays, &h, cfg)?.theta);
            }
            EstimateMethod::Peak => peak_pick_init(&rec.profile, l, cfg)?.theta,
            EstimateMethod::Nn => {
                let weights = self.weights.ok_or_else(|| {
                    Error::Config("method nn needs a weight bundle; use method peak without one".into())
                })?;
                nn_infer(&prepare_input(&rec.cir, cfg)?, weights, cfg)?
            }
        };
        if self.refine {
            Ok(estimate_from_seed(&rec.profile, &seed, cfg, &self.q, &self.bank, &self.schedule)?.theta_hat)
        } else {
            Ok(seed)
        }
    }

    /// The record's truth with every delay moved by [`TRACKING_DRIFT_TS`],
    /// observed at the dataset SNR. Returns the drifted truth and its
    /// observed profile.
    pub fn drifted(&self, rec: &DatasetRecord, index: usize) -> (MpcParamSet, ProfiledCir) {
        let cfg = self.cfg();
        let ts = cfg.sample_period();
        let mpcs = rec.theta.mpcs.iter().map(|p| Mpc::new(p.tau + TRACKING_DRIFT_TS * ts, p.alpha, p.phi)).collect();
        let theta = MpcParamSet::new(mpcs, rec.theta.t_index + 1);
        let mut cir = sample_cir(&theta, cfg);
        if let Some(snr) = self.meta.spec.snr_db {
            let mut rng = ChaCha8Rng::seed_from_u64(self.meta.seed ^ 0x7bac_0001);
            rng.set_stream(index as u64);
            let var = cir.mean_power() / 10f64.powf(snr / 10.0);
            for (s, n) in cir.samples.iter_mut().zip(band_limited_noise(&mut rng, var, cfg.n_taps(), cfg)) {
                *s += n;
            }
        }
        (theta, profile(&cir).truncated(rec.profile.len()))
    }
}

/// One benchmarked method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMethod {
    ProfilingStart,
    ProfilingTracking,
    NnStartInference,
    PeakStartInference,
    UnitaryEsprit,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 5] = [
        BenchMethod::ProfilingStart,
        BenchMethod::ProfilingTracking,
        BenchMethod::NnStartInference,
        BenchMethod::PeakStartInference,
        BenchMethod::UnitaryEsprit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::ProfilingStart => "profiling_start",
            BenchMethod::ProfilingTracking => "profiling_tracking",
            BenchMethod::NnStartInference => "nn_start_inference",
            BenchMethod::PeakStartInference => "peak_start_inference",
            BenchMethod::UnitaryEsprit => "unitary_esprit",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: BenchMethod,
    pub median_elapsed_s: f64,
    pub median_loss_db: f64,
    pub n_trials: usize,
    /// Per-trial parameters, so the losses can be recomputed.
    pub theta_hat: Vec<MpcParamSet>,
    pub loss_db: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub os: String,
    pub arch: String,
    pub threads: usize,
    pub optimized: bool,
    pub crate_version: String,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            optimized: !cfg!(debug_assertions),
            crate_version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

/// `init < tracking < start` on median times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyOrdering {
    /// Faster of the peak and network initializers.
    pub init_s: f64,
    pub tracking_s: f64,
    pub start_s: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub rows: Vec<BenchRow>,
    /// Methods left out, with the reason.
    pub skipped: Vec<(BenchMethod, String)>,
    pub latency_ordering: LatencyOrdering,
    pub environment: Environment,
}

impl BenchReport {
    pub fn row(&self, method: BenchMethod) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

/// Lower median; `NaN` for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Times one method on trial `k` (record `k mod n`). Returns the elapsed
/// seconds and the estimate scored against its truth.
fn run_once(
    p: &Pipeline,
    records: &[DatasetRecord],
    k: usize,
    method: BenchMethod,
) -> Result<(f64, MpcParamSet, f64)> {
    let idx = k % records.len();
    let rec = &records[idx];
    let cfg = p.cfg();
    let l = rec.theta.len();
    match method {
        BenchMethod::ProfilingTracking => {
            let (truth, target) = p.drifted(rec, idx);
            let t0 = Instant::now();
            let report = track(&rec.theta, &target, cfg, &p.q, &p.bank, &p.schedule)?;
            let dt = t0.elapsed().as_secs_f64();
            let truth_profile = profile(&sample_cir(&truth, cfg)).truncated(target.len());
            let recon = reconstruct_taps(&report.theta_hat, cfg, &p.q, &p.bank, target.len())?;
            Ok((dt, report.theta_hat, profiling_loss_db(&truth_profile, &recon)?))
        }
        _ => {
            let t0 = Instant::now();
            let theta = match method {
                BenchMethod::ProfilingStart => {
                    estimate_initial(&rec.profile, l, cfg, &p.q, &p.bank, &p.schedule)?.theta_hat
                }
                BenchMethod::PeakStartInference => peak_pick_init(&rec.profile, l, cfg)?.theta,
                BenchMethod::NnStartInference => {
                    let w = p.weights.ok_or_else(|| Error::Config("no weight bundle".into()))?;
                    nn_infer(&prepare_input(&rec.cir, cfg)?, w, cfg)?
                }
                BenchMethod::UnitaryEsprit => {
                    let h = p.observed_freq_response(rec, idx);
                    let delays = esprit_delays(&h, &EspritConfig::new(l), cfg)?;
                    ls_amp_phase(&delays, &h, cfg)?.theta
                }
                BenchMethod::ProfilingTracking => unreachable!(),
            };
            let dt = t0.elapsed().as_secs_f64();
            let loss = p.score_db(rec, &theta)?;
            Ok((dt, theta, loss))
        }
    }
}

/// Benchmarks every available method over `trials` runs each, cycling
/// through `records`, after [`WARMUP_RUNS`] discarded runs per method. The
/// network row needs `p.weights`; without it the row is skipped.
pub fn run_bench(p: &Pipeline, records: &[DatasetRecord], trials: usize) -> Result<BenchReport> {
    if trials < MIN_TRIALS {
        return Err(Error::Config(format!("{trials} trials are too few for timing; need at least {MIN_TRIALS}")));
    }
    if records.is_empty() {
        return Err(Error::Domain("empty dataset".into()));
    }
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for method in BenchMethod::ALL {
        if method == BenchMethod::NnStartInference && p.weights.is_none() {
            skipped.push((method, "no weight bundle supplied".into()));
            continue;
        }
        for _ in 0..WARMUP_RUNS {
            run_once(p, records, 0, method)?;
        }
        let mut elapsed = Vec::with_capacity(trials);
        let mut theta_hat = Vec::with_capacity(trials);
        let mut loss_db = Vec::with_capacity(trials);
        for k in 0..trials {
            let (dt, theta, loss) = run_once(p, records, k, method)?;
            elapsed.push(dt);
            theta_hat.push(theta);
            loss_db.push(loss);
        }
        rows.push(BenchRow {
            method,
            median_elapsed_s: median(&elapsed),
            median_loss_db: median(&loss_db),
            n_trials: trials,
            theta_hat,
            loss_db,
        });
    }
    let time = |m: BenchMethod| rows.iter().find(|r| r.method == m).map(|r| r.median_elapsed_s);
    let init_s = [BenchMethod::PeakStartInference, BenchMethod::NnStartInference]
        .into_iter()
        .filter_map(time)
        .fold(f64::INFINITY, f64::min);
    let tracking_s = time(BenchMethod::ProfilingTracking).unwrap_or(f64::NAN);
    let start_s = time(BenchMethod::ProfilingStart).unwrap_or(f64::NAN);
    let latency_ordering = LatencyOrdering { init_s, tracking_s, start_s, holds: init_s < tracking_s && tracking_s < start_s };
    Ok(BenchReport {
        schema_version: BENCH_SCHEMA_VERSION,
        rows,
        skipped,
        latency_ordering,
        environment: Environment::current(),
    })
}

/// Recomputes every stored loss of `row` from its parameters. Tracking rows
/// are scored against the drifted truth.
pub fn recompute_losses(p: &Pipeline, records: &[DatasetRecord], row: &BenchRow) -> Result<Vec<f64>> {
    row.theta_hat
        .iter()
        .enumerate()
        .map(|(k, theta)| {
            let idx = k % records.len();
            let rec = &records[idx];
            if row.method == BenchMethod::ProfilingTracking {
                let (truth, target) = p.drifted(rec, idx);
                let truth_profile = profile(&sample_cir(&truth, p.cfg())).truncated(target.len());
                let recon = reconstruct_taps(theta, p.cfg(), &p.q, &p.bank, target.len())?;
                profiling_loss_db(&truth_profile, &recon)
            } else {
                p.score_db(rec, theta)
            }
        })
        .collect()
}

/// Empirical CDF: losses sorted ascending, paired with `(i + 1)/n`.
pub fn cdf_table(losses: &[f64]) -> Vec<(f64, f64)> {
    let mut v = losses.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter().enumerate().map(|(i, x)| (x, (i + 1) as f64 / n)).collect()
}

/// `loss_db,probability` rows.
pub fn write_cdf_csv<W: Write>(mut w: W, cdf: &[(f64, f64)]) -> Result<()> {
    writeln!(w, "loss_db,probability")?;
    for (x, p) in cdf {
        writeln!(w, "{x},{p}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_dataset, DatasetSpec};
    use proptest::prelude::*;

    fn small_set(n: usize, snr_db: Option<f64>) -> (DatasetMeta, Vec<DatasetRecord>) {
        let cfg = SystemConfig::default();
        let spec = DatasetSpec {
            n_channels: n,
            model_order_range: [1, 2],
            min_separation: 1.0,
            rng_seed: 5,
            snr_db,
            ..Default::default()
        };
        let mut recs = generate_dataset(&spec, &cfg).unwrap();
        let w = cfg.obs_window_w;
        for r in &mut recs {
            r.cir.samples.truncate(w);
            r.profile = r.profile.truncated(w);
        }
        (DatasetMeta::new(&spec, &cfg, n), recs)
    }

    #[test]
    fn refuses_too_few_trials() {
        let (meta, recs) = small_set(1, None);
        let p = Pipeline::new(&meta, SearchSchedule::for_config(&meta.config)).unwrap();
        assert!(matches!(run_bench(&p, &recs, 2), Err(Error::Config(_))));
    }

    #[test]
    fn report_losses_recompute_from_parameters() {
        let (meta, recs) = small_set(3, None);
        let p = Pipeline::new(&meta, SearchSchedule::for_config(&meta.config)).unwrap();
        let report = run_bench(&p, &recs, 3).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.skipped[0].0, BenchMethod::NnStartInference);
        for row in &report.rows {
            assert!(row.median_elapsed_s > 0.0, "{}", row.method.name());
            assert_eq!(row.n_trials, 3);
            let again = recompute_losses(&p, &recs, row).unwrap();
            for (a, b) in again.iter().zip(&row.loss_db) {
                assert!((a - b).abs() <= 1e-9);
            }
            assert_eq!(row.median_loss_db, median(&row.loss_db));
        }
    }

    #[test]
    fn nn_without_weights_points_to_peak() {
        let (meta, recs) = small_set(1, None);
        let p = Pipeline::new(&meta, SearchSchedule::for_config(&meta.config)).unwrap();
        let err = p.estimate(&recs[0], 0, EstimateMethod::Nn).unwrap_err().to_string();
        assert!(err.contains("peak"), "{err}");
    }

    #[test]
    fn method_names_parse() {
        for (s, m) in [("peak", EstimateMethod::Peak), ("esprit", EstimateMethod::Esprit)] {
            assert_eq!(s.parse::<EstimateMethod>().unwrap(), m);
        }
        assert!("lstm".parse::<EstimateMethod>().is_err());
    }

    #[test]
    fn noisy_observations_are_reproducible() {
        let (meta, recs) = small_set(2, Some(20.0));
        let p = Pipeline::new(&meta, SearchSchedule::for_config(&meta.config)).unwrap();
        assert_eq!(p.observed_freq_response(&recs[1], 1), p.observed_freq_response(&recs[1], 1));
        assert_ne!(p.observed_freq_response(&recs[1], 1), p.observed_freq_response(&recs[1], 0));
        assert_ne!(p.observed_freq_response(&recs[1], 1), synth_freq_response(&recs[1].theta, p.cfg()));
    }

    #[test]
    fn cdf_small_case() {
        let cdf = cdf_table(&[-10.0, -30.0, -20.0, -20.0]);
        assert_eq!(cdf, vec![(-30.0, 0.25), (-20.0, 0.5), (-20.0, 0.75), (-10.0, 1.0)]);
        let mut out = Vec::new();
        write_cdf_csv(&mut out, &cdf[..1]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "loss_db,probability\n-30,0.25\n");
        assert!(cdf_table(&[]).is_empty());
    }

    proptest! {
        #[test]
        fn cdf_is_sorted_and_monotone(xs in prop::collection::vec(-120.0..0.0f64, 1..50)) {
            let cdf = cdf_table(&xs);
            prop_assert_eq!(cdf.len(), xs.len());
            prop_assert!(cdf.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
            prop_assert!((cdf.last().unwrap().1 - 1.0).abs() < 1e-15);
        }
    }
}
