//! Synthetic NLOS dataset generation and its on-disk format.
//!
//! A dataset directory holds two files:
//!
//! - `dataset.json`: [`DatasetMeta`] (format version, generation spec,
//!   system configuration, seed, window length).
//! - `records.bin`: one variable-length record per channel, every field a
//!   little-endian IEEE 754 binary64:
//!   `L, τ_1, α_1, φ_1, …, τ_L, α_L, φ_L, re_1, im_1, …, re_W, im_W`
//!   where the trailing `2·W` values are the complex CIR on the first W taps
//!   of the delay grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{band_limited_noise, Mpc, MpcParamSet, SystemConfig};
use crate::error::{Error, Result};
use crate::profiler::{profile, sample_cir, ComplexCir, ProfiledCir};
use num_complex::Complex64;

pub const DATASET_FORMAT_VERSION: u32 = 1;
const META_FILE: &str = "dataset.json";
const RECORD_FILE: &str = "records.bin";
const MAX_DRAW_ATTEMPTS: usize = 10_000;

/// Recipe for a synthetic dataset. Delays and the minimum separation are in
/// multiples of `T_s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub n_channels: usize,
    pub delay_range: [f64; 2],
    pub phase_range: [f64; 2],
    /// Inclusive `[L_min, L_max]`, drawn uniformly per channel.
    pub model_order_range: [usize; 2],
    /// Frequency-domain SNR against mean CIR power; `None` for noiseless.
    pub snr_db: Option<f64>,
    pub rng_seed: u64,
    pub min_separation: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_channels: 15_000,
            delay_range: [0.15, 5.0],
            phase_range: [0.0, std::f64::consts::TAU],
            model_order_range: [1, 4],
            snr_db: None,
            rng_seed: 0,
            min_separation: 0.5,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_channels == 0 {
            return bad("n_channels must be at least 1".into());
        }
        let [lo, hi] = self.delay_range;
        if !(lo >= 0.0 && lo < hi) {
            return bad(format!("invalid delay range [{lo}, {hi}]"));
        }
        if hi > cfg.m_prb as f64 {
            return bad(format!("delay range upper bound {hi} T_s exceeds M = {} T_s", cfg.m_prb));
        }
        if !(self.phase_range[0] <= self.phase_range[1]) {
            return bad("invalid phase range".into());
        }
        let [l_min, l_max] = self.model_order_range;
        if l_min == 0 || l_min > l_max {
            return bad(format!("invalid model order range [{l_min}, {l_max}]"));
        }
        if !(self.min_separation >= 0.0) {
            return bad("min_separation must be nonnegative".into());
        }
        Ok(())
    }
}

/// Ground truth plus both CIR forms for one channel.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetRecord {
    pub theta: MpcParamSet,
    pub cir: ComplexCir,
    pub profile: ProfiledCir,
}

/// Dataset metadata written next to the record file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub n_channels: usize,
    pub window_taps: usize,
    pub seed: u64,
    pub spec: DatasetSpec,
    pub config: SystemConfig,
    pub record_layout: String,
}

impl DatasetMeta {
    pub fn new(spec: &DatasetSpec, cfg: &SystemConfig, n_channels: usize) -> Self {
        Self {
            format_version: DATASET_FORMAT_VERSION,
            n_channels,
            window_taps: cfg.obs_window_w,
            seed: spec.rng_seed,
            spec: spec.clone(),
            config: cfg.clone(),
            record_layout: "f64le: L, L x (tau_s, alpha, phi_rad), W x (re, im)".into(),
        }
    }
}

fn draw_delays(rng: &mut ChaCha8Rng, l: usize, spec: &DatasetSpec, ts: f64) -> Result<Vec<f64>> {
    let [lo, hi] = spec.delay_range;
    let sep = spec.min_separation;
    if (l - 1) as f64 * sep >= hi - lo && l > 1 {
        return Err(Error::Generation(format!(
            "{l} paths with separation {sep} T_s do not fit into [{lo}, {hi}] T_s"
        )));
    }
    for _ in 0..MAX_DRAW_ATTEMPTS {
        let mut taus: Vec<f64> = (0..l).map(|_| rng.random_range(lo..hi)).collect();
        taus.sort_by(f64::total_cmp);
        if taus.windows(2).all(|w| w[1] - w[0] >= sep && w[1] > w[0]) {
            return Ok(taus.into_iter().map(|t| t * ts).collect());
        }
    }
    Err(Error::Generation(format!(
        "could not place {l} paths with separation {sep} T_s after {MAX_DRAW_ATTEMPTS} draws"
    )))
}

/// Draws one channel. The RNG stream depends only on `(seed, index)`.
pub(crate) fn generate_channel(spec: &DatasetSpec, cfg: &SystemConfig, index: usize) -> Result<DatasetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    rng.set_stream(index as u64);
    let [l_min, l_max] = spec.model_order_range;
    let l = rng.random_range(l_min..=l_max);
    let taus = draw_delays(&mut rng, l, spec, cfg.sample_period())?;
    let amps: Vec<f64> = (0..l).map(|_| Exp1.sample(&mut rng)).collect();
    let peak = amps.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    let [p_lo, p_hi] = spec.phase_range;
    let mpcs = taus
        .into_iter()
        .zip(amps)
        .map(|(tau, a)| {
            let phi = if p_hi > p_lo { rng.random_range(p_lo..p_hi) } else { p_lo };
            Mpc::new(tau, a / peak, crate::wrap_phase(phi))
        })
        .collect();
    let theta = MpcParamSet::new(mpcs, 0);
    let mut cir = sample_cir(&theta, cfg);
    if let Some(snr_db) = spec.snr_db {
        let power = cir.mean_power();
        let variance = power / 10f64.powf(snr_db / 10.0);
        let noise = band_limited_noise(&mut rng, variance, cir.samples.len(), cfg);
        for (s, n) in cir.samples.iter_mut().zip(noise) {
            *s += n;
        }
    }
    let profile = profile(&cir);
    Ok(DatasetRecord { theta, cir, profile })
}

/// Generates `spec.n_channels` channels. Output is bit-reproducible for a
/// given seed regardless of how the work is scheduled across threads.
pub fn generate_dataset(spec: &DatasetSpec, cfg: &SystemConfig) -> Result<Vec<DatasetRecord>> {
    cfg.validate()?;
    spec.validate(cfg)?;
    (0..spec.n_channels)
        .into_par_iter()
        .map(|i| generate_channel(spec, cfg, i))
        .collect()
}

/// Writes `dataset.json` and `records.bin` into `dir`. Existing files are
/// only replaced when `overwrite` is set.
pub fn write_dataset(dir: &Path, meta: &DatasetMeta, records: &[DatasetRecord], overwrite: bool) -> Result<()> {
    let meta_path = dir.join(META_FILE);
    let rec_path = dir.join(RECORD_FILE);
    if !overwrite && (meta_path.exists() || rec_path.exists()) {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::AlreadyExists,
            format!("dataset already present in {}", dir.display()),
        )));
    }
    fs::create_dir_all(dir)?;
    let w = meta.window_taps;
    let mut out = BufWriter::new(fs::File::create(&rec_path)?);
    for rec in records {
        if rec.cir.samples.len() < w {
            return Err(Error::Domain(format!("record CIR shorter than window {w}")));
        }
        out.write_all(&(rec.theta.len() as f64).to_le_bytes())?;
        for p in &rec.theta.mpcs {
            for v in [p.tau, p.alpha, p.phi] {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        for z in &rec.cir.samples[..w] {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
    }
    out.flush()?;
    fs::write(&meta_path, serde_json::to_vec_pretty(meta)?)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn f64(&mut self) -> Result<f64> {
        let bytes = self
            .buf
            .get(self.pos..self.pos + 8)
            .ok_or_else(|| Error::Format(format!("record file truncated at byte {}", self.pos)))?;
        self.pos += 8;
        Ok(f64::from_le_bytes(bytes.try_into().expect("8-byte slice")))
    }
}

/// Reads a dataset directory. CIRs come back with the stored `W` taps.
pub fn read_dataset(dir: &Path) -> Result<(DatasetMeta, Vec<DatasetRecord>)> {
    let meta: DatasetMeta = serde_json::from_slice(&fs::read(dir.join(META_FILE))?)
        .map_err(|e| Error::Format(format!("dataset metadata: {e}")))?;
    if meta.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported dataset format version {}", meta.format_version)));
    }
    let buf = fs::read(dir.join(RECORD_FILE))?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    let w = meta.window_taps;
    let mut records = Vec::with_capacity(meta.n_channels);
    for n in 0..meta.n_channels {
        let l = cur.f64()?;
        if !(l >= 1.0 && l.fract() == 0.0 && l <= 4096.0) {
            return Err(Error::Format(format!("record {n}: invalid model order {l}")));
        }
        let mut mpcs = Vec::with_capacity(l as usize);
        for _ in 0..l as usize {
            mpcs.push(Mpc::new(cur.f64()?, cur.f64()?, cur.f64()?));
        }
        let mut samples = Vec::with_capacity(w);
        for _ in 0..w {
            samples.push(Complex64::new(cur.f64()?, cur.f64()?));
        }
        let cir = ComplexCir { samples, t_index: 0 };
        let profile = profile(&cir);
        records.push(DatasetRecord { theta: MpcParamSet::new(mpcs, 0), cir, profile });
    }
    if cur.pos != buf.len() {
        return Err(Error::Format(format!("{} trailing bytes in record file", buf.len() - cur.pos)));
    }
    Ok((meta, records))
}
