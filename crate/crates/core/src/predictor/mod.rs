//! Channel prediction: per-path parameter tracks over the observed instants,
//! cubic-spline extrapolation of every parameter and reconstruction of the
//! predicted profile.

mod scenario;
mod spline;

pub use scenario::{
    run_scenario, Law, ObservationMode, PathScenario, Scenario, ScenarioRun, DEFAULT_SPACING_MS,
};
pub use spline::{CubicSpline, SplineBoundary};

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::channel::{Mpc, MpcParamSet, SystemConfig};
use crate::error::{Error, Result};
use crate::profiler::{profiling_loss_db, reconstruct, ProfiledCir, QuantizerSpec, SincBank};
use crate::wrap_pi;

/// Losses above this are reported as a violated smooth-evolution model.
pub const MODEL_VIOLATION_DB: f64 = -10.0;

/// One path's parameters over the observed instants; phases unwrapped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterTrack {
    pub t_indices: Vec<i64>,
    pub tau: Vec<f64>,
    pub alpha: Vec<f64>,
    pub phi_unwrapped: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterTrackSet {
    pub tracks: Vec<ParameterTrack>,
    /// Last observed instant.
    pub t_ob: i64,
}

/// How path `l` at one instant is matched to path `l` at the next.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Association {
    /// Estimates come from tracking; index `l` is the same path throughout.
    #[default]
    Tracked,
    /// Independent estimates; greedy nearest-delay matching between instants.
    NearestDelay,
}

/// Greedy matching: repeatedly pairs the closest (track, candidate) delays.
/// Returns `perm` with `perm[track] = candidate`.
pub fn greedy_delay_matching(prev: &[f64], next: &[f64]) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize, usize)> = prev
        .iter()
        .enumerate()
        .flat_map(|(i, a)| next.iter().enumerate().map(move |(j, b)| ((a - b).abs(), i, j)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut perm = vec![usize::MAX; prev.len()];
    let mut used = vec![false; next.len()];
    for (_, i, j) in pairs {
        if perm[i] == usize::MAX && !used[j] {
            perm[i] = j;
            used[j] = true;
        }
    }
    perm
}

/// Builds tracks from parameter sets at strictly increasing instants.
pub fn fit_tracks(estimates: &[MpcParamSet], association: Association) -> Result<ParameterTrackSet> {
    if estimates.len() < 2 {
        return Err(Error::Domain(format!("need at least 2 estimates, got {}", estimates.len())));
    }
    let l = estimates[0].len();
    if l == 0 || estimates.iter().any(|e| e.len() != l) {
        return Err(Error::Domain("model order differs across instants".into()));
    }
    if estimates.windows(2).any(|w| w[1].t_index <= w[0].t_index) {
        return Err(Error::Domain("instants must be strictly increasing".into()));
    }
    let mut tracks: Vec<ParameterTrack> = estimates[0]
        .mpcs
        .iter()
        .map(|p| ParameterTrack {
            t_indices: vec![estimates[0].t_index],
            tau: vec![p.tau],
            alpha: vec![p.alpha],
            phi_unwrapped: vec![p.phi],
        })
        .collect();
    for est in &estimates[1..] {
        let perm: Vec<usize> = match association {
            Association::Tracked => (0..l).collect(),
            Association::NearestDelay => {
                let last: Vec<f64> = tracks.iter().map(|t| *t.tau.last().expect("nonempty track")).collect();
                let next: Vec<f64> = est.taus().collect();
                greedy_delay_matching(&last, &next)
            }
        };
        for (track, &j) in tracks.iter_mut().zip(&perm) {
            let p = est.mpcs[j];
            let prev_phi = *track.phi_unwrapped.last().expect("nonempty track");
            track.t_indices.push(est.t_index);
            track.tau.push(p.tau);
            track.alpha.push(p.alpha);
            track.phi_unwrapped.push(prev_phi + wrap_pi(p.phi - prev_phi));
        }
    }
    let t_ob = estimates.last().expect("at least two estimates").t_index;
    Ok(ParameterTrackSet { tracks, t_ob })
}

/// Evaluates every parameter spline at `t_target`. Amplitudes are clamped at
/// zero; phases stay unwrapped.
pub fn extrapolate(tracks: &ParameterTrackSet, t_target: i64, boundary: SplineBoundary) -> Result<MpcParamSet> {
    if tracks.tracks.is_empty() {
        return Err(Error::Domain("no tracks".into()));
    }
    let mut mpcs = Vec::with_capacity(tracks.tracks.len());
    for tr in &tracks.tracks {
        // relative instants keep the fit invariant to index shifts
        let t0 = tr.t_indices[0];
        let t: Vec<f64> = tr.t_indices.iter().map(|&k| (k - t0) as f64).collect();
        let x = (t_target - t0) as f64;
        let eval = |y: &[f64]| CubicSpline::fit(&t, y, boundary).map(|s| s.eval(x));
        mpcs.push(Mpc::new(eval(&tr.tau)?, eval(&tr.alpha)?.max(0.0), eval(&tr.phi_unwrapped)?));
    }
    Ok(MpcParamSet::new(mpcs, t_target))
}

/// Extrapolated parameters inserted into the discrete reconstruction.
pub fn predict_csi(
    tracks: &ParameterTrackSet,
    t_target: i64,
    boundary: SplineBoundary,
    cfg: &SystemConfig,
    q: &QuantizerSpec,
    bank: &SincBank,
) -> Result<ProfiledCir> {
    reconstruct(&extrapolate(tracks, t_target, boundary)?, cfg, q, bank)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonRow {
    pub t_index: i64,
    pub loss_db: f64,
    pub model_violation: bool,
}

/// Profiling loss of every predicted profile against its truth.
pub fn evaluate_horizon(truth: &[ProfiledCir], predicted: &[ProfiledCir]) -> Result<Vec<HorizonRow>> {
    if truth.len() != predicted.len() {
        return Err(Error::Domain(format!(
            "{} truth profiles vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    truth
        .iter()
        .zip(predicted)
        .map(|(t, p)| {
            let loss_db = profiling_loss_db(t, p)?;
            Ok(HorizonRow { t_index: t.t_index, loss_db, model_violation: loss_db > MODEL_VIOLATION_DB })
        })
        .collect()
}

/// `t_ms,loss_db` with `t_ms = t_index · spacing_ms`.
pub fn write_horizon_csv<W: Write>(mut w: W, rows: &[HorizonRow], spacing_ms: f64) -> Result<()> {
    writeln!(w, "t_ms,loss_db")?;
    for r in rows {
        writeln!(w, "{},{}", r.t_index as f64 * spacing_ms, r.loss_db)?;
    }
    Ok(())
}

/// JSON summary of one prediction run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonSummary {
    pub schema_version: u32,
    pub observed: [i64; 2],
    pub horizon: usize,
    pub spacing_ms: f64,
    pub median_loss_db: Option<f64>,
    pub worst_loss_db: Option<f64>,
    pub violations: usize,
    pub rows: Vec<HorizonRow>,
}

impl HorizonSummary {
    pub fn new(observed: [i64; 2], spacing_ms: f64, rows: Vec<HorizonRow>) -> Self {
        let mut losses: Vec<f64> = rows.iter().map(|r| r.loss_db).collect();
        losses.sort_by(f64::total_cmp);
        Self {
            schema_version: 1,
            observed,
            horizon: rows.len(),
            spacing_ms,
            median_loss_db: if losses.is_empty() { None } else { Some(losses[(losses.len() - 1) / 2]) },
            worst_loss_db: losses.last().copied(),
            violations: rows.iter().filter(|r| r.model_violation).count(),
            rows,
        }
    }
}
