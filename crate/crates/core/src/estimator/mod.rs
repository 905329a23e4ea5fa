//! Rule-based iterative profiling estimator.
//!
//! The start estimate seeds L paths (peak picking unless a seed is given)
//! and refines them through coarse, medium and fine lattices. Each
//! refinement iteration visits the paths in order of decreasing amplitude and
//! lets each one take the best of its 27 `{−Δ, 0, +Δ}³` variations in delay,
//! amplitude and phase, scored by the windowed error power. Tracking reuses
//! the previous estimate and only searches medium and fine lattices inside a
//! box around it.

mod schedule;
mod search;

pub use schedule::{Level, SearchSchedule, StepSet};

use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::channel::{Mpc, MpcParamSet, SystemConfig};
use crate::error::{Error, Result};
use crate::initializer::peak_pick_init;
use crate::profiler::{profiling_loss_db, reconstruct_taps, ProfiledCir, QuantizerSpec, SincBank};
use search::{Bounds, Searcher};

/// Sweeps performed per level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationCounts {
    pub coarse: usize,
    pub medium: usize,
    pub fine: usize,
}

/// Outcome of a start estimate or tracking step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub theta_hat: MpcParamSet,
    /// Normalized squared error of the reconstruction against the target, dB.
    pub loss_db: f64,
    pub iterations_used: IterationCounts,
    /// Wall-clock seconds.
    pub elapsed: f64,
    /// Paths whose amplitude ended below one quantizer step.
    pub degenerate: Vec<usize>,
    /// The seed had to be padded because the profile had too few peaks.
    pub seed_padded: bool,
    /// Tracking ended above the schedule's lost-track loss.
    pub track_lost: bool,
}

fn window_slice<'t>(target: &'t ProfiledCir, schedule: &SearchSchedule) -> Result<&'t [f64]> {
    schedule.window.check(target.len())?;
    Ok(&target.samples[schedule.window.range()])
}

fn finish(
    theta: MpcParamSet,
    target: &ProfiledCir,
    cfg: &SystemConfig,
    q: &QuantizerSpec,
    bank: &SincBank,
    iterations_used: IterationCounts,
    start: Instant,
) -> Result<EstimateReport> {
    let recon = reconstruct_taps(&theta, cfg, q, bank, target.len())?;
    let loss_db = profiling_loss_db(target, &recon)?;
    let degenerate = theta
        .mpcs
        .iter()
        .enumerate()
        .filter(|(_, p)| p.alpha < q.amp_step)
        .map(|(l, _)| l)
        .collect();
    Ok(EstimateReport {
        theta_hat: theta,
        loss_db,
        iterations_used,
        elapsed: start.elapsed().as_secs_f64(),
        degenerate,
        seed_padded: false,
        track_lost: false,
    })
}

/// One refinement iteration at `level`. Path order and identity are kept;
/// phases come back wrapped into `[0, 2π)`.
pub fn refine(
    theta: &MpcParamSet,
    target: &ProfiledCir,
    level: Level,
    cfg: &SystemConfig,
    q: &QuantizerSpec,
    bank: &SincBank,
    schedule: &SearchSchedule,
) -> Result<MpcParamSet> {
    let win = window_slice(target, schedule)?;
    let mut s = Searcher::new(cfg, q, bank, win, schedule.window.start - 1, theta.mpcs.clone())?;
    s.sweep(&schedule.steps(level))?;
    Ok(MpcParamSet::new(s.params, theta.t_index))
}

/// Start estimate over the full parameter space. Candidates are the
/// peak-picking seed and a seed grown one path at a time at the largest
/// residual tap; each is refined through all three levels. The best result
/// then repeatedly relocates its weakest path to the residual peak while that
/// lowers the window error.
pub fn estimate_initial(
    target: &ProfiledCir,
    model_order: usize,
    cfg: &SystemConfig,
    q: &QuantizerSpec,
    bank: &SincBank,
    schedule: &SearchSchedule,
) -> Result<EstimateReport> {
    let start = Instant::now();
    check_order(model_order, schedule)?;
    schedule.validate(q)?;
    let win = nonzero_window(target, schedule)?;
    let first_tap = schedule.window.start - 1;
    let seed = peak_pick_init(target, model_order, cfg)?;
    let mut iterations = IterationCounts::default();
    let mut run = |mpcs: Vec<Mpc>| -> Result<Descent> {
        let d = descend(cfg, q, bank, win, first_tap, mpcs, schedule)?;
        iterations.coarse += d.iterations.coarse;
        iterations.medium += d.iterations.medium;
        iterations.fine += d.iterations.fine;
        Ok(d)
    };
    let mut best = run(seed.theta.mpcs.clone())?;

    let mut grown: Vec<Mpc> = Vec::with_capacity(model_order);
    for _ in 0..model_order {
        let mut round: Option<Descent> = None;
        for cand in insertion_seeds(cfg, q, bank, win, first_tap, &grown)? {
            let d = run(cand)?;
            if round.as_ref().is_none_or(|r| d.score < r.score) {
                round = Some(d);
            }
        }
        grown = round.expect("at least one insertion seed").params;
    }
    let grown = run(grown)?;
    if grown.score < best.score {
        best = grown;
    }

    for _ in 0..RELOCATION_ROUNDS * model_order {
        if model_order < 2 || best.score <= 0.0 {
            break;
        }
        let weakest = (0..model_order)
            .min_by(|&a, &b| best.params[a].alpha.total_cmp(&best.params[b].alpha).then(a.cmp(&b)))
            .expect("model order is positive");
        let mut rest = best.params.clone();
        rest.remove(weakest);
        let mut improved = false;
        for cand in insertion_seeds(cfg, q, bank, win, first_tap, &rest)? {
            let d = run(cand)?;
            if d.score < best.score * (1.0 - RELOCATION_GAIN) {
                best = d;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }

    let theta = MpcParamSet::new(best.params, target.t_index).normalized();
    let mut report = finish(theta, target, cfg, q, bank, iterations, start)?;
    report.seed_padded = seed.padded;
    Ok(report)
}

/// Relocation attempts per path.
const RELOCATION_ROUNDS: usize = 2;
/// Relative window-error reduction a relocation must achieve.
const RELOCATION_GAIN: f64 = 1e-9;
/// Phases tried for a path inserted next to existing ones.
const INSERTION_PHASES: usize = 4;

struct Descent {
    params: Vec<Mpc>,
    score: f64,
    iterations: IterationCounts,
}

fn descend(
    cfg: &SystemConfig,
    q: &QuantizerSpec,
    bank: &SincBank,
    win: &[f64],
    first_tap: usize,
    mpcs: Vec<Mpc>,
    schedule: &SearchSchedule,
) -> Result<Descent> {
    let mut s = Searcher::new(cfg, q, bank, win, first_tap, mpcs)?;
    let (cap, tol) = (schedule.max_iterations_per_level, schedule.convergence_tol);
    let iterations = IterationCounts {
        coarse: s.run_level(&schedule.coarse, cap, tol)?,
        medium: s.run_level(&schedule.medium, cap, tol)?,
        fine: s.run_level(&schedule.fine, cap, tol)?,
    };
    Ok(Descent { score: s.score(), params: s.params, iterations })
}

/// `existing` plus one path at the largest residual tap, once per trial
/// phase (a lone path only needs phase zero).
fn insertion_seeds(
    cfg: &SystemConfig,
    q: &QuantizerSpec,
    bank: &SincBank,
    win: &[f64],
    first_tap: usize,
    existing: &[Mpc],
) -> Result<Vec<Vec<Mpc>>> {
    let s = Searcher::new(cfg, q, bank, win, first_tap, existing.to_vec())?;
    let res = s.residual();
    let tau_max = cfg.max_delay() - q.delay_step;
    let k = (0..res.len())
        .filter(|&k| s.tap_delay(k) <= tau_max)
        .max_by(|&a, &b| res[a].total_cmp(&res[b]).then(b.cmp(&a)))
        .ok_or_else(|| Error::Domain("evaluation window holds no admissible delay".into()))?;
    let n_phases = if existing.is_empty() { 1 } else { INSERTION_PHASES };
    Ok((0..n_phases)
        .map(|i| {
            let phi = i as f64 * std::f64::consts::TAU / n_phases as f64;
            let mut cand = existing.to_vec();
            cand.push(Mpc::new(s.tap_delay(k), res[k].max(q.amp_step), phi));
            cand
        })
        .collect())
}

fn nonzero_window<'t>(target: &'t ProfiledCir, schedule: &SearchSchedule) -> Result<&'t [f64]> {
    let win = window_slice(target, schedule)?;
    if !win.iter().any(|&x| x > 0.0) {
        return Err(Error::Domain("target profile is zero inside the evaluation window".into()));
    }
    Ok(win)
}

/// Refines an explicit seed (for example a network inference) through all
/// three levels, without the multi-start search.
pub fn estimate_from_seed(
    target: &ProfiledCir,
    seed: &MpcParamSet,
    cfg: &SystemConfig,
    q: &QuantizerSpec,
    bank: &SincBank,
    schedule: &SearchSchedule,
) -> Result<EstimateReport> {
    let start = Instant::now();
    check_order(seed.len(), schedule)?;
    schedule.validate(q)?;
    let win = nonzero_window(target, schedule)?;
    let d = descend(cfg, q, bank, win, schedule.window.start - 1, seed.mpcs.clone(), schedule)?;
    let theta = MpcParamSet::new(d.params, target.t_index).normalized();
    finish(theta, target, cfg, q, bank, d.iterations, start)
}

fn check_order(model_order: usize, schedule: &SearchSchedule) -> Result<()> {
    if model_order == 0 || model_order > schedule.max_model_order {
        return Err(Error::Config(format!(
            "model order {model_order} outside 1..={}",
            schedule.max_model_order
        )));
    }
    Ok(())
}

/// Tracking step: refine `prev` against the next profile on the medium and
/// fine lattices, each parameter confined to `±tracking_radius · Δ_medium`
/// of its previous value. Output path `l` continues input path `l`.
pub fn track(
    prev: &MpcParamSet,
    target_next: &ProfiledCir,
    cfg: &SystemConfig,
    q: &QuantizerSpec,
    bank: &SincBank,
    schedule: &SearchSchedule,
) -> Result<EstimateReport> {
    let start = Instant::now();
    schedule.validate(q)?;
    check_order(prev.len(), schedule)?;
    let win = window_slice(target_next, schedule)?;
    let energy: f64 = win.iter().map(|x| x * x).sum();
    if !(energy >= schedule.energy_floor) {
        return Err(Error::TrackLost(format!(
            "target energy {energy:e} below floor {:e}",
            schedule.energy_floor
        )));
    }
    let mut s = Searcher::new(cfg, q, bank, win, schedule.window.start - 1, prev.mpcs.clone())?;
    s.bounds = Some(
        s.params
            .iter()
            .map(|p| Bounds::around(p, &schedule.medium, schedule.tracking_radius))
            .collect(),
    );
    let (cap, tol) = (schedule.max_iterations_per_level, schedule.convergence_tol);
    let iterations = IterationCounts {
        coarse: 0,
        medium: s.run_level(&schedule.medium, cap, tol)?,
        fine: s.run_level(&schedule.fine, cap, tol)?,
    };
    let theta = MpcParamSet::new(s.params, target_next.t_index);
    let mut report = finish(theta, target_next, cfg, q, bank, iterations, start)?;
    report.track_lost = report.loss_db > schedule.track_lost_db;
    Ok(report)
}
