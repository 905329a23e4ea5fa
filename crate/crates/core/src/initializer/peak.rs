use crate::channel::{Mpc, MpcParamSet, SystemConfig};
use crate::error::{Error, Result};
use crate::profiler::ProfiledCir;

/// Start parameters plus a flag raised when the profile could not supply
/// `L` distinct peaks.
#[derive(Clone, Debug, PartialEq)]
pub struct Seed {
    pub theta: MpcParamSet,
    pub padded: bool,
}

/// Picks the `L` largest local maxima of the profile that are at least
/// `n_st/2` taps apart. Delay comes from the tap position, amplitude from the
/// peak height, phase is zero. Missing peaks are padded with the largest
/// remaining taps and flagged; an all-zero profile yields `L` zero paths.
pub fn peak_pick_init(profile: &ProfiledCir, model_order: usize, cfg: &SystemConfig) -> Result<Seed> {
    if model_order == 0 {
        return Err(Error::Config("model order must be at least 1".into()));
    }
    let x = &profile.samples;
    // the last grid tap sits exactly on M·T_s, outside the delay range
    let n = x.len().min(cfg.n_taps() - 1);
    let t_index = profile.t_index;
    if !x[..n].iter().any(|&v| v > 0.0) {
        let mpcs = vec![Mpc::new(0.0, 0.0, 0.0); model_order];
        return Ok(Seed { theta: MpcParamSet::new(mpcs, t_index), padded: true });
    }
    let is_peak = |k: usize| {
        let v = x[k];
        v > 0.0 && (k == 0 || v >= x[k - 1]) && (k + 1 >= n || v > x[k + 1])
    };
    let mut peaks: Vec<usize> = (0..n).filter(|&k| is_peak(k)).collect();
    peaks.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let spacing = (cfg.n_st / 2).max(1);
    let mut chosen: Vec<usize> = Vec::with_capacity(model_order);
    for k in peaks {
        if chosen.len() == model_order {
            break;
        }
        if chosen.iter().all(|&c| c.abs_diff(k) >= spacing) {
            chosen.push(k);
        }
    }
    let padded = chosen.len() < model_order;
    if padded {
        let mut rest: Vec<usize> = (0..n).filter(|k| !chosen.contains(k)).collect();
        rest.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
        chosen.extend(rest.into_iter().take(model_order - chosen.len()));
    }
    chosen.sort_unstable();
    let mpcs = chosen.into_iter().map(|k| Mpc::new(cfg.tap_delay(k), x[k], 0.0)).collect();
    Ok(Seed { theta: MpcParamSet::new(mpcs, t_index), padded })
}
