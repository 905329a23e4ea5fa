//! Greedy lattice search over the 27 per-component parameter variations.

use num_complex::Complex64;

use super::StepSet;
use crate::channel::{Mpc, SystemConfig};
use crate::error::{Error, Result};
use crate::profiler::{path_coefficient, QuantizerSpec, SincBank};
use crate::{wrap_phase, wrap_pi};

/// Index of the zero variation in the `3 × 3 × 3` enumeration.
pub(crate) const ZERO_VARIATION: usize = 13;

/// Relative margin a variation must beat the current score by; keeps
/// rounding noise from accepting moves that do not lower the error.
const ACCEPT_MARGIN: f64 = 1e-12;

/// Box confining one path during tracking.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Bounds {
    pub tau: (f64, f64),
    pub alpha: (f64, f64),
    pub phi_center: f64,
    pub phi_radius: f64,
}

impl Bounds {
    pub fn around(p: &Mpc, steps: &StepSet, radius: f64) -> Self {
        let (rt, ra) = (radius * steps.delay, radius * steps.amplitude);
        Self {
            tau: (p.tau - rt, p.tau + rt),
            alpha: (p.alpha - ra, p.alpha + ra),
            phi_center: p.phi,
            phi_radius: radius * steps.phase,
        }
    }

    fn admits(&self, p: &Mpc) -> bool {
        const EPS: f64 = 1e-9;
        let (tl, th) = self.tau;
        let (al, ah) = self.alpha;
        let tol_t = EPS * (th - tl).abs().max(1e-18);
        p.tau >= tl - tol_t
            && p.tau <= th + tol_t
            && p.alpha >= al - EPS
            && p.alpha <= ah + EPS
            && wrap_pi(p.phi - self.phi_center).abs() <= self.phi_radius + EPS
    }
}

/// Search state over the evaluation window: current parameters and their
/// quantized complex contributions on every window tap.
pub(crate) struct Searcher<'a> {
    q: &'a QuantizerSpec,
    bank: &'a SincBank,
    target: &'a [f64],
    tap_delays: Vec<f64>,
    pub params: Vec<Mpc>,
    contrib: Vec<Vec<Complex64>>,
    pub bounds: Option<Vec<Bounds>>,
    score: f64,
    tau_max: f64,
}

impl<'a> Searcher<'a> {
    pub fn new(
        cfg: &'a SystemConfig,
        q: &'a QuantizerSpec,
        bank: &'a SincBank,
        target: &'a [f64],
        first_tap: usize,
        params: Vec<Mpc>,
    ) -> Result<Self> {
        let tap_delays = (0..target.len()).map(|k| cfg.tap_delay(first_tap + k)).collect();
        let mut s = Self {
            q,
            bank,
            target,
            tap_delays,
            params: Vec::new(),
            contrib: Vec::new(),
            bounds: None,
            score: 0.0,
            tau_max: cfg.max_delay() - q.delay_step,
        };
        let params: Vec<Mpc> = params.into_iter().map(|p| s.clamp(p)).collect();
        s.contrib = params.iter().map(|p| s.contribution(p)).collect::<Result<_>>()?;
        s.params = params;
        s.score = s.current_score();
        Ok(s)
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    /// `target − |reconstruction|` on every window tap.
    pub fn residual(&self) -> Vec<f64> {
        self.target
            .iter()
            .enumerate()
            .map(|(k, t)| t - self.contrib.iter().map(|c| c[k]).sum::<Complex64>().norm())
            .collect()
    }

    pub fn tap_delay(&self, k: usize) -> f64 {
        self.tap_delays[k]
    }

    fn clamp(&self, mut p: Mpc) -> Mpc {
        p.tau = p.tau.clamp(0.0, self.tau_max);
        p.alpha = p.alpha.max(0.0);
        p.phi = wrap_phase(p.phi);
        p
    }

    fn column(&self, tau: f64) -> Result<Vec<f64>> {
        let tq = self.q.delay(tau);
        self.tap_delays
            .iter()
            .map(|t| {
                self.bank
                    .value(t - tq)
                    .ok_or_else(|| Error::Domain(format!("delay {tq:e} s outside the sinc bank range")))
            })
            .collect()
    }

    fn contribution(&self, p: &Mpc) -> Result<Vec<Complex64>> {
        let c = path_coefficient(p, self.q);
        Ok(self.column(p.tau)?.into_iter().map(|s| c * s).collect())
    }

    fn current_score(&self) -> f64 {
        let mut total = 0.0;
        for (k, t) in self.target.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in &self.contrib {
                acc += c[k];
            }
            let d = acc.norm() - t;
            total += d * d;
        }
        total
    }

    /// Paths by descending amplitude, ties by delay, phase, then index.
    fn sweep_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.params.len()).collect();
        order.sort_by(|&a, &b| {
            let (pa, pb) = (&self.params[a], &self.params[b]);
            pb.alpha
                .total_cmp(&pa.alpha)
                .then(pa.tau.total_cmp(&pb.tau))
                .then(pa.phi.total_cmp(&pb.phi))
                .then(a.cmp(&b))
        });
        order
    }

    /// One iteration: every path in turn tries all 27 variations and keeps
    /// the best. Returns whether any path moved.
    pub fn sweep(&mut self, steps: &StepSet) -> Result<bool> {
        let mut moved = false;
        let n = self.target.len();
        let mut base = vec![Complex64::new(0.0, 0.0); n];
        for l in self.sweep_order() {
            base.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            for (j, c) in self.contrib.iter().enumerate() {
                if j != l {
                    for (b, x) in base.iter_mut().zip(c) {
                        *b += x;
                    }
                }
            }
            let cur = self.params[l];
            let zero_score = score_with(&base, &self.contrib[l], self.target);
            let mut best: Option<(f64, Mpc, Complex64, usize)> = None;
            let mut cols: [Option<Vec<f64>>; 3] = [None, None, None];
            for it in 0..3 {
                let tau = cur.tau + (it as f64 - 1.0) * steps.delay;
                let probe = self.clamp(Mpc { tau, ..cur });
                if !self.allowed(l, &Mpc { tau: probe.tau, ..cur }) {
                    continue;
                }
                let col = cols[it].insert(self.column(probe.tau)?);
                for ia in 0..3 {
                    for ip in 0..3 {
                        let idx = 9 * it + 3 * ia + ip;
                        if idx == ZERO_VARIATION {
                            continue;
                        }
                        let cand = self.clamp(Mpc {
                            tau: probe.tau,
                            alpha: cur.alpha + (ia as f64 - 1.0) * steps.amplitude,
                            phi: cur.phi + (ip as f64 - 1.0) * steps.phase,
                        });
                        if !self.allowed(l, &cand) {
                            continue;
                        }
                        let coef = path_coefficient(&cand, self.q);
                        let s = score_scaled(&base, coef, col, self.target);
                        if best.as_ref().map_or(true, |b| s < b.0) {
                            best = Some((s, cand, coef, it));
                        }
                    }
                }
            }
            if let Some((s, cand, coef, it)) = best {
                if s < zero_score - ACCEPT_MARGIN * zero_score {
                    let col = cols[it].take().expect("column computed for accepted variation");
                    self.params[l] = cand;
                    self.contrib[l] = col.into_iter().map(|x| coef * x).collect();
                    moved = true;
                }
            }
        }
        self.score = self.current_score();
        Ok(moved)
    }

    fn allowed(&self, l: usize, p: &Mpc) -> bool {
        self.bounds.as_ref().map_or(true, |b| b[l].admits(p))
    }

    /// Runs sweeps until convergence or the cap; returns sweeps performed.
    pub fn run_level(&mut self, steps: &StepSet, max_iterations: usize, tol: f64) -> Result<usize> {
        let mut iters = 0;
        while iters < max_iterations {
            let before = self.score;
            let moved = self.sweep(steps)?;
            iters += 1;
            if !moved || before <= 0.0 || (before - self.score) / before < tol {
                break;
            }
        }
        Ok(iters)
    }
}

fn score_with(base: &[Complex64], own: &[Complex64], target: &[f64]) -> f64 {
    base.iter()
        .zip(own)
        .zip(target)
        .map(|((b, o), t)| {
            let d = (b + o).norm() - t;
            d * d
        })
        .sum()
}

fn score_scaled(base: &[Complex64], coef: Complex64, col: &[f64], target: &[f64]) -> f64 {
    base.iter()
        .zip(col)
        .zip(target)
        .map(|((b, s), t)| {
            let d = (b + coef * s).norm() - t;
            d * d
        })
        .sum()
}
