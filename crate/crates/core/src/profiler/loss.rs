use serde::{Deserialize, Serialize};

use super::ProfiledCir;
use crate::error::{Error, Result};

/// Reporting floor for losses in dB; an exact match reports this value.
pub const LOSS_DB_FLOOR: f64 = -120.0;

/// Inclusive evaluation window in one-based tap numbers, matching the tap
/// numbering of the delay grid (tap `k` sits at `k·T_s/n_st`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalWindow {
    pub start: usize,
    pub stop: usize,
}

impl EvalWindow {
    pub fn new(start: usize, stop: usize) -> Self {
        Self { start, stop }
    }

    /// Zero-based index range.
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start - 1..self.stop
    }

    pub fn check(&self, len: usize) -> Result<()> {
        if self.start == 0 || self.start > self.stop || self.stop > len {
            return Err(Error::Domain(format!(
                "window [{}, {}] invalid for {len} taps",
                self.start, self.stop
            )));
        }
        Ok(())
    }
}

/// Windowed error power `Σ_{k ∈ window} |a_k − b_k|²`.
pub fn window_error(a: &ProfiledCir, b: &ProfiledCir, window: EvalWindow) -> Result<f64> {
    window.check(a.len().min(b.len()))?;
    let r = window.range();
    Ok(a.samples[r.clone()]
        .iter()
        .zip(&b.samples[r])
        .map(|(x, y)| (x - y) * (x - y))
        .sum())
}

/// Normalized squared error `‖truth − recon‖² / ‖truth‖²`.
pub fn profiling_loss(truth: &ProfiledCir, recon: &ProfiledCir) -> Result<f64> {
    if truth.len() != recon.len() {
        return Err(Error::Domain(format!(
            "profile lengths differ: {} vs {}",
            truth.len(),
            recon.len()
        )));
    }
    let energy = truth.energy();
    if !(energy > 0.0) {
        return Err(Error::Domain("reference profile has zero energy".into()));
    }
    let err: f64 = truth
        .samples
        .iter()
        .zip(&recon.samples)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(err / energy)
}

/// `10·log10(x)` clamped below at [`LOSS_DB_FLOOR`].
pub fn loss_db(linear: f64) -> f64 {
    if linear <= 0.0 {
        return LOSS_DB_FLOOR;
    }
    (10.0 * linear.log10()).max(LOSS_DB_FLOOR)
}

pub fn profiling_loss_db(truth: &ProfiledCir, recon: &ProfiledCir) -> Result<f64> {
    profiling_loss(truth, recon).map(loss_db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(v: Vec<f64>) -> ProfiledCir {
        ProfiledCir { samples: v, t_index: 0 }
    }

    #[test]
    fn window_error_cases() {
        let a = p(vec![0.1, 0.5, 0.2, 0.0]);
        let w = EvalWindow::new(1, 4);
        assert_eq!(window_error(&a, &a, w).unwrap(), 0.0);
        let mut b = a.clone();
        b.samples[2] += 1.0;
        assert!((window_error(&b, &a, w).unwrap() - 1.0).abs() < 1e-15);
        // impulse outside the window is ignored
        assert_eq!(window_error(&b, &a, EvalWindow::new(1, 2)).unwrap(), 0.0);
    }

    #[test]
    fn invalid_windows() {
        let a = p(vec![0.0; 4]);
        assert!(window_error(&a, &a, EvalWindow::new(0, 2)).is_err());
        assert!(window_error(&a, &a, EvalWindow::new(3, 2)).is_err());
        assert!(window_error(&a, &a, EvalWindow::new(1, 5)).is_err());
    }

    #[test]
    fn loss_cases() {
        let t = p(vec![0.3, 1.0, 0.2]);
        assert_eq!(profiling_loss(&t, &t).unwrap(), 0.0);
        assert_eq!(profiling_loss_db(&t, &t).unwrap(), LOSS_DB_FLOOR);
        let zero = p(vec![0.0; 3]);
        assert!((profiling_loss(&t, &zero).unwrap() - 1.0).abs() < 1e-15);
        assert!(profiling_loss_db(&t, &zero).unwrap().abs() < 1e-12);
        let scaled = p(t.samples.iter().map(|x| 0.9 * x).collect());
        assert!((profiling_loss(&t, &scaled).unwrap() - 0.01).abs() < 1e-12);
        assert!((profiling_loss_db(&t, &scaled).unwrap() + 20.0).abs() < 1e-9);
        assert!(matches!(profiling_loss(&zero, &t), Err(Error::Domain(_))));
        assert!(profiling_loss(&t, &p(vec![0.0; 2])).is_err());
    }

    proptest! {
        #[test]
        fn window_error_matches_loop(v in proptest::collection::vec((0.0f64..2.0, 0.0f64..2.0), 1..64), s in 0usize..64, len in 1usize..64) {
            let a = p(v.iter().map(|x| x.0).collect());
            let b = p(v.iter().map(|x| x.1).collect());
            let n = v.len();
            let start = 1 + s % n;
            let stop = (start + len).min(n);
            let mut oracle = 0.0;
            let mut k = start;
            while k <= stop {
                let d = a.samples[k - 1] - b.samples[k - 1];
                oracle += d * d;
                k += 1;
            }
            let got = window_error(&a, &b, EvalWindow::new(start, stop)).unwrap();
            prop_assert!((got - oracle).abs() <= 1e-12 * oracle.max(1.0));
        }

        #[test]
        fn loss_scale_invariant(v in proptest::collection::vec((0.01f64..2.0, 0.0f64..2.0), 1..64), c in 0.01f64..100.0) {
            let a = p(v.iter().map(|x| x.0).collect());
            let b = p(v.iter().map(|x| x.1).collect());
            let l1 = profiling_loss(&a, &b).unwrap();
            let a2 = p(a.samples.iter().map(|x| c * x).collect());
            let b2 = p(b.samples.iter().map(|x| c * x).collect());
            let l2 = profiling_loss(&a2, &b2).unwrap();
            prop_assert!((l1 - l2).abs() <= 1e-9 * l1.max(1e-12));
            prop_assert_eq!(profiling_loss(&a, &a).unwrap(), 0.0);
        }
    }
}
