//! Unitary ESPRIT delay estimation from the M frequency samples of one
//! snapshot, with least-squares amplitude and phase completion.
//!
//! The frequency samples `x_m = Σ_l c_l z_l^m`, `z_l = e^{−j2πΔf τ_l}`, are
//! arranged in a Hankel matrix whose columns share the shift-invariant
//! signal subspace. Forward-backward averaging plus the sparse unitary
//! left-Π-real transforms make the subspace problem real-valued; the phases
//! `μ_l = 2·atan(ω_l)` of the eigenvalues `ω_l` of the real shift operator
//! give the delays.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2, TAU};

use crate::channel::{Mpc, MpcParamSet, SystemConfig};
use crate::error::{Error, Result};

/// Condition number above which a least-squares completion is flagged.
pub const ILL_CONDITIONED: f64 = 1e10;
/// Relative singular value below which the signal subspace is rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EspritConfig {
    /// Hankel rows; `None` selects `⌊2M/3⌋`.
    pub subarray_length: Option<usize>,
    pub use_forward_backward: bool,
    pub model_order: usize,
}

impl EspritConfig {
    pub fn new(model_order: usize) -> Self {
        Self { subarray_length: None, use_forward_backward: true, model_order }
    }

    fn rows(&self, m: usize) -> usize {
        self.subarray_length.unwrap_or(2 * m / 3)
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let ms = self.rows(m);
        if self.model_order == 0 {
            return Err(Error::Config("model order must be at least 1".into()));
        }
        if !(ms > self.model_order && ms < m) {
            return Err(Error::Config(format!(
                "subarray length {ms} must lie in ({}, {m})",
                self.model_order
            )));
        }
        // the Hankel matrix needs at least L columns
        if m - ms + 1 < self.model_order && !self.use_forward_backward {
            return Err(Error::Config(format!("{} Hankel columns cannot hold {} paths", m - ms + 1, self.model_order)));
        }
        Ok(())
    }
}

/// Exchange matrix: ones on the anti-diagonal.
fn exchange(n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |i, j| if i + j + 1 == n { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
}

/// Sparse unitary left-Π-real matrix of size `n`.
pub fn unitary_q(n: usize) -> DMatrix<Complex64> {
    let k = n / 2;
    let s = FRAC_1_SQRT_2;
    let mut q = DMatrix::zeros(n, n);
    for i in 0..k {
        // upper block [I, jI], lower block [Π, −jΠ]
        q[(i, i)] = Complex64::new(s, 0.0);
        q[(i, n - k + i)] = Complex64::new(0.0, s);
        q[(n - 1 - i, i)] = Complex64::new(s, 0.0);
        q[(n - 1 - i, n - k + i)] = Complex64::new(0.0, -s);
    }
    if n % 2 == 1 {
        q[(k, k)] = Complex64::new(SQRT_2 * s, 0.0);
    }
    q
}

fn hankel(x: &[Complex64], rows: usize) -> DMatrix<Complex64> {
    let cols = x.len() - rows + 1;
    DMatrix::from_fn(rows, cols, |i, k| x[i + k])
}

/// Delays in seconds, ascending, folded into `[0, 1/Δf)`.
pub fn esprit_delays(freq_response: &[Complex64], cfg: &EspritConfig, sys: &SystemConfig) -> Result<Vec<f64>> {
    let m = freq_response.len();
    cfg.validate(m)?;
    if freq_response.iter().any(|z| !z.is_finite()) {
        return Err(Error::Domain("frequency response has non-finite samples".into()));
    }
    let ms = cfg.rows(m);
    let l = cfg.model_order;
    let x = hankel(freq_response, ms);
    let mus = if cfg.use_forward_backward { unitary_phases(&x, l)? } else { standard_phases(&x, l)? };
    let period = 1.0 / sys.csi_rs_spacing;
    let mut taus: Vec<f64> = mus
        .into_iter()
        .map(|mu| {
            let t = (-mu / (TAU * sys.csi_rs_spacing)).rem_euclid(period);
            if t >= period { 0.0 } else { t }
        })
        .collect();
    taus.sort_by(f64::total_cmp);
    Ok(taus)
}

fn check_rank(sv: &[f64], l: usize) -> Result<()> {
    let top = sv.iter().cloned().fold(0.0, f64::max);
    let mut sorted = sv.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let s_l = sorted.get(l - 1).copied().unwrap_or(0.0);
    if !(top > 0.0) || s_l < RANK_TOL * top {
        return Err(Error::Estimation(format!(
            "signal subspace rank below {l}: sigma_{l} = {s_l:e}, sigma_1 = {top:e}"
        )));
    }
    Ok(())
}

/// Columns of `u` for the `l` largest singular values.
fn dominant_columns<T: nalgebra::Scalar + Copy>(u: &DMatrix<T>, sv: &[f64], l: usize) -> DMatrix<T> {
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    DMatrix::from_fn(u.nrows(), l, |i, j| u[(i, order[j])])
}

fn unitary_phases(x: &DMatrix<Complex64>, l: usize) -> Result<Vec<f64>> {
    let (ms, n) = x.shape();
    let pm = exchange(ms);
    let pn = exchange(n);
    let backward = &pm * x.map(|z| z.conj()) * &pn;
    let mut ext = DMatrix::zeros(ms, 2 * n);
    ext.columns_mut(0, n).copy_from(x);
    ext.columns_mut(n, n).copy_from(&backward);
    let t = unitary_q(ms).adjoint() * ext * unitary_q(2 * n);
    let t = t.map(|z| z.re);
    let svd = t.svd(true, false);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    check_rank(&sv, l)?;
    let es = dominant_columns(svd.u.as_ref().expect("left vectors requested"), &sv, l);

    // G = Q_{m−1}^H J2 Q_m with J2 selecting rows 1..m
    let q_m = unitary_q(ms);
    let j2q = q_m.rows(1, ms - 1).into_owned();
    let g = unitary_q(ms - 1).adjoint() * j2q;
    let k1 = g.map(|z| 2.0 * z.re);
    let k2 = g.map(|z| 2.0 * z.im);
    let a = &k1 * &es;
    let b = &k2 * &es;
    let ups = a
        .svd(true, true)
        .solve(&b, 0.0)
        .map_err(|e| Error::Estimation(format!("shift-invariance solve failed: {e}")))?;
    let omegas = ups.complex_eigenvalues();
    Ok(omegas.iter().map(|w| 2.0 * w.re.atan()).collect())
}

fn standard_phases(x: &DMatrix<Complex64>, l: usize) -> Result<Vec<f64>> {
    let ms = x.nrows();
    let svd = x.clone().svd(true, false);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    check_rank(&sv, l)?;
    let es = dominant_columns(svd.u.as_ref().expect("left vectors requested"), &sv, l);
    let a = es.rows(0, ms - 1).into_owned();
    let b = es.rows(1, ms - 1).into_owned();
    let psi = a
        .svd(true, true)
        .solve(&b, 0.0)
        .map_err(|e| Error::Estimation(format!("shift-invariance solve failed: {e}")))?;
    let z = psi
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Estimation("shift operator eigenvalues unavailable".into()))?;
    Ok(z.iter().map(|z| z.arg()).collect())
}

/// Least-squares gains for fixed delays.
#[derive(Clone, Debug, PartialEq)]
pub struct LsFit {
    pub theta: MpcParamSet,
    pub condition_number: f64,
    /// Condition number above [`ILL_CONDITIONED`] (or singular).
    pub ill_conditioned: bool,
}

/// Solves `min ‖A·x − h‖` with `A_{m,l} = e^{−j2π f_m τ_l}`; `α_l = |x_l|`,
/// `φ_l = ∠x_l`.
pub fn ls_amp_phase(delays: &[f64], freq_response: &[Complex64], sys: &SystemConfig) -> Result<LsFit> {
    let m = freq_response.len();
    let l = delays.len();
    if l == 0 || l > m {
        return Err(Error::Domain(format!("{l} delays cannot be fitted from {m} samples")));
    }
    let a = DMatrix::from_fn(m, l, |r, c| Complex64::from_polar(1.0, -TAU * sys.frequency(r) * delays[c]));
    let h = DVector::from_column_slice(freq_response);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let ill_conditioned = !(condition_number <= ILL_CONDITIONED);
    let x = svd
        .solve(&h, RANK_TOL * smax)
        .map_err(|e| Error::Estimation(format!("least-squares solve failed: {e}")))?;
    let mpcs = delays
        .iter()
        .zip(x.iter())
        .map(|(&tau, z)| Mpc::new(tau, z.norm(), crate::wrap_phase(z.arg())))
        .collect();
    Ok(LsFit { theta: MpcParamSet::new(mpcs, 0), condition_number, ill_conditioned })
}
