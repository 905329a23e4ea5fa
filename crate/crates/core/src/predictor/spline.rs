use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// End conditions of the cubic spline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplineBoundary {
    /// Zero second derivative at both ends.
    #[default]
    Natural,
    /// Continuous third derivative at the second and second-to-last knots;
    /// reproduces cubics exactly. Needs four knots, otherwise falls back to
    /// natural.
    NotAKnot,
}

/// Interpolating cubic spline in second-derivative form. Outside the knot
/// range the first or last segment's cubic is continued.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicSpline {
    t: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn fit(t: &[f64], y: &[f64], boundary: SplineBoundary) -> Result<Self> {
        let n = t.len();
        if n < 2 || y.len() != n {
            return Err(Error::Domain(format!("spline needs at least 2 matching knots, got {n}")));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) || !t.iter().chain(y).all(|v| v.is_finite()) {
            return Err(Error::Domain("spline knots must be finite and strictly increasing".into()));
        }
        let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for i in 1..n - 1 {
            a[(i, i - 1)] = h[i - 1];
            a[(i, i)] = 2.0 * (h[i - 1] + h[i]);
            a[(i, i + 1)] = h[i];
            b[i] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        if boundary == SplineBoundary::NotAKnot && n >= 4 {
            // (M1 − M0)/h0 = (M2 − M1)/h1, and the mirror at the far end
            a[(0, 0)] = h[1];
            a[(0, 1)] = -(h[0] + h[1]);
            a[(0, 2)] = h[0];
            let k = n - 1;
            a[(k, k - 2)] = h[k - 1];
            a[(k, k - 1)] = -(h[k - 2] + h[k - 1]);
            a[(k, k)] = h[k - 2];
        } else {
            a[(0, 0)] = 1.0;
            a[(n - 1, n - 1)] = 1.0;
        }
        let m = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Numeric("singular spline system".into()))?;
        Ok(Self { t: t.to_vec(), y: y.to_vec(), m: m.iter().copied().collect() })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.t.len();
        // segment index, clamped to the end segments for extrapolation
        let i = match self.t.partition_point(|&k| k <= x) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let h = t1 - t0;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (a, b) = (t1 - x, x - t0);
        m0 * a * a * a / (6.0 * h) + m1 * b * b * b / (6.0 * h) + (self.y[i] / h - m0 * h / 6.0) * a
            + (self.y[i + 1] / h - m1 * h / 6.0) * b
    }
}
