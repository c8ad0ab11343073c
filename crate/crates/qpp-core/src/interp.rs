//! Piecewise-cubic Hermite interpolation with a continuous first derivative,
//! shared by trajectory checking and control reconstruction.

use nalgebra::DVector;

use crate::error::{QppError, Result};

/// C¹ cubic Hermite interpolant through vector-valued samples. Segment
/// slopes come from a local parabolic fit, so the derivative is second-order
/// accurate in the sample spacing.
#[derive(Debug, Clone)]
pub struct CubicHermite {
    xs: Vec<f64>,
    ys: Vec<DVector<f64>>,
    slopes: Vec<DVector<f64>>,
}

impl CubicHermite {
    pub fn new(xs: Vec<f64>, ys: Vec<DVector<f64>>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(QppError::InvalidTrajectory(format!(
                "need at least 2 samples with matching lengths, got {} and {}",
                n,
                ys.len()
            )));
        }
        for w in xs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(QppError::InvalidTrajectory(format!(
                    "parameter values must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        let dim = ys[0].len();
        if ys.iter().any(|y| y.len() != dim) {
            return Err(QppError::InvalidTrajectory("ragged sample vectors".into()));
        }

        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let d: Vec<DVector<f64>> = (0..n - 1).map(|k| (&ys[k + 1] - &ys[k]) / h[k]).collect();
        let mut slopes = vec![DVector::zeros(dim); n];
        for k in 1..n - 1 {
            slopes[k] = (&d[k - 1] * h[k] + &d[k] * h[k - 1]) / (h[k - 1] + h[k]);
        }
        if n == 2 {
            slopes[0] = d[0].clone();
            slopes[1] = d[0].clone();
        } else {
            slopes[0] = &d[0] * 2.0 - &slopes[1];
            slopes[n - 1] = &d[n - 2] * 2.0 - &slopes[n - 2];
        }
        Ok(Self { xs, ys, slopes })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.xs.len() - 2),
        }
    }

    pub fn value(&self, x: f64) -> DVector<f64> {
        let k = self.segment(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        &self.ys[k] * h00
            + &self.slopes[k] * (h10 * h)
            + &self.ys[k + 1] * h01
            + &self.slopes[k + 1] * (h11 * h)
    }

    pub fn derivative(&self, x: f64) -> DVector<f64> {
        let k = self.segment(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let t2 = t * t;
        let dh00 = (6.0 * t2 - 6.0 * t) / h;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = (-6.0 * t2 + 6.0 * t) / h;
        let dh11 = 3.0 * t2 - 2.0 * t;
        &self.ys[k] * dh00
            + &self.slopes[k] * dh10
            + &self.ys[k + 1] * dh01
            + &self.slopes[k + 1] * dh11
    }
}
