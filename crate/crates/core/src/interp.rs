//! Natural cubic spline on increasing abscissae.

use crate::error::{invalid, Result};

#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n != y.len() || n < 3 {
            return Err(invalid("spline needs at least 3 matching samples"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("spline abscissae must be strictly increasing"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(invalid("spline ordinates must be finite"));
        }
        // tridiagonal system for interior second derivatives
        let mut m = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut sub = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            sub[i] = h0 / 6.0;
            diag[i] = (h0 + h1) / 3.0;
            rhs[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        }
        // forward sweep; super-diagonal entry of row i is h1/6
        for i in 2..n - 1 {
            let sup_prev = (x[i] - x[i - 1]) / 6.0;
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup_prev;
            rhs[i] -= w * rhs[i - 1];
        }
        for i in (1..n - 1).rev() {
            let sup = (x[i + 1] - x[i]) / 6.0;
            let next = if i + 1 < n - 1 { m[i + 1] } else { 0.0 };
            m[i] = (rhs[i] - sup * next) / diag[i];
        }
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    /// Evaluates the spline; outside the knot range the end cubic is
    /// extended.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_knots_and_smooth_data() {
        let x: Vec<f64> = (0..41).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = x.iter().map(|t| t.sin()).collect();
        let s = CubicSpline::new(&x, &y).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((s.eval(*xi) - yi).abs() < 1e-14);
        }
        for i in 0..200 {
            let t = 0.3 + i as f64 * 0.007;
            assert!((s.eval(t) - t.sin()).abs() < 2e-6, "t={t}");
        }
    }

    #[test]
    fn reproduces_lines_exactly() {
        let x = [0.0, 0.3, 1.0, 1.5];
        let y = [1.0, 1.6, 3.0, 4.0];
        let s = CubicSpline::new(&x, &y).unwrap();
        assert!((s.eval(0.7) - 2.4).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CubicSpline::new(&[0.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(CubicSpline::new(&[0.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).is_err());
        assert!(CubicSpline::new(&[0.0, 1.0, 2.0], &[0.0, f64::NAN, 2.0]).is_err());
    }
}
