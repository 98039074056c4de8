//! Adaptive Dormand–Prince 5(4) integrator for two-component systems.
//!
//! Both ODEs in this crate are scalar second-order equations written as
//! first-order systems `(y, y')`, so the state is a fixed `[f64; 2]`.

use crate::error::{Error, Result};

pub type State = [f64; 2];

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b* (fifth minus fourth order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct Dopri54 {
    pub rtol: f64,
    pub atol: f64,
    /// Initial trial step.
    pub h_init: f64,
    pub max_steps: usize,
}

impl Dopri54 {
    pub fn new(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            h_init: 1e-3,
            max_steps: 1_000_000,
        }
    }

    pub fn with_initial_step(mut self, h: f64) -> Self {
        self.h_init = h;
        self
    }

    /// Integrates `y' = f(t, y)` from `(t0, y0)` through each point of
    /// `outputs` (strictly increasing, all `> t0` or the first equal to
    /// `t0`). Steps are clipped so that every output point is hit exactly.
    /// `observe` sees every accepted state, including the outputs.
    pub fn integrate<F, O>(
        &self,
        f: F,
        t0: f64,
        y0: State,
        outputs: &[f64],
        mut observe: O,
    ) -> Result<Vec<State>>
    where
        F: Fn(f64, &State) -> State,
        O: FnMut(f64, &State),
    {
        let mut out = Vec::with_capacity(outputs.len());
        let mut t = t0;
        let mut y = y0;
        let mut h = self.h_init;
        let mut k1 = f(t, &y);
        let mut steps = 0usize;
        observe(t, &y);

        for &target in outputs {
            if target < t {
                return Err(Error::InvalidArgument(format!(
                    "output points must be increasing (t = {t}, target = {target})"
                )));
            }
            while t < target {
                steps += 1;
                if steps > self.max_steps {
                    return Err(Error::StepUnderflow { t, h });
                }
                let mut last = false;
                let mut step = h;
                if t + step >= target || (target - t - step) < 1e-12 * target.abs().max(1.0) {
                    step = target - t;
                    last = true;
                }
                if step <= f64::EPSILON * t.abs().max(1e-300) * 4.0 {
                    return Err(Error::StepUnderflow { t, h: step });
                }
                let (y_new, k7, err) = self.trial(&f, t, &y, &k1, step);
                if !y_new.iter().all(|v| v.is_finite()) {
                    if step < 1e-14 {
                        return Err(Error::NonFinite { t });
                    }
                    h = step * 0.1;
                    continue;
                }
                let mut norm = 0.0_f64;
                for i in 0..2 {
                    let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                    norm = norm.max((err[i] / sc).abs());
                }
                if norm <= 1.0 {
                    t = if last { target } else { t + step };
                    y = y_new;
                    k1 = k7;
                    observe(t, &y);
                    let fac = if norm == 0.0 {
                        5.0
                    } else {
                        (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    // keep the unclipped step length when the output point
                    // forced a short step
                    h = if last { h.max(step * fac) } else { step * fac };
                } else {
                    h = step * (0.9 * norm.powf(-0.2)).clamp(0.1, 0.9);
                    if h < 1e-15 * t.abs().max(1.0) {
                        return Err(Error::StepUnderflow { t, h });
                    }
                }
            }
            out.push(y);
        }
        Ok(out)
    }

    fn trial<F>(&self, f: &F, t: f64, y: &State, k1: &State, h: f64) -> (State, State, State)
    where
        F: Fn(f64, &State) -> State,
    {
        let add = |coef: &[(f64, &State)]| -> State {
            let mut r = *y;
            for (c, k) in coef {
                r[0] += h * c * k[0];
                r[1] += h * c * k[1];
            }
            r
        };
        let k2 = f(t + C2 * h, &add(&[(A21, k1)]));
        let k3 = f(t + C3 * h, &add(&[(A31, k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &add(&[(A41, k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * h,
            &add(&[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &add(&[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = add(&[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = f(t + h, &y_new);
        let mut err = [0.0; 2];
        for i in 0..2 {
            err[i] = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        (y_new, k7, err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_matches_closed_form() {
        let solver = Dopri54::new(1e-11);
        let ts: Vec<f64> = (1..=20).map(|i| i as f64 * 0.5).collect();
        let ys = solver
            .integrate(|_, y| [y[1], -4.0 * y[0]], 0.0, [1.0, 0.0], &ts, |_, _| {})
            .unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y[0] - (2.0 * t).cos()).abs() < 1e-9, "t={t}");
            assert!((y[1] + 2.0 * (2.0 * t).sin()).abs() < 2e-9);
        }
    }

    #[test]
    fn output_points_hit_exactly() {
        let solver = Dopri54::new(1e-8);
        let ts = [0.0, 0.3, 0.30000001, 1.0];
        let mut seen = Vec::new();
        solver
            .integrate(|_, y| [y[1], 0.0], 0.0, [0.0, 1.0], &ts, |t, _| seen.push(t))
            .unwrap();
        for t in ts {
            assert!(seen.contains(&t));
        }
    }

    #[test]
    fn decreasing_outputs_rejected() {
        let solver = Dopri54::new(1e-8);
        let r = solver.integrate(|_, y| [y[1], 0.0], 0.0, [0.0, 1.0], &[0.5, 0.2], |_, _| {});
        assert!(r.is_err());
    }
}
