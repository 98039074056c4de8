//! The rotation-invariant profile `p_mu` and the forced profile `h`.
//!
//! With `phi` the latitude, `p` solves
//! `p'' - (n-2) tan(phi) p' + lambda p = 0`, `lambda = mu (mu + n - 2)`,
//! normalized by `p(pi/2) = 1`, `p'(pi/2) = 0`. The pole is a regular
//! singular point, so the integration runs in `t = pi/2 - phi` and starts a
//! short distance away from it on the regular power series.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{invalid, Error, Result};
use crate::interp::CubicSpline;
use crate::ode::Dopri54;

/// Tolerance used by the convenience entry points.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Distance from the pole at which the series launch happens.
pub const LAUNCH_OFFSET: f64 = 1e-4;
/// A value is classified as zero when below this multiple of `tol * sup`.
pub const ZERO_FACTOR: f64 = 1e3;
/// Largest `delta` for the near-equator comparison bound.
pub const DELTA_CAP: f64 = 0.1;
/// Closest approach to the pole allowed for the forced profile.
pub const POLE_EPS: f64 = 1e-3;

const DEFAULT_NODES: usize = 256;

pub fn lambda_of(mu: f64, n: usize) -> f64 {
    mu * (mu + n as f64 - 2.0)
}

fn check_common(mu: f64, n: usize, tol: f64) -> Result<()> {
    if !mu.is_finite() || mu <= 0.0 {
        return Err(invalid(format!("mu must be finite and positive, got {mu}")));
    }
    if !(2..=5).contains(&n) {
        return Err(invalid(format!("dimension n must be in 2..=5, got {n}")));
    }
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(invalid(format!("tol must lie in (0, 1e-3], got {tol}")));
    }
    Ok(())
}

/// `count` uniform latitudes covering `[0, pi/2)`.
pub fn default_nodes(count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| FRAC_PI_2 * i as f64 / count as f64)
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LegendreEval {
    pub mu: f64,
    pub n: usize,
    pub lambda: f64,
    pub tol: f64,
    pub phi_nodes: Vec<f64>,
    pub p_values: Vec<f64>,
    pub dp_values: Vec<f64>,
    pub p0: f64,
    pub dp0: f64,
    /// Sup norms over every accepted integrator state.
    pub p_sup: f64,
    pub dp_sup: f64,
}

fn sign_with_threshold(v: f64, threshold: f64) -> i8 {
    if v.abs() < threshold {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

impl LegendreEval {
    pub fn p0_threshold(&self) -> f64 {
        ZERO_FACTOR * self.tol * self.p_sup
    }

    pub fn dp0_threshold(&self) -> f64 {
        ZERO_FACTOR * self.tol * self.dp_sup
    }

    pub fn signs(&self) -> (i8, i8) {
        (
            sign_with_threshold(self.p0, self.p0_threshold()),
            sign_with_threshold(self.dp0, self.dp0_threshold()),
        )
    }

    pub fn p0_is_zero(&self) -> bool {
        self.p0.abs() < self.p0_threshold()
    }

    pub fn dp0_is_zero(&self) -> bool {
        self.dp0.abs() < self.dp0_threshold()
    }

    /// `-p'(0) / p(0)`, guarded against a vanishing denominator.
    pub fn ratio(&self) -> Result<f64> {
        if self.p0_is_zero() {
            return Err(Error::NearZeroDenominator {
                p0: self.p0,
                threshold: self.p0_threshold(),
            });
        }
        Ok(-self.dp0 / self.p0)
    }

    /// `E = p'^2 / 2 + lambda p^2 / 2` along the stored nodes.
    pub fn energy(&self) -> Vec<f64> {
        self.p_values
            .iter()
            .zip(&self.dp_values)
            .map(|(p, dp)| 0.5 * dp * dp + 0.5 * self.lambda * p * p)
            .collect()
    }
}

/// Series coefficients `p = 1 + a t^2 + b t^4` of the regular branch.
fn series_coefficients(lambda: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let a = -lambda / (2.0 * (nf - 1.0));
    let b = a * (2.0 * (nf - 2.0) / 3.0 - lambda) / (4.0 * (nf + 1.0));
    (a, b)
}

/// Value and `t`-derivative of the pole series.
fn series(lambda: f64, n: usize, t: f64) -> [f64; 2] {
    let (a, b) = series_coefficients(lambda, n);
    let t2 = t * t;
    [1.0 + a * t2 + b * t2 * t2, 2.0 * a * t + 4.0 * b * t * t2]
}

pub fn solve_p(mu: f64, n: usize, tol: f64) -> Result<LegendreEval> {
    solve_p_on(mu, n, tol, &default_nodes(DEFAULT_NODES))
}

/// Solves for `p_mu` and samples it at `phi_nodes` (increasing, within
/// `[0, pi/2]`). `p0`, `dp0` are always the values at the equator.
pub fn solve_p_on(mu: f64, n: usize, tol: f64, phi_nodes: &[f64]) -> Result<LegendreEval> {
    check_common(mu, n, tol)?;
    if phi_nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("phi nodes must be strictly increasing"));
    }
    if phi_nodes
        .iter()
        .any(|&p| !(0.0..=FRAC_PI_2).contains(&p))
    {
        return Err(invalid("phi nodes must lie in [0, pi/2]"));
    }
    let lambda = lambda_of(mu, n);
    let t0 = LAUNCH_OFFSET;
    let cot_coef = n as f64 - 2.0;
    let rhs = move |t: f64, y: &[f64; 2]| [y[1], -cot_coef * y[1] / t.tan() - lambda * y[0]];

    // outputs in t, increasing; the equator t = pi/2 is always last
    let mut ts: Vec<f64> = phi_nodes
        .iter()
        .rev()
        .map(|&p| FRAC_PI_2 - p)
        .filter(|&t| t > t0 && t < FRAC_PI_2)
        .collect();
    ts.push(FRAC_PI_2);

    let y0 = series(lambda, n, t0);
    let mut p_sup = y0[0].abs().max(1.0);
    let mut dp_sup = y0[1].abs();
    let itol = 0.1 * tol;
    let solver = Dopri54::new(itol).with_initial_step(0.1 * t0);
    let states = solver.integrate(rhs, t0, y0, &ts, |_, y| {
        p_sup = p_sup.max(y[0].abs());
        dp_sup = dp_sup.max(y[1].abs());
    })?;
    if states.iter().any(|s| !s[0].is_finite() || !s[1].is_finite()) {
        return Err(Error::NonFinite { t: FRAC_PI_2 });
    }

    let last = states[states.len() - 1];
    let lookup = |phi: f64| -> [f64; 2] {
        let t = FRAC_PI_2 - phi;
        if t <= t0 {
            let s = series(lambda, n, t);
            [s[0], -s[1]]
        } else if phi == 0.0 {
            [last[0], -last[1]]
        } else {
            // ts was built from the reversed nodes, so search by value
            let idx = ts
                .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
                .expect("node present in output list");
            [states[idx][0], -states[idx][1]]
        }
    };
    let mut p_values = Vec::with_capacity(phi_nodes.len());
    let mut dp_values = Vec::with_capacity(phi_nodes.len());
    for &phi in phi_nodes {
        let [p, dp] = lookup(phi);
        p_values.push(p);
        dp_values.push(dp);
    }
    Ok(LegendreEval {
        mu,
        n,
        lambda,
        tol,
        phi_nodes: phi_nodes.to_vec(),
        p_values,
        dp_values,
        p0: last[0],
        dp0: -last[1],
        p_sup,
        dp_sup,
    })
}

/// Equator signs `(sign p(0), sign p'(0))` with the relative zero threshold.
pub fn equator_signs(mu: f64, n: usize) -> Result<(i8, i8)> {
    equator_signs_tol(mu, n, DEFAULT_TOL)
}

pub fn equator_signs_tol(mu: f64, n: usize, tol: f64) -> Result<(i8, i8)> {
    if mu == 0.0 {
        // p_0 is the constant 1
        return Ok((1, 0));
    }
    if !(mu >= 0.0) {
        return Err(invalid(format!("mu must be nonnegative, got {mu}")));
    }
    Ok(solve_p_on(mu, n, tol, &[0.0])?.signs())
}

/// `-p'(0)/p(0)`.
pub fn equator_ratio(mu: f64, n: usize) -> Result<f64> {
    solve_p_on(mu, n, DEFAULT_TOL, &[0.0])?.ratio()
}

/// Right-hand side of the forced equation, `L_mu h = (n-2) g / cos(phi)`.
#[derive(Debug, Clone)]
pub enum Source {
    Zero,
    Spline(CubicSpline),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Zero,
    Interpolated,
}

impl Source {
    fn eval(&self, phi: f64) -> f64 {
        match self {
            Source::Zero => 0.0,
            Source::Spline(s) => s.eval(phi),
        }
    }

    fn kind(&self) -> SourceKind {
        match self {
            Source::Zero => SourceKind::Zero,
            Source::Spline(_) => SourceKind::Interpolated,
        }
    }

    fn sup_on(&self, phi_max: f64) -> f64 {
        match self {
            Source::Zero => 0.0,
            Source::Spline(s) => {
                let (_, hi) = s.domain();
                let top = phi_max.min(hi);
                let samples = 4096;
                (0..=samples)
                    .map(|i| s.eval(top * i as f64 / samples as f64).abs())
                    .fold(0.0, f64::max)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ForcedProfile {
    pub mu: f64,
    pub n: usize,
    pub lambda: f64,
    pub phi_nodes: Vec<f64>,
    pub h_values: Vec<f64>,
    pub dh_values: Vec<f64>,
    pub h0: f64,
    pub dh0: f64,
    pub source_kind: SourceKind,
    pub g_sup: f64,
    /// Constant of the growth bound `|h'| <= C cos^(2-n)`.
    pub growth_constant: f64,
    /// Largest observed `|h'| cos^(n-2) / C`.
    pub growth_ratio: f64,
}

/// Explicit constant of the bound `|h'(phi)| <= C cos(phi)^(2-n)`.
pub fn growth_constant(lambda: f64, n: usize, h0: f64, dh0: f64, g_sup: f64) -> f64 {
    let nf = n as f64 - 2.0;
    2.0 * (h0.abs() * lambda.sqrt() + dh0.abs())
        + g_sup * (nf * (2.0 * std::f64::consts::LN_2 + (-1.0f64).exp()) + 1.0)
}

/// Constant `C` in `|h'(phi) - h'(0) cos(sqrt(lambda) phi)| <= C delta^2 |h'(0)|`
/// on `[0, delta]` for the unforced profile with `h(0) = 0`.
pub fn cap_bound_constant(n: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= DELTA_CAP) {
        return Err(invalid(format!("delta must lie in (0, {DELTA_CAP}]")));
    }
    let nf = n as f64 - 2.0;
    let td = delta.tan();
    Ok(nf * (td / delta) / (1.0 - nf * delta * td))
}

/// Integrates the forced equation forward from the equator and samples it
/// at `phi_nodes` (increasing, starting at 0, ending at most
/// `pi/2 - POLE_EPS`). The growth bound is checked on every accepted step.
pub fn solve_h(
    mu: f64,
    n: usize,
    source: &Source,
    h0: f64,
    dh0: f64,
    phi_nodes: &[f64],
    tol: f64,
) -> Result<ForcedProfile> {
    check_common(mu, n, tol)?;
    if !h0.is_finite() || !dh0.is_finite() {
        return Err(invalid("initial data must be finite"));
    }
    if phi_nodes.first() != Some(&0.0) {
        return Err(invalid("phi nodes must start at 0"));
    }
    if phi_nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("phi nodes must be strictly increasing"));
    }
    let phi_max = *phi_nodes.last().unwrap();
    if phi_max > FRAC_PI_2 - POLE_EPS {
        return Err(invalid(format!(
            "phi_max = {phi_max} is too close to the pole"
        )));
    }
    let g_sup = source.sup_on(phi_max);
    if !g_sup.is_finite() {
        return Err(Error::NonFinite { t: phi_max });
    }
    let lambda = lambda_of(mu, n);
    let nf = n as f64 - 2.0;
    let rhs = |phi: f64, y: &[f64; 2]| {
        [
            y[1],
            nf * phi.tan() * y[1] - lambda * y[0] + nf * source.eval(phi) / phi.cos(),
        ]
    };
    let growth = growth_constant(lambda, n, h0, dh0, g_sup);
    let slack = 1e-8 + 10.0 * tol;
    let mut worst: Option<Error> = None;
    let mut growth_ratio: f64 = 0.0;
    let solver = Dopri54::new(0.1 * tol).with_initial_step(1e-3);
    let states = solver.integrate(rhs, 0.0, [h0, dh0], &phi_nodes[1..], |phi, y| {
        let weight = phi.cos().powi(n as i32 - 2);
        let scaled = y[1].abs() * weight;
        if growth > 0.0 {
            growth_ratio = growth_ratio.max(scaled / growth);
        }
        if scaled > growth * (1.0 + slack) + slack && worst.is_none() {
            worst = Some(Error::GrowthBound {
                phi,
                value: y[1].abs(),
                bound: growth / weight,
            });
        }
    })?;
    if let Some(e) = worst {
        return Err(e);
    }
    let mut h_values = vec![h0];
    let mut dh_values = vec![dh0];
    for s in &states {
        h_values.push(s[0]);
        dh_values.push(s[1]);
    }
    Ok(ForcedProfile {
        mu,
        n,
        lambda,
        phi_nodes: phi_nodes.to_vec(),
        h_values,
        dh_values,
        h0,
        dh0,
        source_kind: source.kind(),
        g_sup,
        growth_constant: growth,
        growth_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn legendre_poly(k: usize, x: f64) -> f64 {
        let (mut p0, mut p1) = (1.0, x);
        if k == 0 {
            return p0;
        }
        for j in 1..k {
            let jf = j as f64;
            let p2 = ((2.0 * jf + 1.0) * x * p1 - jf * p0) / (jf + 1.0);
            p0 = p1;
            p1 = p2;
        }
        p1
    }

    #[test]
    fn degree_one_and_two() {
        let e = solve_p(1.0, 3, 1e-10).unwrap();
        assert!(e.p0.abs() < 1e-9 && (e.dp0 - 1.0).abs() < 1e-9);
        for (phi, p) in e.phi_nodes.iter().zip(&e.p_values) {
            assert!((p - phi.sin()).abs() < 1e-9);
        }
        let e = solve_p(2.0, 3, 1e-10).unwrap();
        assert!((e.p0 + 0.5).abs() < 1e-9 && e.dp0.abs() < 1e-9);
    }

    #[test]
    fn integer_mu_matches_polynomials() {
        for tol in [1e-8, 1e-10] {
            for k in 1..=8 {
                let e = solve_p(k as f64, 3, tol).unwrap();
                let err = e
                    .phi_nodes
                    .iter()
                    .zip(&e.p_values)
                    .map(|(phi, p)| (p - legendre_poly(k, phi.sin())).abs())
                    .fold(0.0, f64::max);
                assert!(err <= 10.0 * tol, "k={k} tol={tol} err={err:e}");
            }
        }
    }

    #[test]
    fn half_integer_reference_values() {
        // P_3.5(0) and its derivative from the Gamma-function closed forms
        let e = solve_p(3.5, 3, 1e-10).unwrap();
        assert!((e.p0 - 0.281_033_475_956_213_4).abs() < 1e-9);
        assert!((e.dp0 + 1.132_640_462_495_597).abs() < 1e-9);
        assert_eq!(e.signs(), (1, -1));
    }

    #[test]
    fn two_dimensional_profile_is_cosine() {
        let mu = 2.7;
        let e = solve_p(mu, 2, 1e-10).unwrap();
        for (phi, p) in e.phi_nodes.iter().zip(&e.p_values) {
            assert!((p - (mu * (FRAC_PI_2 - phi)).cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn integer_signs() {
        assert_eq!(equator_signs(3.0, 3).unwrap(), (0, -1));
        assert_eq!(equator_signs(4.0, 3).unwrap(), (1, 0));
        assert_eq!(equator_signs(2.5, 3).unwrap(), (-1, -1));
        assert_eq!(equator_signs(0.0, 3).unwrap(), (1, 0));
    }

    #[test]
    fn ratio_guards_denominator() {
        assert!(equator_ratio(3.5, 3).unwrap() > 0.0);
        assert!(matches!(
            equator_ratio(3.0, 3),
            Err(Error::NearZeroDenominator { .. })
        ));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(solve_p(-1.0, 3, 1e-8).is_err());
        assert!(solve_p(f64::NAN, 3, 1e-8).is_err());
        assert!(solve_p(1.0, 3, 1e-2).is_err());
        assert!(solve_p(1.0, 3, 0.0).is_err());
        assert!(solve_p(1.0, 7, 1e-8).is_err());
    }

    #[test]
    fn unforced_zero_data_gives_zero() {
        let nodes: Vec<f64> = (0..50).map(|i| i as f64 * 0.03).collect();
        let h = solve_h(3.0, 3, &Source::Zero, 0.0, 0.0, &nodes, 1e-10).unwrap();
        assert!(h.h_values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unforced_degree_one_is_sine() {
        let nodes: Vec<f64> = (0..=140).map(|i| i as f64 * 0.01).collect();
        let h = solve_h(1.0, 3, &Source::Zero, 0.0, 1.0, &nodes, 1e-10).unwrap();
        for (phi, v) in nodes.iter().zip(&h.h_values) {
            assert!((v - phi.sin()).abs() < 1e-9);
        }
        assert!(h.growth_ratio <= 1.0);
    }

    #[test]
    fn cap_bound_holds() {
        let delta = 0.05;
        let mu = 10.0;
        let lam = lambda_of(mu, 3);
        let nodes: Vec<f64> = (0..=100).map(|i| delta * i as f64 / 100.0).collect();
        let h = solve_h(mu, 3, &Source::Zero, 0.0, 1.0, &nodes, 1e-10).unwrap();
        let dev = nodes
            .iter()
            .zip(&h.dh_values)
            .map(|(phi, d)| (d - (lam.sqrt() * phi).cos()).abs())
            .fold(0.0, f64::max);
        let c = cap_bound_constant(3, delta).unwrap();
        assert!(dev <= c * delta * delta, "dev={dev:e}");
        assert!(cap_bound_constant(3, 0.2).is_err());
    }

    #[test]
    fn pole_too_close_rejected() {
        let nodes = [0.0, FRAC_PI_2 - 1e-5];
        assert!(solve_h(3.0, 3, &Source::Zero, 0.0, 1.0, &nodes, 1e-8).is_err());
    }
}
