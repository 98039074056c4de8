//! The product `p_mu(0) p_mu'(0)` on the intervals `(2k, 2k+1)`.
//!
//! A positive product there rules out homogeneous solutions with those
//! frequencies: the boundary pairing below would have a definite sign.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construct::SolutionBundle;
use crate::error::{invalid, Result};
use crate::legendre::{self, LegendreEval};
use crate::quad::trapz;

/// Distance kept from the integers at both ends of every interval.
pub const ENDPOINT_MARGIN: f64 = 0.02;
pub const MIN_SAMPLES: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub k: usize,
    pub samples: usize,
    pub min_product: f64,
    pub worst_mu: f64,
    /// Smallest `p0 dp0 / (p_sup dp_sup)` over the interval.
    pub min_relative: f64,
    /// Every sample had signs `(sign cos(mu pi/2), sign sin(mu pi/2))`.
    pub sign_law_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub n: usize,
    pub k_max: usize,
    pub samples_per_interval: usize,
    pub rows: Vec<GapRow>,
    pub verdict: bool,
}

/// Chebyshev points of the first kind on `[a, b]`, increasing.
pub fn chebyshev_points(a: f64, b: f64, count: usize) -> Vec<f64> {
    (0..count)
        .rev()
        .map(|i| {
            let t = ((2 * i + 1) as f64 * std::f64::consts::PI / (2 * count) as f64).cos();
            0.5 * (a + b) + 0.5 * (b - a) * t
        })
        .collect()
}

fn expected_signs(mu: f64) -> (i8, i8) {
    let s = |v: f64| if v > 0.0 { 1 } else { -1 };
    let h = mu * std::f64::consts::FRAC_PI_2;
    (s(h.cos()), s(h.sin()))
}

pub fn verify_gap(n: usize, k_max: usize, samples: usize) -> Result<GapReport> {
    verify_gap_tol(n, k_max, samples, legendre::DEFAULT_TOL)
}

pub fn verify_gap_tol(n: usize, k_max: usize, samples: usize, tol: f64) -> Result<GapReport> {
    if !(2..=5).contains(&n) {
        return Err(invalid(format!("n must lie in 2..=5, got {n}")));
    }
    if samples < MIN_SAMPLES {
        return Err(invalid(format!("need at least {MIN_SAMPLES} samples per interval")));
    }
    let rows = (0..=k_max)
        .into_par_iter()
        .map(|k| -> Result<GapRow> {
            let a = 2.0 * k as f64 + ENDPOINT_MARGIN;
            let b = 2.0 * k as f64 + 1.0 - ENDPOINT_MARGIN;
            let mut row = GapRow {
                k,
                samples,
                min_product: f64::INFINITY,
                worst_mu: f64::NAN,
                min_relative: f64::INFINITY,
                sign_law_ok: true,
            };
            for mu in chebyshev_points(a, b, samples) {
                let e = legendre::solve_p_on(mu, n, tol, &[0.0])?;
                let prod = e.p0 * e.dp0;
                if prod < row.min_product {
                    row.min_product = prod;
                    row.worst_mu = mu;
                }
                row.min_relative = row.min_relative.min(prod / (e.p_sup * e.dp_sup));
                row.sign_law_ok &= e.signs() == expected_signs(mu);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = rows.iter().all(|r| r.min_product > 0.0 && r.sign_law_ok);
    Ok(GapReport {
        n,
        k_max,
        samples_per_interval: samples,
        rows,
        verdict,
    })
}

/// `p'(0) int u - p(0) int u_n` over the equator trace (uniform nodes).
pub fn boundary_pairing(s_nodes: &[f64], u: &[f64], u_n: &[f64], leg: &LegendreEval) -> Result<f64> {
    if s_nodes.len() != u.len() || u.len() != u_n.len() {
        return Err(invalid("trace lengths differ"));
    }
    if s_nodes.len() < 2 {
        return Ok(0.0);
    }
    let ds = s_nodes[1] - s_nodes[0];
    Ok(leg.dp0 * trapz(u, ds) - leg.p0 * trapz(u_n, ds))
}

/// The pairing evaluated on a constructed bundle; equals `c / 2m`.
pub fn bundle_pairing(b: &SolutionBundle) -> f64 {
    let ds = b.trace.ds();
    b.dp0 * trapz(&b.u_eq, ds) - b.p0 * trapz(&b.uphi_eq, ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chebyshev_nodes_are_interior_and_sorted() {
        let p = chebyshev_points(2.02, 2.98, 9);
        assert!(p.windows(2).all(|w| w[1] > w[0]));
        assert!(p[0] > 2.02 && p[8] < 2.98);
        assert!((p[4] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn first_intervals_positive() {
        let e = legendre::solve_p_on(0.5, 3, 1e-10, &[0.0]).unwrap();
        assert!(e.p0 > 0.0 && e.dp0 > 0.0);
        let e = legendre::solve_p_on(2.5, 3, 1e-10, &[0.0]).unwrap();
        assert!(e.p0 < 0.0 && e.dp0 < 0.0);
        let r = verify_gap(3, 2, 9).unwrap();
        assert!(r.verdict);
    }

    #[test]
    fn two_dimensional_product_closed_form() {
        // p = cos(mu t): p0 dp0 = mu sin(mu pi) / 2
        let r = verify_gap(2, 3, 9).unwrap();
        for row in &r.rows {
            let mu = row.worst_mu;
            let expect = 0.5 * mu * (mu * std::f64::consts::PI).sin();
            assert!((row.min_product - expect).abs() < 1e-8);
        }
    }

    #[test]
    fn pairing_of_zero_trace() {
        let e = legendre::solve_p_on(3.5, 3, 1e-10, &[0.0]).unwrap();
        let s = [0.0, 0.1, 0.2];
        assert_eq!(boundary_pairing(&s, &[0.0; 3], &[0.0; 3], &e).unwrap(), 0.0);
        assert!(boundary_pairing(&s, &[0.0; 2], &[0.0; 3], &e).is_err());
    }

    #[test]
    fn bundle_pairing_tracks_c() {
        let b = crate::construct::solve_bundle(3, 1, 13, 65, 65, &Default::default()).unwrap();
        let pr = bundle_pairing(&b);
        assert!(pr < 0.0);
        assert!((pr - b.c_quantity / 6.0).abs() < 1e-6 * b.c_scale);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(verify_gap(6, 2, 9).is_err());
        assert!(verify_gap(3, 2, 5).is_err());
    }
}
