//! The construction with the k-th eigenfunction.
//!
//! For the k-th eigenvalue the frequency window becomes
//! `(m + 2k - 2, m + 2k - 1)`. The construction needs the eigenfunction to
//! keep one sign near the equator, which is checked at every slit fraction
//! visited.

use serde::{Deserialize, Serialize};

use crate::construct::endpoint_mu;
use crate::continuation::{
    bisect_root, scan_c, sign_changes, uniform_sigmas, Evaluator, Resolution, RootResult,
    SCAN_POINTS,
};
use crate::error::{invalid, Error, Result};
use crate::legendre::{self, Source};
use crate::spectral::{eigenpairs, nodal_sign_check, EigenOptions, SparseOperator, WedgeGrid};

/// Default cap on the top of the frequency window, `m + 2k - 1 <= ratio m`.
pub const DEFAULT_CAP_RATIO: f64 = 1.6;

pub fn check_cap(m: usize, k: usize, cap_ratio: f64) -> Result<()> {
    if m.is_multiple_of(2) {
        return Err(invalid(format!("the variant needs odd m, got {m}")));
    }
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if (m + 2 * k - 1) as f64 > cap_ratio * m as f64 {
        return Err(invalid(format!(
            "m + 2k - 1 = {} exceeds {cap_ratio} m = {}",
            m + 2 * k - 1,
            cap_ratio * m as f64
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointReport {
    pub m: usize,
    pub k: usize,
    /// Computed frequencies with an empty and a full slit.
    pub mu0: f64,
    pub mu1: f64,
    pub c0: f64,
    pub c1: f64,
    pub sign0: i8,
    pub sign1: i8,
    /// Normal-derivative integral at `sigma = 0` (vanishes: no slit).
    pub i1_at_0: f64,
    /// Trace integral at `sigma = 1` (vanishes: the trace is zero).
    pub i2_at_1: f64,
    pub nodal0: bool,
    pub nodal1: bool,
    /// `sign p'(0)` at `m + 2k - 2` and `sign p(0)` at `m + 2k - 1` differ.
    pub parity_ok: bool,
}

impl EndpointReport {
    pub fn opposite(&self) -> bool {
        self.sign0 != 0 && self.sign1 != 0 && self.sign0 != self.sign1
    }
}

pub fn variant_endpoints(
    ev: &Evaluator,
    m: usize,
    k: usize,
    res: Resolution,
    cap_ratio: f64,
) -> Result<EndpointReport> {
    check_cap(m, k, cap_ratio)?;
    let b0 = ev.bundle(m, k, 0, res)?;
    let b1 = ev.bundle(m, k, res.nx - 1, res)?;
    for b in [&b0, &b1] {
        if !b.nodal_ok {
            return Err(Error::NodalCheck {
                m,
                k,
                sigma: b.sigma,
            });
        }
    }
    let (_, dsign) = legendre::equator_signs(endpoint_mu(m, k, false), 3)?;
    let (psign, _) = legendre::equator_signs(endpoint_mu(m, k, true), 3)?;
    Ok(EndpointReport {
        m,
        k,
        mu0: b0.mu,
        mu1: b1.mu,
        c0: b0.c_quantity,
        c1: b1.c_quantity,
        sign0: b0.c_sign,
        sign1: b1.c_sign,
        i1_at_0: b0.i1,
        i2_at_1: b1.i2,
        nodal0: b0.nodal_ok,
        nodal1: b1.nodal_ok,
        parity_ok: dsign != 0 && psign != 0 && dsign != psign,
    })
}

/// The two readings of the anchor condition for `u_k`.
///
/// Reading A: `u_phi(theta = pi/m, phi = 0) = 0`, which fixes
/// `h'(0) = -int v_phi(s, 0+) ds` as for `k = 1`.
/// Reading B: `u_phi(theta = 0, phi = pi/m) = 0`, i.e. `h'(pi/m) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorReport {
    pub slope_a: f64,
    /// `u_phi(pi/m, 0)` under reading A; zero up to rounding.
    pub equator_end_uphi: f64,
    pub slope_b: Option<f64>,
    /// `h'(pi/m)` when `h'(0)` follows reading A.
    pub dh_at_pi_over_m: Option<f64>,
    pub discrepancy: Option<f64>,
}

pub fn anchor_report(m: usize, k: usize, slit_end: usize, res: Resolution, tol: f64) -> Result<AnchorReport> {
    let grid = WedgeGrid::from_index(m, slit_end, res.nx, res.nphi)?;
    let op = SparseOperator::assemble(&grid);
    let pair = eigenpairs(&op, k, &EigenOptions::new(crate::construct::DEFAULT_EIGEN_TOL))?
        .remove(k - 1);
    let trace = crate::construct::extract_trace(&pair, &op);
    let h = crate::construct::build_h(&pair, &grid, &trace, tol)?;
    let slope_a = h.dh0;
    let ds = trace.ds();
    let equator_end_uphi = slope_a + crate::quad::trapz(&trace.dv_eq, ds);
    let target = std::f64::consts::PI / m as f64;
    if target >= crate::construct::PHI_MAX {
        return Ok(AnchorReport {
            slope_a,
            equator_end_uphi,
            slope_b: None,
            dh_at_pi_over_m: None,
            discrepancy: None,
        });
    }
    let vth = crate::construct::meridian_derivative(&pair, &grid);
    let phis: Vec<f64> = (0..grid.nphi - 1).map(|j| grid.phi(j)).collect();
    let g: Vec<f64> = vth.iter().zip(&phis).map(|(v, p)| -v / p.cos()).collect();
    let src = Source::Spline(crate::interp::CubicSpline::new(&phis, &g)?);
    let nodes = [0.0, target];
    // h is affine in h'(0): forced part plus a multiple of the free solution
    let forced = legendre::solve_h(pair.mu, 3, &src, 0.0, 0.0, &nodes, tol)?;
    let free = legendre::solve_h(pair.mu, 3, &Source::Zero, 0.0, 1.0, &nodes, tol)?;
    let fp = forced.dh_values[1];
    let qp = free.dh_values[1];
    let slope_b = (qp != 0.0).then(|| -fp / qp);
    let dh_a = fp + slope_a * qp;
    Ok(AnchorReport {
        slope_a,
        equator_end_uphi,
        slope_b,
        dh_at_pi_over_m: Some(dh_a),
        discrepancy: slope_b.map(|b| b - slope_a),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRoot {
    pub m: usize,
    pub k: usize,
    pub root: RootResult,
    pub endpoints: EndpointReport,
    pub nodal_ok: bool,
    /// Which endpoint integral vanished at `sigma = 0` and `sigma = 1`.
    pub parity_note: String,
    pub anchor: AnchorReport,
    /// A clustered eigenvalue was met; the construction needs a simple one.
    pub inconclusive: bool,
}

pub fn variant_bisect(
    ev: &Evaluator,
    m: usize,
    k: usize,
    levels: usize,
    coarse: Resolution,
    cap_ratio: f64,
) -> Result<VariantRoot> {
    let endpoints = variant_endpoints(ev, m, k, coarse, cap_ratio)?;
    if !endpoints.opposite() {
        return Err(Error::NoSignChange {
            sigma_lo: 0.0,
            sigma_hi: 1.0,
            c_lo: endpoints.c0,
            c_hi: endpoints.c1,
        });
    }
    let scan = scan_c(ev, m, k, &uniform_sigmas(SCAN_POINTS), coarse)?;
    let mut clustered = false;
    for e in &scan {
        if let Ok(s) = &e.result {
            clustered |= s.clustered;
            if !s.nodal_ok {
                return Err(Error::NodalCheck {
                    m,
                    k,
                    sigma: s.sigma,
                });
            }
        }
    }
    let (a, b) = *sign_changes(&scan)
        .first()
        .ok_or(Error::NoSignChange {
            sigma_lo: 0.0,
            sigma_hi: 1.0,
            c_lo: endpoints.c0,
            c_hi: endpoints.c1,
        })?;
    let root = bisect_root(
        ev,
        m,
        k,
        (coarse.sigma(scan[a].slit_end), coarse.sigma(scan[b].slit_end)),
        levels,
        coarse,
    )?;
    if !root.nodal_ok {
        return Err(Error::NodalCheck {
            m,
            k,
            sigma: root.sigma_lo,
        });
    }
    let fin = root.finest();
    let anchor = anchor_report(
        m,
        k,
        fin.lo_index,
        Resolution {
            nx: fin.nx,
            nphi: fin.nphi,
        },
        ev.opts.ode_tol,
    )?;
    let parity_note = format!(
        "sigma=0: normal-derivative integral = {:e} (even eigenfunction); \
         sigma=1: trace integral = {:e} (odd eigenfunction)",
        endpoints.i1_at_0, endpoints.i2_at_1
    );
    Ok(VariantRoot {
        m,
        k,
        nodal_ok: root.nodal_ok,
        root,
        endpoints,
        parity_note,
        anchor,
        inconclusive: clustered,
    })
}

/// Smallest `k <= k_max` whose eigenfunction changes sign in the band
/// `phi <= 1/m`, or `None`.
pub fn nodal_threshold(m: usize, slit_end: usize, k_max: usize, res: Resolution) -> Result<Option<usize>> {
    let grid = WedgeGrid::from_index(m, slit_end, res.nx, res.nphi)?;
    let op = SparseOperator::assemble(&grid);
    let pairs = eigenpairs(&op, k_max, &EigenOptions::new(crate::construct::DEFAULT_EIGEN_TOL))?;
    Ok(pairs
        .iter()
        .find(|p| !nodal_sign_check(p, &grid))
        .map(|p| p.k))
}
