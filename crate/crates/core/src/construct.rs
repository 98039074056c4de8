//! From an eigenpair to the equator traces, the obstruction value `c`, the
//! profile `h` and the candidate solution `u`.
//!
//! With `v` the eigenfunction and `s = x / m` the original azimuth,
//! `u(s, phi) = int_0^s v(t, phi) dt + h(phi)`, where `h` solves
//! `L_mu h + v_theta(0, phi) / cos^2(phi) = 0` from `h(0) = 0`,
//! `h'(0) = -int v_phi(t, 0+) dt`. `c` is the obstruction to `u` being
//! homogeneous; its zero in `sigma` gives a genuine solution.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::Result;
use crate::interp::CubicSpline;
use crate::legendre::{self, ForcedProfile, LegendreEval, Source};
use crate::quad::{cumtrapz, trapz, trapz_xy};
use crate::spectral::{
    eigenpairs, nodal_sign_check, EigenOptions, EigenPair, InnerSolver, SparseOperator, WedgeGrid,
};

/// Largest latitude at which `h` and `u` are evaluated.
pub const PHI_MAX: f64 = FRAC_PI_2 - 0.02;
/// Default relative residual for the eigensolver.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-9;
/// Sign tolerance of the complementarity checks.
pub const SIGN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EquatorTrace {
    pub m: usize,
    pub sigma: f64,
    pub slit_end: usize,
    pub s_nodes: Vec<f64>,
    pub v_eq: Vec<f64>,
    /// `v_phi(s, 0+)` from the discrete reaction on the slit, zero elsewhere.
    pub dv_eq: Vec<f64>,
    /// The same trace from a three-point one-sided stencil (diagnostic).
    pub dv_eq_stencil: Vec<f64>,
}

impl EquatorTrace {
    pub fn ds(&self) -> f64 {
        self.s_nodes[1] - self.s_nodes[0]
    }

    /// `int dv_eq(s) s ds`.
    pub fn i1(&self) -> f64 {
        let y: Vec<f64> = self.dv_eq.iter().zip(&self.s_nodes).map(|(d, s)| d * s).collect();
        trapz(&y, self.ds())
    }

    /// `int v_eq(s) (pi/m - s) ds`.
    pub fn i2(&self) -> f64 {
        let top = *self.s_nodes.last().unwrap();
        let y: Vec<f64> = self
            .v_eq
            .iter()
            .zip(&self.s_nodes)
            .map(|(v, s)| v * (top - s))
            .collect();
        trapz(&y, self.ds())
    }
}

/// Reads the equator traces off an eigenfunction.
///
/// The normal derivative on the slit is the discrete reaction
/// `-(A v - lambda B v)_i / w_i` with `w_i` the trapezoid weight, which is
/// the flux the weak form actually sees. Off the slit the even reflection
/// makes it zero.
pub fn extract_trace(pair: &EigenPair, op: &SparseOperator) -> EquatorTrace {
    let g = &op.grid;
    let av = op.apply_full(&pair.v);
    let ds = g.ds();
    let mut dv_eq = vec![0.0; g.nx];
    for i in g.slit_interior() {
        let k = g.index(i, 0);
        let r = av[k] - pair.lambda * op.mass_full[k] * pair.v[k];
        dv_eq[i] = -r / ds;
    }
    let v_eq: Vec<f64> = (0..g.nx).map(|i| pair.v[g.index(i, 0)]).collect();
    let dv_eq_stencil = (0..g.nx)
        .map(|i| {
            if i <= g.slit_end && i > 0 && i < g.nx - 1 {
                let c = |j| pair.v[g.index(i, j)];
                (-3.0 * c(0) + 4.0 * c(1) - c(2)) / (2.0 * g.dphi)
            } else {
                0.0
            }
        })
        .collect();
    EquatorTrace {
        m: g.m,
        sigma: g.sigma,
        slit_end: g.slit_end,
        s_nodes: g.s_nodes(),
        v_eq,
        dv_eq,
        dv_eq_stencil,
    }
}

/// `2m [p0 int dv_eq s ds + dp0 int v_eq (pi/m - s) ds]`.
pub fn c_by_quantity(trace: &EquatorTrace, leg: &LegendreEval) -> f64 {
    2.0 * trace.m as f64 * (leg.p0 * trace.i1() + leg.dp0 * trace.i2())
}

/// Magnitude scale `|p0| ||dv_eq||_1 pi/m + |dp0| ||v_eq||_1 pi/m` against
/// which discrepancies in `c` are measured.
pub fn c_scale(trace: &EquatorTrace, leg: &LegendreEval) -> f64 {
    let ds = trace.ds();
    let top = *trace.s_nodes.last().unwrap();
    let l1 = |y: &[f64]| trapz(&y.iter().map(|v| v.abs()).collect::<Vec<_>>(), ds);
    leg.p0.abs() * l1(&trace.dv_eq) * top + leg.dp0.abs() * l1(&trace.v_eq) * top
}

/// `v_theta(0, phi_j)` for the non-pole rows, by a one-sided stencil.
pub fn meridian_derivative(pair: &EigenPair, grid: &WedgeGrid) -> Vec<f64> {
    let ds = grid.ds();
    (0..grid.nphi - 1)
        .map(|j| {
            let c = |i| pair.v[grid.index(i, j)];
            (-3.0 * c(0) + 4.0 * c(1) - c(2)) / (2.0 * ds)
        })
        .collect()
}

/// Grid rows used for `h` and `u`.
pub fn profile_rows(grid: &WedgeGrid) -> usize {
    (0..grid.nphi).take_while(|&j| grid.phi(j) <= PHI_MAX).count()
}

/// Solves for `h` on the grid rows up to `PHI_MAX`.
pub fn build_h(
    pair: &EigenPair,
    grid: &WedgeGrid,
    trace: &EquatorTrace,
    tol: f64,
) -> Result<ForcedProfile> {
    let vth = meridian_derivative(pair, grid);
    let phis: Vec<f64> = (0..grid.nphi - 1).map(|j| grid.phi(j)).collect();
    // L h = g / cos(phi) with g = -v_theta / cos(phi) reproduces the
    // v_theta / cos^2 forcing for n = 3
    let g: Vec<f64> = vth.iter().zip(&phis).map(|(v, p)| -v / p.cos()).collect();
    let source = Source::Spline(CubicSpline::new(&phis, &g)?);
    let dh0 = -trapz(&trace.dv_eq, trace.ds());
    let nodes: Vec<f64> = (0..profile_rows(grid)).map(|j| grid.phi(j)).collect();
    legendre::solve_h(pair.mu, 3, &source, 0.0, dh0, &nodes, tol)
}

/// `u = int_0^s v + h` on the rows where `h` is known; row-major in `x`,
/// entry `(i, j)` at `i * rows + j`.
pub fn build_u(pair: &EigenPair, h: &ForcedProfile, grid: &WedgeGrid) -> Vec<f64> {
    let rows = h.phi_nodes.len();
    let mut u = vec![0.0; grid.nx * rows];
    let mut line = vec![0.0; grid.nx];
    for j in 0..rows {
        for (i, l) in line.iter_mut().enumerate() {
            *l = pair.v[grid.index(i, j)];
        }
        for (i, c) in cumtrapz(&line, grid.ds()).into_iter().enumerate() {
            u[i * rows + j] = c + h.h_values[j];
        }
    }
    u
}

/// `2m [-p0 int u_phi(t, 0+) dt + dp0 int u(t, 0) dt]` with `u_phi` from the
/// three-point stencil on the `u` grid.
pub fn c_by_parts(u: &[f64], rows: usize, grid: &WedgeGrid, leg: &LegendreEval) -> f64 {
    let at = |i: usize, j: usize| u[i * rows + j];
    let u0: Vec<f64> = (0..grid.nx).map(|i| at(i, 0)).collect();
    let uphi: Vec<f64> = (0..grid.nx)
        .map(|i| (-3.0 * at(i, 0) + 4.0 * at(i, 1) - at(i, 2)) / (2.0 * grid.dphi))
        .collect();
    let ds = grid.ds();
    2.0 * grid.m as f64 * (-leg.p0 * trapz(&uphi, ds) + leg.dp0 * trapz(&u0, ds))
}

/// Sign conditions of the thin obstacle problem along the equator.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SignReport {
    /// `min u` over the equator.
    pub u_min: f64,
    /// `max |u|` on the slit.
    pub slit_u_max: f64,
    /// `max u_phi` on the slit (must not be positive).
    pub slit_uphi_max: f64,
    /// `max |u_phi|` off the slit.
    pub open_uphi_max: f64,
    /// `max |u u_phi|` over the equator.
    pub complementarity: f64,
    /// `max |u_phi|` over the equator, the scale of the derivative checks.
    pub uphi_scale: f64,
    pub u_scale: f64,
    /// Off-slit `max |u_phi|` from the grid stencil, relative to `uphi_scale`.
    pub stencil_open_uphi_rel: f64,
    pub passes: bool,
}

impl SignReport {
    fn evaluate(
        trace: &EquatorTrace,
        dh0: f64,
        grid_uphi: &[f64],
    ) -> (SignReport, Vec<f64>, Vec<f64>) {
        let ds = trace.ds();
        let u_eq = cumtrapz(&trace.v_eq, ds);
        let uphi_eq: Vec<f64> = cumtrapz(&trace.dv_eq, ds).iter().map(|c| dh0 + c).collect();
        let on_slit = |i: usize| i <= trace.slit_end;
        let mut r = SignReport {
            u_min: f64::INFINITY,
            slit_u_max: 0.0,
            slit_uphi_max: f64::NEG_INFINITY,
            open_uphi_max: 0.0,
            complementarity: 0.0,
            uphi_scale: uphi_eq.iter().map(|v| v.abs()).fold(0.0, f64::max),
            u_scale: u_eq.iter().map(|v| v.abs()).fold(0.0, f64::max),
            stencil_open_uphi_rel: 0.0,
            passes: false,
        };
        let mut stencil_open: f64 = 0.0;
        for i in 0..u_eq.len() {
            r.u_min = r.u_min.min(u_eq[i]);
            r.complementarity = r.complementarity.max((u_eq[i] * uphi_eq[i]).abs());
            if on_slit(i) {
                r.slit_u_max = r.slit_u_max.max(u_eq[i].abs());
                r.slit_uphi_max = r.slit_uphi_max.max(uphi_eq[i]);
            } else {
                r.open_uphi_max = r.open_uphi_max.max(uphi_eq[i].abs());
                stencil_open = stencil_open.max(grid_uphi[i].abs());
            }
        }
        let gscale = grid_uphi.iter().map(|v| v.abs()).fold(0.0, f64::max);
        r.stencil_open_uphi_rel = if gscale > 0.0 { stencil_open / gscale } else { 0.0 };
        let dscale = r.uphi_scale.max(f64::MIN_POSITIVE);
        let pscale = (r.uphi_scale * r.u_scale).max(f64::MIN_POSITIVE);
        r.passes = r.u_min >= -SIGN_TOL
            && r.slit_u_max <= SIGN_TOL * r.u_scale.max(1.0)
            && r.slit_uphi_max <= SIGN_TOL * dscale
            && r.open_uphi_max <= SIGN_TOL * dscale
            && r.complementarity <= SIGN_TOL * pscale;
        (r, u_eq, uphi_eq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub eigen_tol: f64,
    pub ode_tol: f64,
    /// Evaluate the Legendre data at the closed-form frequency when the slit
    /// is empty or full.
    pub exact_endpoint_mu: bool,
    pub inner: InnerSolver,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            eigen_tol: DEFAULT_EIGEN_TOL,
            ode_tol: legendre::DEFAULT_TOL,
            exact_endpoint_mu: true,
            inner: InnerSolver::Direct,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolutionBundle {
    pub m: usize,
    pub k: usize,
    pub sigma: f64,
    pub slit_end: usize,
    pub nx: usize,
    pub nphi: usize,
    pub lambda: f64,
    pub mu: f64,
    /// Frequency at which `p0`, `dp0` were evaluated.
    pub mu_legendre: f64,
    pub eigen_residual: f64,
    pub clustered: bool,
    pub nodal_ok: bool,
    pub p0: f64,
    pub dp0: f64,
    pub i1: f64,
    pub i2: f64,
    pub c_quantity: f64,
    pub c_parts: f64,
    /// `c_quantity` with the stencil trace instead of the reaction.
    pub c_quantity_stencil: f64,
    pub c_scale: f64,
    /// Sign of `c` in `{-1, 0, 1}`; zero when both terms vanish.
    pub c_sign: i8,
    /// `p0 h'(0) - int p(phi) v_theta(0, phi) / cos(phi) dphi`, which shares
    /// its zero with `c`.
    pub pole_pairing: f64,
    pub trace: EquatorTrace,
    pub u_eq: Vec<f64>,
    pub uphi_eq: Vec<f64>,
    pub h: ForcedProfile,
    pub u_rows: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub sign_report: SignReport,
}

impl SolutionBundle {
    /// Relative disagreement of the two formulas for `c`.
    pub fn dual_gap(&self) -> f64 {
        (self.c_quantity - self.c_parts).abs() / self.c_scale
    }
}

/// Closed-form frequency at an empty (`full = false`) or full slit.
pub fn endpoint_mu(m: usize, k: usize, full: bool) -> f64 {
    (m + 2 * k - 2 + usize::from(full)) as f64
}

/// Runs grid, eigenpair and construction for the slit ending at x-node
/// `slit_end`.
pub fn solve_bundle(
    m: usize,
    k: usize,
    slit_end: usize,
    nx: usize,
    nphi: usize,
    opts: &BuildOptions,
) -> Result<SolutionBundle> {
    let grid = WedgeGrid::from_index(m, slit_end, nx, nphi)?;
    let op = SparseOperator::assemble(&grid);
    let mut eo = EigenOptions::new(opts.eigen_tol);
    eo.inner = opts.inner;
    let pair = eigenpairs(&op, k, &eo)?.remove(k - 1);
    bundle_from_pair(&op, &pair, opts)
}

pub fn bundle_from_pair(
    op: &SparseOperator,
    pair: &EigenPair,
    opts: &BuildOptions,
) -> Result<SolutionBundle> {
    let grid = &op.grid;
    let m = grid.m;
    let trace = extract_trace(pair, op);
    let mu_legendre = if opts.exact_endpoint_mu && grid.slit_end == 0 {
        endpoint_mu(m, pair.k, false)
    } else if opts.exact_endpoint_mu && grid.slit_end == grid.nx - 1 {
        endpoint_mu(m, pair.k, true)
    } else {
        pair.mu
    };
    let phis: Vec<f64> = (0..grid.nphi - 1).map(|j| grid.phi(j)).collect();
    let leg = legendre::solve_p_on(mu_legendre, 3, opts.ode_tol, &phis)?;
    let h = build_h(pair, grid, &trace, opts.ode_tol)?;
    let u = build_u(pair, &h, grid);
    let rows = h.phi_nodes.len();

    let i1 = trace.i1();
    let i2 = trace.i2();
    let c_quantity = c_by_quantity(&trace, &leg);
    let c_parts = c_by_parts(&u, rows, grid, &leg);
    let mut stencil_trace = trace.clone();
    stencil_trace.dv_eq = trace.dv_eq_stencil.clone();
    let c_quantity_stencil = c_by_quantity(&stencil_trace, &leg);
    let scale = c_scale(&trace, &leg);

    let first_zero = i1 == 0.0 || leg.p0_is_zero();
    let second_zero = i2 == 0.0 || leg.dp0_is_zero();
    let c_sign = if first_zero && second_zero {
        0
    } else if c_quantity > 0.0 {
        1
    } else if c_quantity < 0.0 {
        -1
    } else {
        0
    };

    let vth = meridian_derivative(pair, grid);
    let integrand: Vec<f64> = leg
        .p_values
        .iter()
        .zip(&vth)
        .zip(&phis)
        .map(|((p, v), phi)| p * v / phi.cos())
        .collect();
    let pole_pairing = leg.p0 * h.dh0 - trapz_xy(&phis, &integrand);

    let grid_uphi: Vec<f64> = (0..grid.nx)
        .map(|i| {
            let at = |j: usize| u[i * rows + j];
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * grid.dphi)
        })
        .collect();
    let (sign_report, u_eq, uphi_eq) = SignReport::evaluate(&trace, h.dh0, &grid_uphi);

    Ok(SolutionBundle {
        m,
        k: pair.k,
        sigma: grid.sigma,
        slit_end: grid.slit_end,
        nx: grid.nx,
        nphi: grid.nphi,
        lambda: pair.lambda,
        mu: pair.mu,
        mu_legendre,
        eigen_residual: pair.residual,
        clustered: pair.clustered,
        nodal_ok: nodal_sign_check(pair, grid),
        p0: leg.p0,
        dp0: leg.dp0,
        i1,
        i2,
        c_quantity,
        c_parts,
        c_quantity_stencil,
        c_scale: scale,
        c_sign,
        pole_pairing,
        trace,
        u_eq,
        uphi_eq,
        h,
        u_rows: rows,
        u,
        v: pair.v.clone(),
        sign_report,
    })
}
