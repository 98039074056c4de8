//! Root location for `c(sigma)` by bisection over snapped slit fractions,
//! with mesh refinement and Richardson extrapolation, plus the asymptotic
//! trend diagnostics.

use parking_lot::RwLock;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use crate::construct::{solve_bundle, BuildOptions, SolutionBundle};
use crate::error::{invalid, Error, Result};
use crate::quad::trapz;
use crate::spectral::WedgeGrid;

/// Richardson exponent of the second-order scheme.
pub const RICHARDSON_ORDER: f64 = 2.0;
/// How many cells the bracket may drift per refinement before it counts as
/// lost.
pub const MAX_DRIFT_CELLS: usize = 8;
/// Default slit fractions scanned before bisection.
pub const SCAN_POINTS: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub nx: usize,
    pub nphi: usize,
}

impl Resolution {
    pub fn square(n: usize) -> Self {
        Self { nx: n, nphi: n }
    }

    pub fn refined(self) -> Self {
        Self {
            nx: 2 * self.nx - 1,
            nphi: 2 * self.nphi - 1,
        }
    }

    /// Slit index nearest to `sigma`.
    pub fn snap(self, sigma: f64) -> usize {
        (sigma * (self.nx - 1) as f64).round() as usize
    }

    pub fn sigma(self, index: usize) -> f64 {
        index as f64 / (self.nx - 1) as f64
    }
}

/// Cache key of one pipeline evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EvalKey {
    pub m: usize,
    pub k: usize,
    pub slit_end: usize,
    pub nx: usize,
    pub nphi: usize,
    /// Bit pattern of the eigensolver tolerance.
    pub tol_bits: u64,
}

impl EvalKey {
    /// Canonical text form, stable across runs.
    pub fn canonical(&self) -> String {
        format!(
            "m={};k={};slit={};nx={};nphi={};tol={:e}",
            self.m,
            self.k,
            self.slit_end,
            self.nx,
            self.nphi,
            f64::from_bits(self.tol_bits)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub key: EvalKey,
    pub sigma: f64,
    pub lambda: f64,
    pub mu: f64,
    pub c: f64,
    pub c_parts: f64,
    pub c_scale: f64,
    pub c_sign: i8,
    pub residual: f64,
    pub nodal_ok: bool,
    pub clustered: bool,
    pub sign_ok: bool,
}

impl EvalSummary {
    pub fn from_bundle(key: EvalKey, b: &SolutionBundle) -> Self {
        Self {
            key,
            sigma: b.sigma,
            lambda: b.lambda,
            mu: b.mu,
            c: b.c_quantity,
            c_parts: b.c_parts,
            c_scale: b.c_scale,
            c_sign: b.c_sign,
            residual: b.eigen_residual,
            nodal_ok: b.nodal_ok,
            clustered: b.clustered,
            sign_ok: b.sign_report.passes,
        }
    }
}

/// Storage for evaluation summaries. Values are deterministic functions of
/// their key, so concurrent writers of the same key are harmless.
pub trait EvalStore: Send + Sync {
    fn get(&self, key: &EvalKey) -> Option<EvalSummary>;
    fn put(&self, summary: &EvalSummary);
}

#[derive(Default)]
pub struct MemoryStore {
    map: RwLock<HashMap<EvalKey, EvalSummary>>,
}

impl MemoryStore {
    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl EvalStore for MemoryStore {
    fn get(&self, key: &EvalKey) -> Option<EvalSummary> {
        self.map.read().get(key).cloned()
    }

    fn put(&self, summary: &EvalSummary) {
        self.map.write().insert(summary.key, summary.clone());
    }
}

/// Runs the pipeline for one slit index and memoizes the summary.
#[derive(Clone)]
pub struct Evaluator {
    pub opts: BuildOptions,
    store: Arc<dyn EvalStore>,
}

impl Evaluator {
    pub fn new(opts: BuildOptions) -> Self {
        Self::with_store(opts, Arc::new(MemoryStore::default()))
    }

    pub fn with_store(opts: BuildOptions, store: Arc<dyn EvalStore>) -> Self {
        Self { opts, store }
    }

    pub fn key(&self, m: usize, k: usize, slit_end: usize, res: Resolution) -> EvalKey {
        EvalKey {
            m,
            k,
            slit_end,
            nx: res.nx,
            nphi: res.nphi,
            tol_bits: self.opts.eigen_tol.to_bits(),
        }
    }

    pub fn eval(&self, m: usize, k: usize, slit_end: usize, res: Resolution) -> Result<EvalSummary> {
        let key = self.key(m, k, slit_end, res);
        if let Some(s) = self.store.get(&key) {
            return Ok(s);
        }
        let b = self.bundle(m, k, slit_end, res)?;
        let s = EvalSummary::from_bundle(key, &b);
        self.store.put(&s);
        Ok(s)
    }

    /// Full bundle, never cached.
    pub fn bundle(
        &self,
        m: usize,
        k: usize,
        slit_end: usize,
        res: Resolution,
    ) -> Result<SolutionBundle> {
        solve_bundle(m, k, slit_end, res.nx, res.nphi, &self.opts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub sigma_requested: f64,
    pub slit_end: usize,
    /// Failures are kept as their message so that a scan never aborts.
    pub result: std::result::Result<EvalSummary, String>,
}

/// Evaluates `c` at each slit fraction concurrently. Failures are kept per
/// entry.
pub fn scan_c(
    ev: &Evaluator,
    m: usize,
    k: usize,
    sigmas: &[f64],
    res: Resolution,
) -> Result<Vec<ScanEntry>> {
    if sigmas.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(invalid("scan values must lie in [0, 1]"));
    }
    if sigmas.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("scan values must be sorted"));
    }
    Ok(sigmas
        .par_iter()
        .map(|&s| {
            let idx = res.snap(s);
            ScanEntry {
                sigma_requested: s,
                slit_end: idx,
                result: ev.eval(m, k, idx, res).map_err(|e| e.to_string()),
            }
        })
        .collect())
}

/// Uniform slit fractions `0, 1/(n-1), ..., 1`.
pub fn uniform_sigmas(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Adjacent pairs of successful, nonzero entries with opposite signs.
pub fn sign_changes(entries: &[ScanEntry]) -> Vec<(usize, usize)> {
    let signed: Vec<(usize, i8)> = entries
        .iter()
        .enumerate()
        .filter_map(|(i, e)| match &e.result {
            Ok(s) if s.c_sign != 0 => Some((i, s.c_sign)),
            _ => None,
        })
        .collect();
    signed
        .windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .map(|w| (w[0].0, w[1].0))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub nx: usize,
    pub nphi: usize,
    pub lo_index: usize,
    pub hi_index: usize,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub c_lo: f64,
    pub c_hi: f64,
    pub mu_lo: f64,
    pub mu_hi: f64,
    /// Linear interpolation of the zero inside the final one-cell bracket.
    pub sigma_root: f64,
    pub mu_root: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootResult {
    pub m: usize,
    pub k: usize,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub mesh_levels: Vec<LevelRecord>,
    pub extrapolated_sigma: f64,
    pub extrapolated_mu: f64,
    /// Convergence order of the root estimate from the three finest levels.
    pub observed_order: Option<f64>,
    /// Every evaluation on the bisection path kept one sign near the equator.
    pub nodal_ok: bool,
}

impl RootResult {
    pub fn finest(&self) -> &LevelRecord {
        self.mesh_levels.last().expect("at least one level")
    }

    /// `m + 2k - 2 < mu < m + 2k - 1`.
    pub fn in_frequency_window(&self) -> bool {
        let lo = (self.m + 2 * self.k - 2) as f64;
        self.extrapolated_mu > lo && self.extrapolated_mu < lo + 1.0
    }
}

struct Bracket {
    lo: usize,
    hi: usize,
    s_lo: EvalSummary,
    s_hi: EvalSummary,
}

fn opposite(a: &EvalSummary, b: &EvalSummary) -> bool {
    a.c_sign != 0 && b.c_sign != 0 && a.c_sign != b.c_sign
}

/// Bisects `c` over snapped slit indices, refining the mesh `levels - 1`
/// times. The bracket is given in slit fractions at the coarsest level.
pub fn bisect_root(
    ev: &Evaluator,
    m: usize,
    k: usize,
    bracket: (f64, f64),
    levels: usize,
    coarse: Resolution,
) -> Result<RootResult> {
    if levels == 0 {
        return Err(invalid("need at least one mesh level"));
    }
    let (a, b) = bracket;
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a >= b {
        return Err(invalid(format!("bad bracket ({a}, {b})")));
    }
    let mut res = coarse;
    let lo = (a * (res.nx - 1) as f64).floor() as usize;
    let hi = ((b * (res.nx - 1) as f64).ceil() as usize).max(lo + 1);
    let s_lo = ev.eval(m, k, lo, res)?;
    let s_hi = ev.eval(m, k, hi, res)?;
    if !opposite(&s_lo, &s_hi) {
        return Err(Error::NoSignChange {
            sigma_lo: s_lo.sigma,
            sigma_hi: s_hi.sigma,
            c_lo: s_lo.c,
            c_hi: s_hi.c,
        });
    }
    let lo_sign = s_lo.c_sign;
    let mut br = Bracket { lo, hi, s_lo, s_hi };
    let mut records = Vec::with_capacity(levels);
    let mut nodal_ok = br.s_lo.nodal_ok && br.s_hi.nodal_ok;

    for level in 0..levels {
        let mut evaluations = 2;
        if level > 0 {
            res = res.refined();
            let (mut lo, mut hi) = (2 * br.lo, 2 * br.hi);
            let mut s_lo = ev.eval(m, k, lo, res)?;
            let mut s_hi = ev.eval(m, k, hi, res)?;
            nodal_ok &= s_lo.nodal_ok && s_hi.nodal_ok;
            let mut drift = 0;
            while !opposite(&s_lo, &s_hi) {
                drift += 1;
                let lost = Error::BracketLost {
                    level,
                    sigma_lo: s_lo.sigma,
                    sigma_hi: s_hi.sigma,
                    c_lo: s_lo.c,
                    c_hi: s_hi.c,
                };
                if drift > MAX_DRIFT_CELLS || s_lo.c_sign == 0 || s_hi.c_sign == 0 {
                    return Err(lost);
                }
                if s_hi.c_sign == lo_sign {
                    // zero moved right of the bracket
                    if hi + 1 > res.nx - 1 {
                        return Err(lost);
                    }
                    lo = hi;
                    s_lo = s_hi;
                    hi += 1;
                    s_hi = ev.eval(m, k, hi, res)?;
                } else {
                    if lo == 0 {
                        return Err(lost);
                    }
                    hi = lo;
                    s_hi = s_lo;
                    lo -= 1;
                    s_lo = ev.eval(m, k, lo, res)?;
                }
                evaluations += 1;
                nodal_ok &= s_lo.nodal_ok && s_hi.nodal_ok;
            }
            br = Bracket { lo, hi, s_lo, s_hi };
        }
        while br.hi - br.lo > 1 {
            let mid = (br.lo + br.hi) / 2;
            let s = ev.eval(m, k, mid, res)?;
            evaluations += 1;
            nodal_ok &= s.nodal_ok;
            if s.c_sign == br.s_lo.c_sign {
                br.lo = mid;
                br.s_lo = s;
            } else {
                br.hi = mid;
                br.s_hi = s;
            }
        }
        let t = br.s_lo.c / (br.s_lo.c - br.s_hi.c);
        records.push(LevelRecord {
            nx: res.nx,
            nphi: res.nphi,
            lo_index: br.lo,
            hi_index: br.hi,
            sigma_lo: br.s_lo.sigma,
            sigma_hi: br.s_hi.sigma,
            c_lo: br.s_lo.c,
            c_hi: br.s_hi.c,
            mu_lo: br.s_lo.mu,
            mu_hi: br.s_hi.mu,
            sigma_root: br.s_lo.sigma + t * (br.s_hi.sigma - br.s_lo.sigma),
            mu_root: br.s_lo.mu + t * (br.s_hi.mu - br.s_lo.mu),
            evaluations,
        });
        log::info!(
            "m={m} k={k} level {level} ({}x{}): sigma in [{}, {}]",
            res.nx,
            res.nphi,
            br.s_lo.sigma,
            br.s_hi.sigma
        );
    }

    let (extrapolated_sigma, extrapolated_mu) = extrapolate(&records);
    let observed_order = if records.len() >= 3 {
        let n = records.len();
        let d1 = records[n - 2].sigma_root - records[n - 3].sigma_root;
        let d2 = records[n - 1].sigma_root - records[n - 2].sigma_root;
        (d1 != 0.0 && d2 != 0.0).then(|| (d1 / d2).abs().log2())
    } else {
        None
    };
    let fin = records.last().unwrap().clone();
    Ok(RootResult {
        m,
        k,
        sigma_lo: fin.sigma_lo,
        sigma_hi: fin.sigma_hi,
        mu_lo: fin.mu_lo,
        mu_hi: fin.mu_hi,
        mesh_levels: records,
        extrapolated_sigma,
        extrapolated_mu,
        observed_order,
        nodal_ok,
    })
}

/// Richardson extrapolation of the two finest root estimates.
pub fn extrapolate(records: &[LevelRecord]) -> (f64, f64) {
    let n = records.len();
    let f = &records[n - 1];
    if n < 2 {
        return (f.sigma_root, f.mu_root);
    }
    let c = &records[n - 2];
    let r = 2f64.powf(RICHARDSON_ORDER) - 1.0;
    (
        f.sigma_root + (f.sigma_root - c.sigma_root) / r,
        f.mu_root + (f.mu_root - c.mu_root) / r,
    )
}

/// Scans `SCAN_POINTS` slit fractions at the coarse resolution and bisects
/// every sign change.
pub fn find_roots(
    ev: &Evaluator,
    m: usize,
    k: usize,
    levels: usize,
    coarse: Resolution,
) -> Result<(Vec<ScanEntry>, Vec<RootResult>)> {
    let sigmas = uniform_sigmas(SCAN_POINTS);
    let scan = scan_c(ev, m, k, &sigmas, coarse)?;
    let changes = sign_changes(&scan);
    let roots = changes
        .iter()
        .map(|&(a, b)| {
            bisect_root(
                ev,
                m,
                k,
                (coarse.sigma(scan[a].slit_end), coarse.sigma(scan[b].slit_end)),
                levels,
                coarse,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((scan, roots))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabSup {
    pub y_lo: f64,
    pub y_hi: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledReport {
    pub m: usize,
    pub y_max: f64,
    /// Factor that makes `int v~(x, 1) sin x dx = pi/2`.
    pub norm_factor: f64,
    pub slabs: Vec<SlabSup>,
    pub sup: f64,
}

/// Compares the rescaled eigenfunction `v~(x, y) = v(x, phi = y/m)` with
/// `sin x` on `[0, pi] x [0, y_max]`.
pub fn rescaled_trace_diagnostic(
    v: &[f64],
    grid: &WedgeGrid,
    y_max: f64,
    slabs: usize,
) -> Result<RescaledReport> {
    let m = grid.m as f64;
    if !(y_max > 0.0) || y_max / m >= FRAC_PI_2 {
        return Err(invalid(format!("y_max / m must lie in (0, pi/2), got {}", y_max / m)));
    }
    if slabs == 0 {
        return Err(invalid("need at least one slab"));
    }
    let sample = |i: usize, y: f64| -> f64 {
        let phi = y / m;
        let t = phi / grid.dphi;
        let j = (t.floor() as usize).min(grid.nphi - 2);
        let w = t - j as f64;
        (1.0 - w) * v[grid.index(i, j)] + w * v[grid.index(i, j + 1)]
    };
    let xs = grid.x_nodes();
    let row1: Vec<f64> = (0..grid.nx).map(|i| sample(i, 1.0) * xs[i].sin()).collect();
    let integral = trapz(&row1, grid.dx);
    if integral == 0.0 {
        return Err(invalid("rescaled trace vanishes on y = 1"));
    }
    let alpha = FRAC_PI_2 / integral;
    let per_slab = 64;
    let mut out = Vec::with_capacity(slabs);
    for s in 0..slabs {
        let y_lo = y_max * s as f64 / slabs as f64;
        let y_hi = y_max * (s + 1) as f64 / slabs as f64;
        let mut sup: f64 = 0.0;
        for q in 0..=per_slab {
            let y = y_lo + (y_hi - y_lo) * q as f64 / per_slab as f64;
            for (i, x) in xs.iter().enumerate() {
                sup = sup.max((alpha * sample(i, y) - x.sin()).abs());
            }
        }
        out.push(SlabSup { y_lo, y_hi, sup });
    }
    let sup = out.iter().map(|s| s.sup).fold(0.0, f64::max);
    debug_assert!(xs[grid.nx - 1] == PI);
    Ok(RescaledReport {
        m: grid.m,
        y_max,
        norm_factor: alpha,
        slabs: out,
        sup,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub m: usize,
    pub sigma: f64,
    pub mu: f64,
    /// `m + 1 - mu`.
    pub gap: f64,
    /// Rescaled-trace sup distance to `sin x` on `[0, pi] x [0, 2]` at the root.
    pub rescaled_sup: f64,
    pub roots_found: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub rows: Vec<TrendRow>,
    pub sigma_decreasing: bool,
    pub gap_decreasing: bool,
    pub rescaled_decreasing: bool,
}

fn strictly_decreasing(xs: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = xs.collect();
    v.windows(2).all(|w| w[1] < w[0])
}

/// Builds the trend table from located roots (first root for each `m`).
pub fn trend_from_roots(ev: &Evaluator, roots: &[(usize, Vec<RootResult>)]) -> Result<TrendReport> {
    let mut rows = Vec::with_capacity(roots.len());
    for (m, rs) in roots {
        let r = rs
            .first()
            .ok_or_else(|| invalid(format!("no root found for m = {m}")))?;
        let fin = r.finest();
        let res = Resolution {
            nx: fin.nx,
            nphi: fin.nphi,
        };
        let idx = if fin.c_lo.abs() <= fin.c_hi.abs() {
            fin.lo_index
        } else {
            fin.hi_index
        };
        let b = ev.bundle(*m, r.k, idx, res)?;
        let grid = WedgeGrid::from_index(*m, idx, res.nx, res.nphi)?;
        let diag = rescaled_trace_diagnostic(&b.v, &grid, 2.0, 4)?;
        rows.push(TrendRow {
            m: *m,
            sigma: r.extrapolated_sigma,
            mu: r.extrapolated_mu,
            gap: (*m + 1) as f64 - r.extrapolated_mu,
            rescaled_sup: diag.sup,
            roots_found: rs.len(),
        });
    }
    Ok(TrendReport {
        sigma_decreasing: strictly_decreasing(rows.iter().map(|r| r.sigma)),
        gap_decreasing: strictly_decreasing(rows.iter().map(|r| r.gap)),
        rescaled_decreasing: strictly_decreasing(rows.iter().map(|r| r.rescaled_sup)),
        rows,
    })
}

/// Locates the `k = 1` root for every `m` in the list and tabulates the
/// trends.
pub fn trend_report(
    ev: &Evaluator,
    m_list: &[usize],
    levels: usize,
    coarse: Resolution,
) -> Result<TrendReport> {
    let roots = m_list
        .iter()
        .map(|&m| Ok((m, find_roots(ev, m, 1, levels, coarse)?.1)))
        .collect::<Result<Vec<_>>>()?;
    trend_from_roots(ev, &roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_brackets_root_and_caches() {
        let ev = Evaluator::new(BuildOptions::default());
        let r = bisect_root(&ev, 3, 1, (0.3, 0.5), 2, Resolution::square(33)).unwrap();
        assert_eq!(r.mesh_levels.len(), 2);
        for l in &r.mesh_levels {
            assert_eq!(l.hi_index, l.lo_index + 1);
            assert!(l.c_lo * l.c_hi < 0.0);
            assert!(l.mu_lo <= l.mu_hi);
        }
        assert!(r.in_frequency_window());
        let again = bisect_root(&ev, 3, 1, (0.3, 0.5), 2, Resolution::square(33)).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn no_sign_change_reported() {
        let ev = Evaluator::new(BuildOptions::default());
        let e = bisect_root(&ev, 3, 1, (0.0, 0.2), 1, Resolution::square(33));
        assert!(matches!(e, Err(Error::NoSignChange { .. })));
    }

    #[test]
    fn scan_validates_input() {
        let ev = Evaluator::new(BuildOptions::default());
        assert!(scan_c(&ev, 3, 1, &[0.5, 0.2], Resolution::square(33)).is_err());
        assert!(scan_c(&ev, 3, 1, &[1.5], Resolution::square(33)).is_err());
    }

    #[test]
    fn rescaled_diagnostic_closed_form() {
        // sigma = 0: v = cos^m(phi) sin x
        for m in [3usize, 15] {
            let g = WedgeGrid::from_index(m, 0, 129, 513).unwrap();
            let v: Vec<f64> = (0..g.len())
                .map(|k| {
                    let (i, j) = (k / g.nphi, k % g.nphi);
                    g.phi(j).cos().powi(m as i32) * g.x(i).sin()
                })
                .collect();
            let r = rescaled_trace_diagnostic(&v, &g, 2.0, 4).unwrap();
            let c1 = (1.0 / m as f64).cos().powi(m as i32);
            let c2 = (2.0 / m as f64).cos().powi(m as i32);
            let expect = (1.0 / c1 - 1.0).max(1.0 - c2 / c1);
            assert!((r.sup - expect).abs() < 1e-3, "m={m} sup={} expect={expect}", r.sup);
        }
        let g = WedgeGrid::from_index(3, 0, 33, 33).unwrap();
        assert!(rescaled_trace_diagnostic(&vec![0.0; g.len()], &g, 5.0, 4).is_err());
    }

    #[test]
    fn extrapolation_cancels_quadratic_error() {
        let rec = |n: usize, s: f64| LevelRecord {
            nx: n,
            nphi: n,
            lo_index: 0,
            hi_index: 1,
            sigma_lo: 0.0,
            sigma_hi: 0.0,
            c_lo: 1.0,
            c_hi: -1.0,
            mu_lo: 0.0,
            mu_hi: 0.0,
            sigma_root: s,
            mu_root: s,
            evaluations: 0,
        };
        let h = 0.01f64;
        let (s, _) = extrapolate(&[rec(65, 0.4 + h * h), rec(129, 0.4 + h * h / 4.0)]);
        assert!((s - 0.4).abs() < 1e-15);
    }
}
