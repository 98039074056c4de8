//! One function per subcommand. Each writes its artifacts into the output
//! directory and returns an error only after diagnostics are on disk.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use thinobs_core::construct::{BuildOptions, SolutionBundle};
use thinobs_core::continuation::{
    find_roots, scan_c, trend_report, uniform_sigmas, Evaluator, Resolution, RootResult, ScanEntry,
    SCAN_POINTS,
};
use thinobs_core::gaps::{verify_gap_tol, GapReport};
use thinobs_core::legendre::{self, solve_p_on};
use thinobs_core::variant::{variant_bisect, DEFAULT_CAP_RATIO};

use crate::config::{pick, require, Common, RunConfig};
use crate::error::{usage, CliError, CliResult};
use crate::figures;
use crate::record::{Kind, ResultRecord};
use crate::store::DiskStore;
use crate::table::{fmt, Table};

#[derive(Debug, Parser)]
#[command(name = "thinobs", version, about = "Homogeneous thin obstacle solutions on slit wedges")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate and plot the profiles p_mu.
    Legendre(LegendreArgs),
    /// Build one solution bundle and its figures.
    Solve(SolveArgs),
    /// Evaluate c on a uniform slit-fraction grid.
    Scan(MkArgs),
    /// Locate every root of c with mesh refinement.
    Bisect(MkArgs),
    /// Sweep p(0) p'(0) over the gap intervals.
    Gaps(GapsArgs),
    /// Root search with the k-th eigenfunction.
    Variant(VariantArgs),
    /// Roots along a list of m.
    Trend(TrendArgs),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Legendre(a) => &a.common,
            Command::Solve(a) => &a.common,
            Command::Scan(a) | Command::Bisect(a) => &a.common,
            Command::Gaps(a) => &a.common,
            Command::Variant(a) => &a.common,
            Command::Trend(a) => &a.common,
        }
    }
}

#[derive(Debug, Args)]
pub struct LegendreArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated frequencies.
    #[arg(long, value_delimiter = ',')]
    pub mu: Vec<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Output points on [0, pi/2].
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MkArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Scan points on [0, 1].
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GapsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VariantArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub cap_ratio: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrendArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated list of m.
    #[arg(long, value_delimiter = ',')]
    pub m_list: Vec<usize>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = RunConfig::resolve(cli.command.common())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Output(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Legendre(a) => cmd_legendre(&cfg, a),
        Command::Solve(a) => cmd_solve(&cfg, a),
        Command::Scan(a) => cmd_scan(&cfg, a),
        Command::Bisect(a) => cmd_bisect(&cfg, a),
        Command::Gaps(a) => cmd_gaps(&cfg, a),
        Command::Variant(a) => cmd_variant(&cfg, a),
        Command::Trend(a) => cmd_trend(&cfg, a),
    })
}

fn list_or_file<T>(flag: &[T], cfg: &RunConfig, key: &str) -> CliResult<Option<Vec<T>>>
where
    T: serde::de::DeserializeOwned + Clone,
{
    if !flag.is_empty() {
        return Ok(Some(flag.to_vec()));
    }
    cfg.file.get(key)
}

fn evaluator(cfg: &RunConfig) -> CliResult<Evaluator> {
    let opts = BuildOptions {
        eigen_tol: cfg.tol.unwrap_or(thinobs_core::construct::DEFAULT_EIGEN_TOL),
        ..BuildOptions::default()
    };
    Ok(match &cfg.cache {
        Some(dir) => Evaluator::with_store(opts, Arc::new(DiskStore::open(dir)?)),
        None => Evaluator::new(opts),
    })
}

fn chain(res: Resolution, levels: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(levels);
    let mut r = res;
    for _ in 0..levels {
        out.push((r.nx, r.nphi));
        r = r.refined();
    }
    out
}

/// Writes a failure record and hands the error back.
fn fail<E: Into<CliError>>(cfg: &RunConfig, name: &str, kind: Kind, key: &str, extra: serde_json::Value, err: E) -> CliError {
    let err = err.into();
    let payload = json!({ "error": err.to_string(), "context": extra });
    match ResultRecord::new(kind, key, &payload, vec![(cfg.resolution.nx, cfg.resolution.nphi)]) {
        Ok(r) => {
            if let Err(e) = r.write(&cfg.path(name)) {
                log::error!("diagnostic record not written: {e}");
            }
        }
        Err(e) => log::error!("diagnostic record not built: {e}"),
    }
    err
}

pub fn cmd_legendre(cfg: &RunConfig, a: &LegendreArgs) -> CliResult<()> {
    let mus: Vec<f64> = list_or_file(&a.mu, cfg, "mu")?.unwrap_or_default();
    if mus.is_empty() {
        return Err(usage("legendre needs at least one --mu value"));
    }
    let n: usize = pick(a.n, &cfg.file, "n", 3)?;
    let points: usize = pick(a.points, &cfg.file, "points", 201)?;
    if points < 2 {
        return Err(usage("--points must be at least 2"));
    }
    let tol = cfg.tol.unwrap_or(legendre::DEFAULT_TOL);
    let nodes: Vec<f64> = (0..points)
        .map(|i| FRAC_PI_2 * i as f64 / (points - 1) as f64)
        .collect();

    let mut table = Table::new(&["mu", "phi", "p", "dp"]);
    let mut summary = Vec::new();
    for &mu in &mus {
        let e = solve_p_on(mu, n, tol, &nodes)?;
        for (j, &phi) in e.phi_nodes.iter().enumerate() {
            table.push(vec![fmt(mu), fmt(phi), fmt(e.p_values[j]), fmt(e.dp_values[j])]);
        }
        summary.push(json!({
            "mu": mu, "n": n, "lambda": e.lambda, "p0": e.p0, "dp0": e.dp0,
            "signs": e.signs(), "p_sup": e.p_sup, "dp_sup": e.dp_sup,
        }));
    }
    let csv = cfg.path("legendre.csv");
    table.write(&csv)?;
    figures::legendre_overlay(&csv, &cfg.path("legendre.svg"))?;
    let key = format!("legendre;n={n};mu={mus:?};points={points};tol={tol:e}");
    ResultRecord::new(Kind::Legendre, key, &summary, vec![])?.write(&cfg.path("legendre.json"))
}

fn bundle_payload(b: &SolutionBundle) -> serde_json::Value {
    json!({
        "m": b.m, "k": b.k, "sigma": b.sigma, "slit_end": b.slit_end,
        "nx": b.nx, "nphi": b.nphi,
        "lambda": b.lambda, "mu": b.mu, "mu_legendre": b.mu_legendre,
        "eigen_residual": b.eigen_residual, "clustered": b.clustered, "nodal_ok": b.nodal_ok,
        "p0": b.p0, "dp0": b.dp0, "i1": b.i1, "i2": b.i2,
        "c_quantity": b.c_quantity, "c_parts": b.c_parts,
        "c_quantity_stencil": b.c_quantity_stencil, "c_scale": b.c_scale,
        "c_sign": b.c_sign, "dual_gap": b.dual_gap(), "pole_pairing": b.pole_pairing,
        "h0": b.h.h0, "dh0": b.h.dh0, "growth_ratio": b.h.growth_ratio,
        "sign_report": b.sign_report,
    })
}

pub fn cmd_solve(cfg: &RunConfig, a: &SolveArgs) -> CliResult<()> {
    let m: usize = require(a.m, &cfg.file, "m")?;
    let sigma: f64 = require(a.sigma, &cfg.file, "sigma")?;
    let k: usize = pick(a.k, &cfg.file, "k", 1)?;
    if !(0.0..=1.0).contains(&sigma) {
        return Err(usage("--sigma must lie in [0, 1]"));
    }
    let res = cfg.resolution;
    let se = res.snap(sigma);
    let key = format!("solve;m={m};k={k};slit={se};nx={};nphi={}", res.nx, res.nphi);
    let ev = evaluator(cfg)?;
    let b = ev
        .bundle(m, k, se, res)
        .map_err(|e| fail(cfg, "bundle.json", Kind::Bundle, &key, json!({"m": m, "k": k, "sigma": sigma}), e))?;

    let mut eq = Table::new(&["s", "v", "dv", "u", "uphi"]);
    for i in 0..b.trace.s_nodes.len() {
        eq.push(vec![
            fmt(b.trace.s_nodes[i]),
            fmt(b.trace.v_eq[i]),
            fmt(b.trace.dv_eq[i]),
            fmt(b.u_eq[i]),
            fmt(b.uphi_eq[i]),
        ]);
    }
    eq.write(&cfg.path("equator.csv"))?;

    let dx = PI / (b.nx - 1) as f64;
    let dphi = FRAC_PI_2 / (b.nphi - 1) as f64;
    let mut vt = Table::new(&["x", "phi", "value"]);
    for i in 0..b.nx {
        for j in 0..b.nphi {
            vt.push(vec![fmt(i as f64 * dx), fmt(j as f64 * dphi), fmt(b.v[i * b.nphi + j])]);
        }
    }
    let mut ut = Table::new(&["x", "phi", "value"]);
    for i in 0..b.nx {
        for j in 0..b.u_rows {
            ut.push(vec![fmt(i as f64 * dx), fmt(j as f64 * dphi), fmt(b.u[i * b.u_rows + j])]);
        }
    }
    let mut ht = Table::new(&["phi", "h", "dh"]);
    for j in 0..b.h.phi_nodes.len() {
        ht.push(vec![fmt(b.h.phi_nodes[j]), fmt(b.h.h_values[j]), fmt(b.h.dh_values[j])]);
    }
    for (t, name, title) in [(&vt, "v", "v"), (&ut, "u", "u")] {
        let csv = cfg.path(&format!("{name}_grid.csv"));
        t.write(&csv)?;
        figures::wedge_heatmap(&csv, &cfg.path(&format!("{name}.svg")), m, title)?;
    }
    let hcsv = cfg.path("h.csv");
    ht.write(&hcsv)?;
    figures::profile(&hcsv, &cfg.path("h.svg"), &format!("h, m = {m}, sigma = {:.4}", b.sigma))?;
    ResultRecord::new(Kind::Bundle, key, &bundle_payload(&b), vec![(res.nx, res.nphi)])?
        .write(&cfg.path("bundle.json"))
}

fn scan_table(scan: &[ScanEntry]) -> Table {
    let mut t = Table::new(&[
        "sigma_requested", "slit_end", "sigma", "mu", "c", "c_parts", "c_scale", "c_sign",
        "nodal_ok", "sign_ok", "error",
    ]);
    for e in scan {
        match &e.result {
            Ok(s) => t.push(vec![
                fmt(e.sigma_requested),
                e.slit_end.to_string(),
                fmt(s.sigma),
                fmt(s.mu),
                fmt(s.c),
                fmt(s.c_parts),
                fmt(s.c_scale),
                s.c_sign.to_string(),
                s.nodal_ok.to_string(),
                s.sign_ok.to_string(),
                String::new(),
            ]),
            Err(msg) => {
                let mut row = vec![fmt(e.sigma_requested), e.slit_end.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 8));
                row.push(msg.clone());
                t.push(row);
            }
        }
    }
    t
}

pub fn cmd_scan(cfg: &RunConfig, a: &MkArgs) -> CliResult<()> {
    let m: usize = require(a.m, &cfg.file, "m")?;
    let k: usize = pick(a.k, &cfg.file, "k", 1)?;
    let points: usize = pick(a.points, &cfg.file, "points", SCAN_POINTS)?;
    if points < 2 {
        return Err(usage("--points must be at least 2"));
    }
    let res = cfg.resolution;
    let key = format!("scan;m={m};k={k};points={points};nx={};nphi={}", res.nx, res.nphi);
    let ev = evaluator(cfg)?;
    let scan = scan_c(&ev, m, k, &uniform_sigmas(points), res)
        .map_err(|e| fail(cfg, "scan.json", Kind::Bundle, &key, json!({"m": m, "k": k}), e))?;
    scan_table(&scan).write(&cfg.path("scan.csv"))?;
    ResultRecord::new(Kind::Bundle, key, &scan, vec![(res.nx, res.nphi)])?.write(&cfg.path("scan.json"))
}

#[derive(Serialize)]
struct RootPayload<'a> {
    scan: &'a [ScanEntry],
    roots: &'a [RootResult],
}

/// `2m` sectors of half-width `sigma pi / m` centered at `j pi / m`.
pub fn contact_table(m: usize, sigma: f64) -> Table {
    let mut t = Table::new(&["sector", "theta_center", "half_width", "m", "sigma"]);
    let w = sigma * PI / m as f64;
    for j in 0..2 * m {
        t.push(vec![
            j.to_string(),
            fmt(j as f64 * PI / m as f64),
            fmt(w),
            m.to_string(),
            fmt(sigma),
        ]);
    }
    t
}

pub fn cmd_bisect(cfg: &RunConfig, a: &MkArgs) -> CliResult<()> {
    let m: usize = require(a.m, &cfg.file, "m")?;
    let k: usize = pick(a.k, &cfg.file, "k", 1)?;
    let res = cfg.resolution;
    let key = format!("bisect;m={m};k={k};levels={};nx={};nphi={}", cfg.levels, res.nx, res.nphi);
    let ev = evaluator(cfg)?;
    let ctx = json!({"m": m, "k": k, "levels": cfg.levels});
    let (scan, roots) = find_roots(&ev, m, k, cfg.levels, res)
        .map_err(|e| fail(cfg, "root.json", Kind::Root, &key, ctx.clone(), e))?;
    scan_table(&scan).write(&cfg.path("scan.csv"))?;
    let rec = ResultRecord::new(
        Kind::Root,
        key,
        &RootPayload { scan: &scan, roots: &roots },
        chain(res, cfg.levels),
    )?;
    rec.write(&cfg.path("root.json"))?;
    let Some(r) = roots.first() else {
        return Err(CliError::Verdict(format!("no sign change of c found for m = {m}, k = {k}")));
    };
    let csv = cfg.path("contact.csv");
    contact_table(m, r.extrapolated_sigma).write(&csv)?;
    figures::contact_set(&csv, &cfg.path("contact.svg"))
}

pub fn cmd_gaps(cfg: &RunConfig, a: &GapsArgs) -> CliResult<()> {
    let ns: Vec<usize> = list_or_file(&a.n, cfg, "n")?.unwrap_or_else(|| vec![2, 3, 4, 5]);
    if ns.is_empty() {
        return Err(usage("gaps needs at least one --n value"));
    }
    let k_max: usize = pick(a.k_max, &cfg.file, "k_max", 9)?;
    let samples: usize = pick(a.samples, &cfg.file, "samples", 33)?;
    let tol = cfg.tol.unwrap_or(legendre::DEFAULT_TOL);
    let key = format!("gaps;n={ns:?};k_max={k_max};samples={samples};tol={tol:e}");
    let reports = ns
        .iter()
        .map(|&n| verify_gap_tol(n, k_max, samples, tol))
        .collect::<Result<Vec<GapReport>, _>>()
        .map_err(|e| fail(cfg, "gaps.json", Kind::Gap, &key, json!({"n": ns}), e))?;
    for r in &reports {
        let mut t = Table::new(&["k", "samples", "min_product", "worst_mu", "min_relative", "sign_law_ok"]);
        for row in &r.rows {
            t.push(vec![
                row.k.to_string(),
                row.samples.to_string(),
                fmt(row.min_product),
                fmt(row.worst_mu),
                fmt(row.min_relative),
                row.sign_law_ok.to_string(),
            ]);
        }
        t.write(&cfg.path(&format!("gaps_n{}.csv", r.n)))?;
    }
    ResultRecord::new(Kind::Gap, key, &reports, vec![])?.write(&cfg.path("gaps.json"))?;
    let failed: Vec<usize> = reports.iter().filter(|r| !r.verdict).map(|r| r.n).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verdict(format!("gap verdict false for n = {failed:?}")))
    }
}

pub fn cmd_variant(cfg: &RunConfig, a: &VariantArgs) -> CliResult<()> {
    let m: usize = require(a.m, &cfg.file, "m")?;
    let k: usize = pick(a.k, &cfg.file, "k", 2)?;
    let cap: f64 = pick(a.cap_ratio, &cfg.file, "cap_ratio", DEFAULT_CAP_RATIO)?;
    let res = cfg.resolution;
    let key = format!("variant;m={m};k={k};levels={};nx={};nphi={}", cfg.levels, res.nx, res.nphi);
    let ev = evaluator(cfg)?;
    let ctx = json!({"m": m, "k": k, "cap_ratio": cap});
    let v = variant_bisect(&ev, m, k, cfg.levels, res, cap)
        .map_err(|e| fail(cfg, "variant.json", Kind::Variant, &key, ctx, e))?;
    ResultRecord::new(Kind::Variant, key, &v, chain(res, cfg.levels))?.write(&cfg.path("variant.json"))?;
    if v.inconclusive {
        return Err(CliError::Verdict(format!(
            "clustered eigenvalue met for m = {m}, k = {k}; run is inconclusive"
        )));
    }
    Ok(())
}

pub fn cmd_trend(cfg: &RunConfig, a: &TrendArgs) -> CliResult<()> {
    let ms: Vec<usize> = list_or_file(&a.m_list, cfg, "m_list")?.unwrap_or_else(|| vec![3, 5, 9, 15]);
    if ms.is_empty() {
        return Err(usage("trend needs at least one m"));
    }
    let res = cfg.resolution;
    let key = format!("trend;m={ms:?};levels={};nx={};nphi={}", cfg.levels, res.nx, res.nphi);
    let ev = evaluator(cfg)?;
    let rep = trend_report(&ev, &ms, cfg.levels, res)
        .map_err(|e| fail(cfg, "trend.json", Kind::Trend, &key, json!({"m_list": ms}), e))?;
    let mut t = Table::new(&["m", "sigma", "mu", "gap", "rescaled_sup", "roots_found"]);
    for r in &rep.rows {
        t.push(vec![
            r.m.to_string(),
            fmt(r.sigma),
            fmt(r.mu),
            fmt(r.gap),
            fmt(r.rescaled_sup),
            r.roots_found.to_string(),
        ]);
    }
    t.write(&cfg.path("trend.csv"))?;
    ResultRecord::new(Kind::Trend, key, &rep, chain(res, cfg.levels))?.write(&cfg.path("trend.json"))
}
