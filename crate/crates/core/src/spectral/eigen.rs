use serde::{Deserialize, Serialize};

use super::cg::PcgShiftedSolver;
use super::fast::{slit_free_ground, FastShiftedSolver};
use super::grid::WedgeGrid;
use super::operator::SparseOperator;
use super::ShiftedSolve;
use crate::error::{invalid, Error, Result};

/// Desk-scale cap on the eigenvalue index.
pub const MAX_K: usize = 12;
/// Shift used by inverse iteration, as a fraction of the slit-free ground level.
pub const SHIFT_FRACTION: f64 = 0.95;
/// Relative eigenvalue gap below which neighbours count as a cluster.
pub const CLUSTER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    /// Sine transform plus slit capacitance.
    #[default]
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    Pcg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub inner: InnerSolver,
}

impl EigenOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            max_iter: 2000,
            inner: InnerSolver::Direct,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EigenPair {
    pub k: usize,
    pub lambda: f64,
    pub mu: f64,
    /// Eigenfunction on the whole grid (zero on Dirichlet nodes), oriented
    /// nonnegative in the band `phi <= 1/m` and scaled to `max v = 1`.
    pub v: Vec<f64>,
    /// `||A v - lambda B v|| / (lambda ||B v||)`.
    pub residual: f64,
    pub iterations: usize,
    /// Set when the eigenvalue sits within `CLUSTER_TOL` of its predecessor.
    pub clustered: bool,
}

pub fn mu_from_lambda(lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(invalid(format!("lambda must be nonnegative, got {lambda}")));
    }
    Ok(0.5 * ((1.0 + 4.0 * lambda).sqrt() - 1.0))
}

fn b_dot(op: &SparseOperator, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(&op.mass)
        .map(|((x, y), m)| x * y * m)
        .sum()
}

fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Deterministic starting vector: ones with a mild ramp in `x`, so that no
/// reflection symmetry of the wedge hides part of the spectrum.
fn seed(op: &SparseOperator) -> Vec<f64> {
    let g = &op.grid;
    op.active
        .iter()
        .map(|&f| 1.0 + 0.25 * (f / g.nphi) as f64 / (g.nx - 1) as f64)
        .collect()
}

fn inverse_iteration(
    op: &SparseOperator,
    solver: &dyn ShiftedSolve,
    previous: &[Vec<f64>],
    opts: &EigenOptions,
) -> Result<(f64, Vec<f64>, f64, usize)> {
    let n = op.dim();
    let deflate = |y: &mut Vec<f64>| {
        for q in previous {
            let c = b_dot(op, q, y);
            for (yi, qi) in y.iter_mut().zip(q) {
                *yi -= c * qi;
            }
        }
    };
    let mut x = seed(op);
    deflate(&mut x);
    let mut ax = vec![0.0; n];
    let mut last_res = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let bx: Vec<f64> = x.iter().zip(&op.mass).map(|(a, b)| a * b).collect();
        let mut y = solver.solve(&bx)?;
        deflate(&mut y);
        let nb = b_dot(op, &y, &y).sqrt();
        if !(nb > 0.0) {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: f64::NAN,
            });
        }
        y.iter_mut().for_each(|v| *v /= nb);
        op.apply(&y, &mut ax);
        let lambda: f64 = y.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let by: Vec<f64> = y.iter().zip(&op.mass).map(|(a, b)| a * b).collect();
        let r: Vec<f64> = ax.iter().zip(&by).map(|(a, b)| a - lambda * b).collect();
        let res = norm2(&r) / (lambda.abs() * norm2(&by));
        last_res = res;
        if res <= opts.tol {
            return Ok((lambda, y, res, it));
        }
        x = y;
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: last_res,
    })
}

/// Flips `v` so it is nonnegative on average in the band `phi <= 1/m`, then
/// scales it so that `max v = 1`.
fn orient_and_normalize(grid: &WedgeGrid, v: &mut [f64]) {
    let band = 1.0 / grid.m as f64;
    let mut s = 0.0;
    for i in 0..grid.nx {
        for j in 0..grid.nphi {
            if grid.phi(j) <= band {
                s += v[grid.index(i, j)];
            }
        }
    }
    if s < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max > 0.0 {
        v.iter_mut().for_each(|x| *x /= max);
    }
}

/// Computes the eigenpairs `1..=k` in nondecreasing order by deflated
/// inverse iteration.
pub fn eigenpairs(op: &SparseOperator, k: usize, opts: &EigenOptions) -> Result<Vec<EigenPair>> {
    if k == 0 || k > MAX_K {
        return Err(invalid(format!("k must lie in 1..={MAX_K}, got {k}")));
    }
    if !(opts.tol > 0.0 && opts.tol <= 1e-6) {
        return Err(invalid(format!(
            "eigensolver tolerance must lie in (0, 1e-6], got {}",
            opts.tol
        )));
    }
    if op.dim() == 0 {
        return Err(invalid("no active nodes"));
    }
    let shift = SHIFT_FRACTION * slit_free_ground(op);
    let fast;
    let pcg;
    let solver: &dyn ShiftedSolve = match opts.inner {
        InnerSolver::Direct => {
            fast = FastShiftedSolver::new(op, shift)?;
            &fast
        }
        InnerSolver::Pcg => {
            pcg = PcgShiftedSolver::new(op, shift)?;
            &pcg
        }
    };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(k);
    for idx in 1..=k {
        let (lambda, y, residual, iterations) = inverse_iteration(op, solver, &basis, opts)?;
        let mut clustered = false;
        if let Some(prev) = pairs.last() {
            if (lambda - prev.lambda).abs() <= CLUSTER_TOL * lambda {
                log::warn!(
                    "eigenvalues {} and {idx} are nearly degenerate ({} vs {lambda})",
                    idx - 1,
                    prev.lambda
                );
                clustered = true;
            }
        }
        let mut v = op.scatter(&y);
        orient_and_normalize(&op.grid, &mut v);
        basis.push(y);
        pairs.push(EigenPair {
            k: idx,
            lambda,
            mu: mu_from_lambda(lambda)?,
            v,
            residual,
            iterations,
            clustered,
        });
    }
    // inverse iteration with a fixed shift finds them in order; sort to be safe
    pairs.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap());
    for (i, p) in pairs.iter_mut().enumerate() {
        p.k = i + 1;
    }
    Ok(pairs)
}

pub fn lowest_eigenpair(op: &SparseOperator, tol: f64) -> Result<EigenPair> {
    Ok(eigenpairs(op, 1, &EigenOptions::new(tol))?.remove(0))
}

pub fn kth_eigenpair(op: &SparseOperator, k: usize, tol: f64) -> Result<EigenPair> {
    Ok(eigenpairs(op, k, &EigenOptions::new(tol))?.remove(k - 1))
}

/// True iff `v` keeps one sign on the nodes with `phi <= 1/m`; values below
/// `1e-9 max|v|` count as zero.
pub fn nodal_sign_check(pair: &EigenPair, grid: &WedgeGrid) -> bool {
    let band = 1.0 / grid.m as f64;
    let scale = pair.v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let floor = 1e-9 * scale;
    let (mut pos, mut neg) = (false, false);
    for i in 0..grid.nx {
        for j in 0..grid.nphi {
            if grid.phi(j) > band {
                continue;
            }
            let x = pair.v[grid.index(i, j)];
            if x > floor {
                pos = true;
            } else if x < -floor {
                neg = true;
            }
        }
    }
    !(pos && neg)
}
