//! Direct solver for `(A - s B) u = f` on the slit wedge.
//!
//! Without the slit the operator separates: a sine transform in `x`
//! diagonalizes the side-Dirichlet second difference, leaving one
//! tridiagonal system in `phi` per mode. The slit nodes are put back through
//! a capacitance (Schur complement) system on the slit, factored once per
//! shift.

use nalgebra::{Cholesky, DMatrix, Dyn};

use super::operator::{mass, phi_edge, x_edge, SparseOperator};
use super::ShiftedSolve;
use crate::error::{Error, Result};

pub struct FastShiftedSolver {
    /// Number of interior x-nodes (also the number of sine modes).
    ni: usize,
    /// Number of non-pole rows.
    nj: usize,
    sine: DMatrix<f64>,
    scale: f64,
    /// Off-diagonal of every mode's tridiagonal (mode independent).
    off: Vec<f64>,
    /// Elimination multipliers and pivots, mode-major.
    mult: Vec<f64>,
    piv: Vec<f64>,
    /// Columns `T_k^{-1} e_0`, one row per mode.
    z: DMatrix<f64>,
    /// Interior x-indices (0-based among interior nodes) on the slit.
    slit: Vec<usize>,
    cap: Option<Cholesky<f64, Dyn>>,
    /// Position of each active node in the `(ni, nj)` layout.
    layout: Vec<(usize, usize)>,
    pub shift: f64,
}

/// Tridiagonal data of one `phi` problem for sine mode `k` (1-based).
fn mode_diag(op: &SparseOperator, kappa: f64, shift: f64, out: &mut [f64]) {
    let g = &op.grid;
    let nj = g.nphi - 1;
    for (j, o) in out.iter_mut().enumerate().take(nj) {
        let below = if j > 0 { phi_edge(g, j - 1) } else { 0.0 };
        *o = x_edge(g, j) * kappa + below + phi_edge(g, j) - shift * mass(g, 1, j);
    }
}

fn kappa(k: usize, nx: usize) -> f64 {
    2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (nx - 1) as f64).cos()
}

/// Number of eigenvalues below `lambda` of the slit-free mode-`k` pencil,
/// by counting negative pivots.
fn sturm_count(op: &SparseOperator, k: usize, lambda: f64) -> usize {
    let g = &op.grid;
    let nj = g.nphi - 1;
    let mut d = vec![0.0; nj];
    mode_diag(op, kappa(k, g.nx), lambda, &mut d);
    let mut count = 0;
    let mut p = d[0];
    if p < 0.0 {
        count += 1;
    }
    for j in 1..nj {
        let e = -phi_edge(g, j - 1);
        let pp = if p == 0.0 { f64::EPSILON } else { p };
        p = d[j] - e * e / pp;
        if p < 0.0 {
            count += 1;
        }
    }
    count
}

/// Lowest eigenvalue of the discrete problem with the slit removed
/// (Neumann along the whole equator). Every slit configuration lies above it.
pub fn slit_free_ground(op: &SparseOperator) -> f64 {
    let mut hi = 1.0;
    while sturm_count(op, 1, hi) == 0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(op, 1, mid) == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

impl FastShiftedSolver {
    pub fn new(op: &SparseOperator, shift: f64) -> Result<Self> {
        let g = &op.grid;
        let ni = g.nx - 2;
        let nj = g.nphi - 1;
        let h = std::f64::consts::PI / (g.nx - 1) as f64;
        let sine = DMatrix::from_fn(ni, ni, |a, b| (((a + 1) * (b + 1)) as f64 * h).sin());
        let scale = 2.0 / (g.nx - 1) as f64;

        let off: Vec<f64> = (0..nj.saturating_sub(1)).map(|j| -phi_edge(g, j)).collect();
        let mut mult = vec![0.0; ni * nj];
        let mut piv = vec![0.0; ni * nj];
        let mut d = vec![0.0; nj];
        for k in 0..ni {
            mode_diag(op, kappa(k + 1, g.nx), shift, &mut d);
            let base = k * nj;
            piv[base] = d[0];
            for j in 1..nj {
                let l = off[j - 1] / piv[base + j - 1];
                mult[base + j] = l;
                piv[base + j] = d[j] - l * off[j - 1];
            }
            if let Some(p) = piv[base..base + nj].iter().find(|p| !(**p > 0.0)) {
                return Err(Error::LinearSolver(format!(
                    "nonpositive pivot {p:e} in mode {} at shift {shift}",
                    k + 1
                )));
            }
        }
        let mut solver = Self {
            ni,
            nj,
            sine,
            scale,
            off,
            mult,
            piv,
            z: DMatrix::zeros(ni, nj),
            slit: op.grid.slit_interior().map(|i| i - 1).collect(),
            cap: None,
            layout: op
                .active
                .iter()
                .map(|&f| (f / g.nphi - 1, f % g.nphi))
                .collect(),
            shift,
        };
        let mut e0 = vec![0.0; nj];
        for k in 0..ni {
            e0.iter_mut().for_each(|v| *v = 0.0);
            e0[0] = 1.0;
            solver.thomas(k, &mut e0);
            for j in 0..nj {
                solver.z[(k, j)] = e0[j];
            }
        }
        if !solver.slit.is_empty() {
            let ns = solver.slit.len();
            let mut cap = DMatrix::zeros(ns, ns);
            for (a, &ia) in solver.slit.iter().enumerate() {
                for (b, &ib) in solver.slit.iter().enumerate().skip(a) {
                    let mut acc = 0.0;
                    for k in 0..ni {
                        acc += solver.sine[(ia, k)] * solver.sine[(ib, k)] * solver.z[(k, 0)];
                    }
                    cap[(a, b)] = scale * acc;
                    cap[(b, a)] = scale * acc;
                }
            }
            solver.cap = Some(Cholesky::new(cap).ok_or_else(|| {
                Error::LinearSolver("capacitance matrix is not positive definite".into())
            })?);
        }
        Ok(solver)
    }

    fn thomas(&self, k: usize, rhs: &mut [f64]) {
        let base = k * self.nj;
        for j in 1..self.nj {
            rhs[j] -= self.mult[base + j] * rhs[j - 1];
        }
        let last = self.nj - 1;
        rhs[last] /= self.piv[base + last];
        for j in (0..last).rev() {
            rhs[j] = (rhs[j] - self.off[j] * rhs[j + 1]) / self.piv[base + j];
        }
    }
}

impl ShiftedSolve for FastShiftedSolver {
    fn shift(&self) -> f64 {
        self.shift
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut f = DMatrix::zeros(self.ni, self.nj);
        for (s, &(i, j)) in self.layout.iter().enumerate() {
            f[(i, j)] = rhs[s];
        }
        let mut fh = &self.sine * f;
        let mut row = vec![0.0; self.nj];
        for k in 0..self.ni {
            for j in 0..self.nj {
                row[j] = fh[(k, j)];
            }
            self.thomas(k, &mut row);
            for j in 0..self.nj {
                fh[(k, j)] = row[j];
            }
        }
        if let Some(cap) = &self.cap {
            let ns = self.slit.len();
            let mut w = nalgebra::DVector::zeros(ns);
            for (a, &ia) in self.slit.iter().enumerate() {
                let mut acc = 0.0;
                for k in 0..self.ni {
                    acc += self.sine[(ia, k)] * fh[(k, 0)];
                }
                w[a] = -self.scale * acc;
            }
            let xi = cap.solve(&w);
            for k in 0..self.ni {
                let mut ck = 0.0;
                for (a, &ia) in self.slit.iter().enumerate() {
                    ck += self.sine[(ia, k)] * xi[a];
                }
                for j in 0..self.nj {
                    fh[(k, j)] += ck * self.z[(k, j)];
                }
            }
        }
        let u = (&self.sine * fh) * self.scale;
        let out: Vec<f64> = self.layout.iter().map(|&(i, j)| u[(i, j)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolver("non-finite solution".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::grid::WedgeGrid;

    fn check_residual(m: usize, sigma: f64, n: usize, nphi: usize) {
        let g = WedgeGrid::new(m, sigma, n, nphi).unwrap();
        let op = SparseOperator::assemble(&g);
        let shift = 0.9 * slit_free_ground(&op);
        let solver = FastShiftedSolver::new(&op, shift).unwrap();
        let b: Vec<f64> = (0..op.dim()).map(|k| ((k * 37) % 11) as f64 - 5.0).collect();
        let x = solver.solve(&b).unwrap();
        let mut ax = vec![0.0; x.len()];
        op.apply(&x, &mut ax);
        let res: f64 = ax
            .iter()
            .zip(&x)
            .zip(&op.mass)
            .zip(&b)
            .map(|(((a, x), m), b)| (a - shift * m * x - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res < 1e-9 * nb, "m={m} sigma={sigma} res={res:e}");
    }

    #[test]
    fn solves_the_assembled_system() {
        check_residual(3, 0.0, 17, 21);
        check_residual(3, 0.4, 33, 17);
        check_residual(5, 1.0, 17, 17);
        check_residual(15, 0.33, 41, 33);
    }

    #[test]
    fn ground_level_matches_closed_form_limit() {
        let g = WedgeGrid::new(3, 0.0, 129, 129).unwrap();
        let op = SparseOperator::assemble(&g);
        assert!((slit_free_ground(&op) - 12.0).abs() < 1e-2);
    }
}
