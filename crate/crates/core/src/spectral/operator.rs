use nalgebra_sparse::{CooMatrix, CsrMatrix};

use super::grid::WedgeGrid;

/// Weighted spherical Laplacian in divergence form on a [`WedgeGrid`].
///
/// Entries come from the weak form
/// `int (m^2 / cos phi) v_x w_x + cos phi v_phi w_phi` (divided by `m`, the
/// Jacobian of `x = m theta`), so the matrix is symmetric and annihilates
/// constants before the Dirichlet rows are removed. The equator row carries
/// half weight, which is the even reflection across `phi = 0`.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub grid: WedgeGrid,
    /// Stiffness on every grid node, boundary conditions not applied.
    pub a_full: CsrMatrix<f64>,
    pub mass_full: Vec<f64>,
    /// Flat grid index of each active node, increasing.
    pub active: Vec<usize>,
    /// Active slot of each grid node, `usize::MAX` on Dirichlet nodes.
    pub slot: Vec<usize>,
    /// Restriction of `a_full` to the active nodes.
    pub a: CsrMatrix<f64>,
    pub mass: Vec<f64>,
}

impl SparseOperator {
    pub fn assemble(grid: &WedgeGrid) -> Self {
        let g = grid;
        let n = g.len();
        let mut diag = vec![0.0; n];
        let mut coo = CooMatrix::new(n, n);
        for j in 0..g.nphi - 1 {
            let c = x_edge(g, j);
            for i in 0..g.nx - 1 {
                let (a, b) = (g.index(i, j), g.index(i + 1, j));
                coo.push(a, b, -c);
                coo.push(b, a, -c);
                diag[a] += c;
                diag[b] += c;
            }
        }
        for j in 0..g.nphi - 1 {
            let d = phi_edge(g, j);
            for i in 0..g.nx {
                let c = d * side_weight(g, i);
                let (a, b) = (g.index(i, j), g.index(i, j + 1));
                coo.push(a, b, -c);
                coo.push(b, a, -c);
                diag[a] += c;
                diag[b] += c;
            }
        }
        for (k, d) in diag.iter().enumerate() {
            coo.push(k, k, *d);
        }
        let a_full = CsrMatrix::from(&coo);

        let mut mass_full = vec![0.0; n];
        for i in 0..g.nx {
            for j in 0..g.nphi {
                mass_full[g.index(i, j)] = mass(g, i, j);
            }
        }

        let mut slot = vec![usize::MAX; n];
        let mut active = Vec::new();
        for i in 0..g.nx {
            for j in 0..g.nphi {
                if !g.is_dirichlet(i, j) {
                    slot[g.index(i, j)] = active.len();
                    active.push(g.index(i, j));
                }
            }
        }
        let mut coo_a = CooMatrix::new(active.len(), active.len());
        for (r, &full_r) in active.iter().enumerate() {
            let row = a_full.row(full_r);
            for (&col, &val) in row.col_indices().iter().zip(row.values()) {
                let s = slot[col];
                if s != usize::MAX {
                    coo_a.push(r, s, val);
                }
            }
        }
        let a = CsrMatrix::from(&coo_a);
        let mass = active.iter().map(|&k| mass_full[k]).collect();
        Self {
            grid: g.clone(),
            a_full,
            mass_full,
            active,
            slot,
            a,
            mass,
        }
    }

    pub fn dim(&self) -> usize {
        self.active.len()
    }

    /// `y = A x` on the active nodes.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        csr_mul(&self.a, x, y);
    }

    /// `A_full x` on the whole grid.
    pub fn apply_full(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        csr_mul(&self.a_full, x, &mut y);
        y
    }

    /// Extends an active vector by zero to the whole grid.
    pub fn scatter(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (s, &k) in self.active.iter().enumerate() {
            out[k] = v[s];
        }
        out
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.active.iter().map(|&k| full[k]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim()];
        for (r, dr) in d.iter_mut().enumerate() {
            let row = self.a.row(r);
            for (&c, &v) in row.col_indices().iter().zip(row.values()) {
                if c == r {
                    *dr += v;
                }
            }
        }
        d
    }

    /// Largest `|A_ij - A_ji|` of the full matrix.
    pub fn asymmetry(&self) -> f64 {
        let t = self.a_full.transpose();
        let mut worst: f64 = 0.0;
        for r in 0..self.a_full.nrows() {
            let x = self.a_full.row(r);
            let y = t.row(r);
            for (c, v) in x.col_indices().iter().zip(x.values()) {
                let w = y
                    .col_indices()
                    .iter()
                    .position(|cc| cc == c)
                    .map(|p| y.values()[p])
                    .unwrap_or(0.0);
                worst = worst.max((v - w).abs());
            }
        }
        worst
    }

    /// Generalized Rayleigh quotient `x'Ax / x'Bx` on active vectors.
    pub fn rayleigh(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; x.len()];
        self.apply(x, &mut ax);
        let num: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let den: f64 = x.iter().zip(&self.mass).map(|(a, b)| a * a * b).sum();
        num / den
    }
}

pub(crate) fn csr_mul(a: &CsrMatrix<f64>, x: &[f64], y: &mut [f64]) {
    let offs = a.row_offsets();
    let cols = a.col_indices();
    let vals = a.values();
    for (r, yr) in y.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in offs[r]..offs[r + 1] {
            acc += vals[k] * x[cols[k]];
        }
        *yr = acc;
    }
}

fn row_weight(j: usize) -> f64 {
    if j == 0 {
        0.5
    } else {
        1.0
    }
}

pub(crate) fn side_weight(g: &WedgeGrid, i: usize) -> f64 {
    if i == 0 || i == g.nx - 1 {
        0.5
    } else {
        1.0
    }
}

/// Coupling between `(i, j)` and `(i + 1, j)`.
pub(crate) fn x_edge(g: &WedgeGrid, j: usize) -> f64 {
    let m = g.m as f64;
    m / g.phi(j).cos() * (g.dphi / g.dx) * row_weight(j)
}

/// Coupling between `(i, j)` and `(i, j + 1)` for an interior column.
pub(crate) fn phi_edge(g: &WedgeGrid, j: usize) -> f64 {
    let m = g.m as f64;
    (g.phi(j) + 0.5 * g.dphi).cos() * (g.dx / g.dphi) / m
}

pub(crate) fn mass(g: &WedgeGrid, i: usize, j: usize) -> f64 {
    if j == g.nphi - 1 {
        return 0.0;
    }
    let m = g.m as f64;
    g.phi(j).cos() * row_weight(j) * side_weight(g, i) * g.dx * g.dphi / m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_in_kernel_and_symmetry() {
        let g = WedgeGrid::new(3, 0.3, 33, 29).unwrap();
        let op = SparseOperator::assemble(&g);
        let ones = vec![1.0; g.len()];
        let r = op.apply_full(&ones);
        assert!(r.iter().all(|v| v.abs() < 1e-11));
        assert_eq!(op.asymmetry(), 0.0);
        assert!(op.mass.iter().all(|&b| b > 0.0));
    }

    #[test]
    fn analytic_rayleigh_quotient() {
        // cos^3(phi) sin(x) is the sigma = 0 eigenfunction with lambda = 12
        let mut prev = f64::INFINITY;
        for n in [33, 65, 129] {
            let g = WedgeGrid::new(3, 0.0, n, n).unwrap();
            let op = SparseOperator::assemble(&g);
            let full: Vec<f64> = (0..g.len())
                .map(|k| {
                    let (i, j) = (k / g.nphi, k % g.nphi);
                    g.phi(j).cos().powi(3) * g.x(i).sin()
                })
                .collect();
            let err = (op.rayleigh(&op.gather(&full)) - 12.0).abs();
            assert!(err < prev / 3.5, "n={n} err={err:e}");
            prev = err;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn positive_definite_on_active_set() {
        let g = WedgeGrid::new(5, 0.5, 17, 17).unwrap();
        let op = SparseOperator::assemble(&g);
        for seed in 0..5u64 {
            let x: Vec<f64> = (0..op.dim())
                .map(|k| ((k as u64 * 2654435761 + seed * 97) % 1000) as f64 / 500.0 - 1.0)
                .collect();
            assert!(op.rayleigh(&x) > 0.0);
        }
    }
}
