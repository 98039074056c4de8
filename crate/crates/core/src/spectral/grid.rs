use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{invalid, Result};

pub const MIN_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Interior,
    DirichletSide,
    DirichletSlit,
    NeumannEquator,
    DirichletPole,
}

impl NodeRole {
    pub fn is_dirichlet(self) -> bool {
        !matches!(self, NodeRole::Interior | NodeRole::NeumannEquator)
    }
}

/// Uniform tensor grid on the rescaled wedge `x = m theta in [0, pi]`,
/// latitude `phi in [0, pi/2]`. Node `(i, j)` sits at `(x_i, phi_j)` and has
/// flat index `i * nphi + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeGrid {
    pub m: usize,
    /// Snapped slit fraction, `slit_end / (nx - 1)`.
    pub sigma: f64,
    pub nx: usize,
    pub nphi: usize,
    pub dx: f64,
    pub dphi: f64,
    /// Largest x-index on the slit.
    pub slit_end: usize,
}

impl WedgeGrid {
    /// Builds the grid, snapping `sigma` to the nearest x-node.
    pub fn new(m: usize, sigma: f64, nx: usize, nphi: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(invalid(format!("sigma must lie in [0, 1], got {sigma}")));
        }
        let idx = (sigma * (nx.max(2) - 1) as f64).round() as usize;
        Self::from_index(m, idx, nx, nphi)
    }

    /// Builds the grid whose slit ends exactly at x-node `slit_end`.
    pub fn from_index(m: usize, slit_end: usize, nx: usize, nphi: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m must be at least 1"));
        }
        if nx < MIN_NODES || nphi < MIN_NODES {
            return Err(invalid(format!(
                "resolution must be at least {MIN_NODES} in each direction, got {nx} x {nphi}"
            )));
        }
        if slit_end > nx - 1 {
            return Err(invalid("slit index beyond the grid"));
        }
        Ok(Self {
            m,
            sigma: slit_end as f64 / (nx - 1) as f64,
            nx,
            nphi,
            dx: PI / (nx - 1) as f64,
            dphi: FRAC_PI_2 / (nphi - 1) as f64,
            slit_end,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.nphi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nphi + j
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx - 1 {
            PI
        } else {
            i as f64 * self.dx
        }
    }

    pub fn phi(&self, j: usize) -> f64 {
        if j == self.nphi - 1 {
            FRAC_PI_2
        } else {
            j as f64 * self.dphi
        }
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn phi_nodes(&self) -> Vec<f64> {
        (0..self.nphi).map(|j| self.phi(j)).collect()
    }

    /// Azimuth spacing in the original angle, `dx / m`.
    pub fn ds(&self) -> f64 {
        self.dx / self.m as f64
    }

    /// Original azimuths `theta = x / m` of the equator nodes.
    pub fn s_nodes(&self) -> Vec<f64> {
        let m = self.m as f64;
        (0..self.nx).map(|i| self.x(i) / m).collect()
    }

    pub fn role(&self, i: usize, j: usize) -> NodeRole {
        if j == self.nphi - 1 {
            NodeRole::DirichletPole
        } else if j == 0 && i <= self.slit_end {
            NodeRole::DirichletSlit
        } else if i == 0 || i == self.nx - 1 {
            NodeRole::DirichletSide
        } else if j == 0 {
            NodeRole::NeumannEquator
        } else {
            NodeRole::Interior
        }
    }

    pub fn is_dirichlet(&self, i: usize, j: usize) -> bool {
        self.role(i, j).is_dirichlet()
    }

    /// Slit nodes that are not also on a side meridian.
    pub fn slit_interior(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.slit_end.min(self.nx - 2)
    }

    /// Number of x-nodes `nx' = 2 nx - 1` after one refinement.
    pub fn refined_size(n: usize) -> usize {
        2 * n - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapping_and_roles() {
        let g = WedgeGrid::new(3, 0.42, 101, 64).unwrap();
        assert_eq!(g.slit_end, 42);
        assert!((g.sigma - 0.42).abs() < 1e-15);
        let g = WedgeGrid::new(3, 0.0, 64, 64).unwrap();
        assert_eq!(g.role(0, 0), NodeRole::DirichletSlit);
        assert!((1..64).all(|i| g.role(i, 0) != NodeRole::DirichletSlit));
        assert_eq!(g.role(63, 0), NodeRole::DirichletSide);
        let g = WedgeGrid::new(3, 1.0, 64, 64).unwrap();
        assert!((0..64).all(|i| g.role(i, 0) == NodeRole::DirichletSlit));
        assert_eq!(g.role(0, 5), NodeRole::DirichletSide);
        assert_eq!(g.role(5, 63), NodeRole::DirichletPole);
        assert_eq!(g.role(5, 5), NodeRole::Interior);
        assert_eq!(g.x(63), PI);
        assert_eq!(g.phi(63), FRAC_PI_2);
    }

    #[test]
    fn rejects_invalid() {
        assert!(WedgeGrid::new(3, 1.2, 64, 64).is_err());
        assert!(WedgeGrid::new(3, -0.1, 64, 64).is_err());
        assert!(WedgeGrid::new(3, 0.5, 8, 64).is_err());
        assert!(WedgeGrid::new(0, 0.5, 64, 64).is_err());
    }
}
