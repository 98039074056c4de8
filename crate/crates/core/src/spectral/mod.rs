//! Slit-wedge discretization and Dirichlet eigenpairs (`n = 3`).

pub mod cg;
pub mod eigen;
pub mod fast;
pub mod grid;
pub mod operator;

pub use eigen::{
    eigenpairs, kth_eigenpair, lowest_eigenpair, mu_from_lambda, nodal_sign_check, EigenOptions,
    EigenPair, InnerSolver,
};
pub use grid::{NodeRole, WedgeGrid, MIN_NODES};
pub use operator::SparseOperator;

use crate::error::Result;

/// Solves `(A - shift B) u = f` on the active nodes.
pub trait ShiftedSolve {
    fn shift(&self) -> f64;
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>>;
}

/// Builds the grid and operator in one step.
pub fn assemble(m: usize, sigma: f64, nx: usize, nphi: usize) -> Result<SparseOperator> {
    Ok(SparseOperator::assemble(&WedgeGrid::new(m, sigma, nx, nphi)?))
}
