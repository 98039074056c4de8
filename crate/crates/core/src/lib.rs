//! Numerical construction of homogeneous thin obstacle solutions on slit
//! spherical wedges.
//!
//! The pipeline runs bottom-up:
//!
//! * [`legendre`] solves the rotation-invariant profile `p_mu` and the forced
//!   profile `h`,
//! * [`spectral`] discretizes the slit wedge and computes Dirichlet eigenpairs,
//! * [`construct`] turns an eigenpair into the equator traces, the obstruction
//!   value `c(sigma)` and the solution `u`,
//! * [`continuation`] locates the zero of `c` by bisection with mesh refinement,
//! * [`gaps`] and [`variant`] cover the frequency gaps and the k-th
//!   eigenfunction construction.

pub mod construct;
pub mod continuation;
pub mod error;
pub mod gaps;
pub mod interp;
pub mod legendre;
pub mod ode;
pub mod quad;
pub mod spectral;
pub mod variant;

pub use error::{Error, Result};
