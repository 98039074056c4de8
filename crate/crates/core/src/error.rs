use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("growth bound violated at phi = {phi}: |h'| = {value:e} > {bound:e}")]
    GrowthBound { phi: f64, value: f64, bound: f64 },

    #[error("p(0) = {p0:e} is below the zero threshold {threshold:e}; frequency too close to an odd integer")]
    NearZeroDenominator { p0: f64, threshold: f64 },

    #[error("linear solver failure: {0}")]
    LinearSolver(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("bracket lost at level {level}: c({sigma_lo}) = {c_lo:e}, c({sigma_hi}) = {c_hi:e}")]
    BracketLost {
        level: usize,
        sigma_lo: f64,
        sigma_hi: f64,
        c_lo: f64,
        c_hi: f64,
    },

    #[error("no sign change: c({sigma_lo}) = {c_lo:e}, c({sigma_hi}) = {c_hi:e}")]
    NoSignChange {
        sigma_lo: f64,
        sigma_hi: f64,
        c_lo: f64,
        c_hi: f64,
    },

    #[error("nodal check failed for m = {m}, k = {k}, sigma = {sigma}")]
    NodalCheck { m: usize, k: usize, sigma: f64 },

    #[error("eigenvalue {k} is degenerate within tolerance (gap {gap:e})")]
    Degenerate { k: usize, gap: f64 },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
