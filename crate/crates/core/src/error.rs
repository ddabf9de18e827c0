use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite moment at t = {time} (trajectory {trajectory:?}); try a smaller time step")]
    NonFinite {
        time: f64,
        trajectory: Option<usize>,
    },

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("Fock truncation leak {leak:e} exceeds {limit:e} at t = {time}")]
    TruncationLeak { leak: f64, limit: f64, time: f64 },

    #[error("trace drift {drift:e} in a single step exceeds {limit:e}")]
    TraceDrift { drift: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
