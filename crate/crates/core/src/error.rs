use thiserror::Error;

/// Errors raised by the solvers, simulators and configuration layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("config line {line}: key `{key}`: {reason}")]
    Config {
        line: usize,
        key: String,
        reason: String,
    },

    #[error("CSI error τ² = {tau_sq} is not below 1; the estimate carries no information")]
    TauOutOfRange { tau_sq: f64 },

    #[error("network load c + c_S = {load} must be below 1")]
    Overloaded { load: f64 },

    #[error("argument {arg} outside the domain of {function}")]
    Domain { function: &'static str, arg: f64 },

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(&'static str),

    #[error("no regularization value on the search grid met the SINR targets")]
    EmptyFeasibleGrid,

    #[error("dimension mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
