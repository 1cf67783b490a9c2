use thiserror::Error;

/// Errors produced by the operator, solver and verification layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid operator specification: {0}")]
    InvalidSpec(String),

    #[error("coefficient `{coefficient}` is not locally integrable on [{lo}, {hi}]")]
    NotLocallyIntegrable { coefficient: &'static str, lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("propagation overflow at xi = {xi}: accumulated log-scale {log_scale:.3e} exceeds budget")]
    Overflow { xi: String, log_scale: f64 },

    #[error(
        "truncation of the half-line did not stabilise for xi = {xi} (last change {change:.3e} at height {height})"
    )]
    TruncationNotConverged { xi: f64, change: f64, height: f64 },

    #[error(
        "phi_xi(y) does not decay in xi (|phi| = {magnitude:.3e} at xi = {xi}); use a positive smoothing parameter"
    )]
    InsufficientDecay { xi: f64, magnitude: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("estimate has zero mass")]
    ZeroMass,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
