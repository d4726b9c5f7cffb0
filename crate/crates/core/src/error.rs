use thiserror::Error;

/// Errors produced by the analytical and numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The time-averaged drift left the admissible band at time `t`.
    #[error("drift constraint violated at t = {t}: mean drift {value} outside [{lower}, {upper}]")]
    Constraint {
        t: f64,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("{what} did not converge: estimate {estimate}, error estimate {error}")]
    NonConvergence {
        what: &'static str,
        estimate: f64,
        error: f64,
    },

    #[error("target {y} outside bracket [{f_lo}, {f_hi}]")]
    Bracket { y: f64, f_lo: f64, f_hi: f64 },

    #[error("grid step mismatch: {0} vs {1}")]
    GridMismatch(f64, f64),

    /// The requested operation needs a constant drift.
    #[error("{0} requires a constant drift; use the general (numeric) route")]
    RequiresConstantDrift(&'static str),

    #[error("{0}")]
    Unsupported(String),

    #[error("table: {0}")]
    Table(String),
}

pub type Result<T> = std::result::Result<T, Error>;
