use thiserror::Error;

use crate::pbf::ValidationReport;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("x = {0} lies outside the function domain")]
    OutOfDomain(f64),

    #[error("x = {0} lies in a constant piece; derivative is zero")]
    ConstantBranch(f64),

    #[error("function has constant pieces; information loss is infinite")]
    InfiniteLoss,

    #[error("range [{range_lo}, {range_hi}] is not contained in domain [{domain_lo}, {domain_hi})")]
    RangeMismatch {
        range_lo: f64,
        range_hi: f64,
        domain_lo: f64,
        domain_hi: f64,
    },

    #[error("branches do not tile the domain: {0}")]
    Tiling(Box<ValidationReport>),

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("density integrates to {0}, not 1")]
    NotNormalized(f64),

    #[error("quadrature did not converge on [{lo}, {hi}] (error estimate {error:e})")]
    NoConvergence { lo: f64, hi: f64, error: f64 },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("output process is not lumpable (max deviation {max_deviation:e})")]
    NotLumpable { max_deviation: f64 },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("incompatible specification: {0}")]
    IncompatibleSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
