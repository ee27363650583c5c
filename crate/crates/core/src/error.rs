use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// A quadrature cell that kept its error estimate above the target when the
/// refinement budget ran out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellReport {
    pub r: (f64, f64),
    pub theta: (f64, f64),
    pub value: f64,
    pub error: f64,
}

impl fmt::Display for CellReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "r in [{:.4}, {:.4}], theta in [{:.4}, {:.4}] (err {:.2e})",
            self.r.0, self.r.1, self.theta.0, self.theta.1, self.error
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {point:?} is not admissible for {domain}: {reason}")]
    Domain {
        point: Vec<f64>,
        domain: String,
        reason: String,
    },

    #[error("kernel singularity: {0}")]
    Singularity(String),

    #[error("{samples} samples cannot resolve truncation order {order} (need at least {need})")]
    Aliasing {
        samples: usize,
        order: usize,
        need: usize,
    },

    #[error("accuracy target missed in {context}: value {value:e}, estimated error {estimate:e}")]
    Accuracy {
        context: String,
        value: f64,
        estimate: f64,
        cells: Vec<CellReport>,
    },

    #[error("radial trace did not converge at angle {angle}: residual {residual:e}")]
    TraceFailure { angle: f64, residual: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("walk-on-spheres exceeded {cap} steps")]
    NonTermination { cap: usize },

    #[error("degenerate case: {0}")]
    Degenerate(String),

    #[error("target is not anchored: {0}")]
    NotAnchored(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
