use std::path::PathBuf;

use thiserror::Error;

/// Failures raised by the simulator and its verification tooling.
#[derive(Debug, Error)]
pub enum BiError {
    /// Shape or consistency problems: length mismatches, non-finite values,
    /// too few snapshots, uneven sampling.
    #[error("structural error: {0}")]
    Structural(String),

    /// The Lorentz density dropped below the admissible floor, so the state
    /// has left the hyperbolic small-data regime.
    #[error("hyperbolicity breakdown at t = {t}, x = {x}: {reason}")]
    Breakdown { t: f64, x: f64, reason: String },

    /// Argument outside the domain of a function, e.g. the scaling window
    /// evaluated before t = 2.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid run or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller-side precondition does not hold (off-shell jet, etc.).
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl BiError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BiError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_breakdown(&self) -> bool {
        matches!(self, BiError::Breakdown { .. })
    }
}

pub type Result<T> = std::result::Result<T, BiError>;
