use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate chart at x = ({x1:.6}, {x2:.6}): {detail}")]
    DegenerateChart { x1: f64, x2: f64, detail: String },

    #[error(
        "shape operator is not self-adjoint at x = ({x1:.6}, {x2:.6}): imaginary part {imag:.3e}"
    )]
    SymmetryViolation { x1: f64, x2: f64, imag: f64 },

    #[error("point |y| = {y:.6} lies outside the tube of half-width {reach:.6}")]
    OutOfTube { y: f64, reach: f64 },

    #[error("quadrature did not converge: estimate {estimate:.3e} above {tolerance:.3e}")]
    Integration { estimate: f64, tolerance: f64 },

    #[error("hypothesis ({which}) violated: {detail}")]
    Hypothesis { which: &'static str, detail: String },

    #[error("y-domain too small: oscillator tail mass {tail:.3e} at the wall exceeds {limit:.1e}")]
    DomainTooSmall { tail: f64, limit: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("propagation step failed at t = {t:.6}: local error {estimate:.3e} above {tolerance:.3e}; try a smaller time step")]
    StepFailure {
        t: f64,
        estimate: f64,
        tolerance: f64,
    },

    #[error("eigensolver did not converge: {0}")]
    SpectralFailure(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
