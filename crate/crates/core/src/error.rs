use thiserror::Error;

/// Errors produced by the estimators and their input handling.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or non-finite input data.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A method parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// The data do not support the requested estimate (empty arm, too few units).
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// An error-density Fourier coefficient is too small to divide by.
    #[error("spectral division: |f_delta^ft({index:?})| = {magnitude:e} is below tolerance {tol:e}")]
    SpectralDivision {
        index: Vec<i64>,
        magnitude: f64,
        tol: f64,
    },
    /// A coefficient table that must be conjugate-symmetric is not.
    #[error("coefficient table is not conjugate symmetric at {0:?}")]
    Asymmetric(Vec<i64>),
    /// Quadrature refinement did not reach the requested tolerance.
    #[error("quadrature did not converge: last refinement changed the value by {change:e} (tolerance {tol:e}) at {panels} panels per axis")]
    OracleNonConvergence { change: f64, tol: f64, panels: usize },
    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical procedures rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::SpectralDivision { .. } | Error::OracleNonConvergence { .. } => true,
            Error::Replicate { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
