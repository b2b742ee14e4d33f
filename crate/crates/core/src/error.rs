use thiserror::Error;

/// Errors raised by the numerical engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPositive { min_eig: f64 },
    #[error("{what}: residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    Tolerance {
        what: String,
        residual: f64,
        tol: f64,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("domain error: {0}")]
    Domain(String),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn tolerance(what: impl Into<String>, residual: f64, tol: f64) -> Self {
        Error::Tolerance {
            what: what.into(),
            residual,
            tol,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
