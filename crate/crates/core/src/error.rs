use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("dynamical matrix is defective (eigenvector condition number {0:.3e})")]
    Defective(f64),
    #[error("fit did not converge: {0}")]
    NonConvergence(String),
    #[error("unidentifiable: {0}")]
    Unidentifiable(String),
    #[error("integration domain: {0}")]
    IntegrationDomain(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("physically inadmissible result: {0}")]
    Inadmissible(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Coarse classification used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) | Error::Dimension(_) | Error::Config(_) | Error::Json(_) => {
                ErrorKind::Config
            }
            Error::NonConvergence(_) | Error::DegenerateFit(_) | Error::Unidentifiable(_) => {
                ErrorKind::Fit
            }
            Error::Numerical(_)
            | Error::Defective(_)
            | Error::IntegrationDomain(_)
            | Error::Inadmissible(_) => ErrorKind::Numerical,
            Error::Io(_) | Error::Csv(_) => ErrorKind::Io,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Fit,
    Io,
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
