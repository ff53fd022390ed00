use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("quadrature did not converge: error estimate {estimate:e} exceeds tolerance {tol:e}")]
    NonConvergence { estimate: f64, tol: f64 },
    #[error("integrand envelope does not decay within the search range")]
    EnvelopeNotDecaying,
    #[error("precision loss: cancellation bound {bound:e} against value {value:e}")]
    PrecisionLoss { bound: f64, value: f64 },
    #[error("matrix is not antisymmetric (defect {defect:e})")]
    NotAntisymmetric { defect: f64 },
    #[error("eigenvalue iteration did not converge (seed {seed}, trial {trial})")]
    EigenNonConvergence { seed: u64, trial: u64 },
    #[error("no real eigenvalues to histogram")]
    EmptyBatch,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
