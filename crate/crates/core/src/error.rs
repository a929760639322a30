use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("measure integrability violated: {0}")]
    MeasureIntegrability(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("ambiguous fixed-point classification: {0}")]
    AmbiguousClassification(String),

    #[error("solution left the domain at s = {at}: {detail}")]
    SolverEscape { at: f64, detail: String },

    #[error("step size underflow at s = {at} (h = {step:e})")]
    Stiffness { at: f64, step: f64 },

    #[error("finite-mean condition fails: {0}")]
    FiniteMean(String),

    #[error("limit extrapolation failed: {0}")]
    Extrapolation(String),

    #[error("generating family is not embeddable: {0}")]
    NotEmbeddable(String),

    #[error("coefficient truncation bound {bound:e} exceeds tolerance {tolerance:e}; increase N or decrease r")]
    Truncation { bound: f64, tolerance: f64 },

    #[error("inconsistent checks: {0}")]
    Inconsistency(String),

    #[error("{paths} path(s) exceeded the population cap {cap}")]
    ExplosionCap { paths: usize, cap: u64 },
}

impl Error {
    /// Errors produced by numerical work (as opposed to malformed input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::SolverEscape { .. }
                | Error::Stiffness { .. }
                | Error::Extrapolation(_)
                | Error::Truncation { .. }
                | Error::Inconsistency(_)
                | Error::AmbiguousClassification(_)
                | Error::ExplosionCap { .. }
        )
    }
}
