use thiserror::Error;

/// Errors raised by the derivator, integration, series and solver layers.
///
/// Variant names are part of the CLI contract: diagnostics print them verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("OutOfWindow: x = {x} lies outside the working window [{lo}, {hi}]")]
    OutOfWindow { x: f64, lo: f64, hi: f64 },

    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),

    #[error("GeneratorUnbounded: {0}")]
    GeneratorUnbounded(String),

    #[error("ToleranceNotMet: estimated error {estimate:e} exceeds tolerance {tol:e}")]
    ToleranceNotMet { estimate: f64, tol: f64 },

    #[error("DerivativeUndefined: {0}")]
    DerivativeUndefined(String),

    #[error("LimitNotConverged: quotient sequence at x = {x} failed the Cauchy test (spread {spread:e})")]
    LimitNotConverged { x: f64, spread: f64 },

    #[error("RouteUnavailable: {0}")]
    RouteUnavailable(String),

    #[error("NotCertified: {0}")]
    NotCertified(String),

    #[error("DivergenceDetected: {0}")]
    DivergenceDetected(String),

    #[error("NotIdentifiable: {0}")]
    NotIdentifiable(String),

    #[error("BoundViolated: {0}")]
    BoundViolated(String),

    #[error("OutsideDomain: x = {x} is not in the convergence domain {domain}")]
    OutsideDomain { x: f64, domain: String },

    #[error("SingularFactor: 1 + lambda*jump vanishes at y = {y}")]
    SingularFactor { y: f64 },

    #[error("HypothesisViolated: 1 + lambda*jump vanishes at y = {y} < x0")]
    HypothesisViolated { y: f64 },

    #[error("SuiteFailed: {0}")]
    SuiteFailed(String),
}

impl Error {
    /// The bare variant name, as printed in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::OutOfWindow { .. } => "OutOfWindow",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::GeneratorUnbounded(_) => "GeneratorUnbounded",
            Error::ToleranceNotMet { .. } => "ToleranceNotMet",
            Error::DerivativeUndefined(_) => "DerivativeUndefined",
            Error::LimitNotConverged { .. } => "LimitNotConverged",
            Error::RouteUnavailable(_) => "RouteUnavailable",
            Error::NotCertified(_) => "NotCertified",
            Error::DivergenceDetected(_) => "DivergenceDetected",
            Error::NotIdentifiable(_) => "NotIdentifiable",
            Error::BoundViolated(_) => "BoundViolated",
            Error::OutsideDomain { .. } => "OutsideDomain",
            Error::SingularFactor { .. } => "SingularFactor",
            Error::HypothesisViolated { .. } => "HypothesisViolated",
            Error::SuiteFailed(_) => "SuiteFailed",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
