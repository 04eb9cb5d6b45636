use thiserror::Error;

use crate::finite_key::Method;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("division by zero: intensity {0} coincides with another intensity")]
    DivisionByZero(f64),

    #[error("invalid intensity ladder: {0}")]
    InvalidLadder(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("width of an empty set is undefined")]
    EmptySet,

    #[error("method {0}: vacuous denominator")]
    VacuousDenominator(Method),

    #[error("method C: fluctuation term undefined (non-positive bracket)")]
    DeltaEUndefined,

    #[error("method D: expansion invalid (non-positive D_m or E_m)")]
    ExpansionInvalid,

    #[error("method D: too few error events (t = {0})")]
    TooFewErrorEvents(f64),

    #[error("method D: non-positive expansion offset ({0})")]
    NonPositiveOffset(&'static str),

    #[error("single-photon yield bound is not positive; phase error cannot be bounded")]
    NoSinglePhotonYield,

    #[error("gamma-bar radicand is negative; no phase-error bound with the requested failure probability")]
    ComplexGamma,

    #[error("phase error bound {0} exceeds 1/2")]
    PhaseErrorTooLarge(f64),

    #[error("binary entropy argument {0} outside [0, 1]")]
    EntropyDomain(f64),

    #[error("every e11 method is invalid")]
    AllMethodsInvalid,
}
