use thiserror::Error;

/// Errors raised by simulations, clock queries and estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A query reaches beyond the simulated range; the horizon must be enlarged.
    #[error("range exhausted: requested {requested}, available up to {available}")]
    RangeExhausted { requested: f64, available: f64 },

    /// Scale parameters leave fewer blocks than the quantity needs.
    #[error("degenerate scales: {0}")]
    DegenerateScale(String),

    /// A trajectory exceeded its hard event cap.
    #[error("event cap of {cap} exceeded")]
    EventCapExceeded { cap: u64 },

    /// A grid refinement did not stabilise within its level cap.
    #[error("refinement did not stabilise after {levels} levels")]
    RefinementCap { levels: u32 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
