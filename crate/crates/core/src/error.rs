use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its legal interval. `field` names the
    /// offending parameter.
    #[error("invalid parameter `{field}`: {reason}")]
    Param { field: &'static str, reason: String },

    #[error("non-finite input sample {value} at index {index}")]
    NonFinite { index: u64, value: f64 },

    #[error("sampling rate mismatch: signal at {signal} Hz, parameters at {params} Hz")]
    RateMismatch { signal: f64, params: f64 },
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Param {
            field,
            reason: reason.into(),
        }
    }
}
