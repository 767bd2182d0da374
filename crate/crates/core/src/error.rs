use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter violates a structural invariant (g < 0, count < 2, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Inputs are well-formed but outside the regime where an operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precision exhausted evaluating k = {k} (needed more than {max_bits} fractional bits)")]
    PrecisionExhausted { k: u64, max_bits: u32 },

    #[error("numerical fault: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by the physics inputs rather than a malformed request.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::PrecisionExhausted { .. } | Error::Numerical(_)
        )
    }
}
