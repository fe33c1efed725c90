use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A LoRa parameter or parameter pair outside the modelled tables.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A metric whose denominator is zero for the given ledgers.
    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),
    /// Configuration that fails validation; the string names the field.
    #[error("invalid configuration at `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
