use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A point or hypothesis of one domain kind was used with another.
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// No closed form exists for this (distribution, hypothesis) pairing.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("size limit exceeded: {what} has size {size}, limit is {limit}")]
    SizeLimit {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("hypothesis signature not present in cover")]
    UnknownPattern,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no dataset passed the accuracy test after {attempts} attempts")]
    AttemptsExhausted { attempts: usize },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_unit_open(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("{value} is not in (0, 1)"),
        })
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("{value} is not a positive finite number"),
        })
    }
}
