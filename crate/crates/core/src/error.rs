use thiserror::Error;

use crate::grid::Cell;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cell {0} is outside the grid")]
    OutOfBounds(Cell),
    #[error("cell {0} is not unburned")]
    NotUnburned(Cell),
    #[error("anomaly interval [{start}, {end}] is invalid for horizon {horizon}")]
    AnomalyInterval { start: u64, end: u64, horizon: u64 },
    #[error("anomaly magnitude must be positive, got {0}")]
    AnomalyMagnitude(f64),
    #[error("likelihood parameter {name}={value} must lie strictly inside (0,1)")]
    Likelihood { name: &'static str, value: f64 },
    #[error("zone set is empty")]
    NoZones,
    #[error("zones do not partition the grid: {0}")]
    BadPartition(String),
    #[error("stage-2 confidence requested with {have} of {need} verification samples")]
    InsufficientSamples { have: usize, need: usize },
    #[error("submitter {0} is not registered")]
    UnknownSubmitter(String),
    #[error("nonce {nonce} already used by {submitter}")]
    NonceReused { submitter: String, nonce: u64 },
    #[error("signature does not verify")]
    BadSignature,
    #[error("validator {0} is unknown")]
    UnknownValidator(String),
    #[error("malformed encoding: {0}")]
    Decode(String),
    #[error("dissemination rejected: no on-chain authorization for event {0}")]
    Unauthorized(u64),
    #[error("alert for event {0} was already delivered")]
    DuplicateAlert(u64),
    #[error("invalid config: {field}: {message}")]
    Config { field: String, message: String },
    #[error("seed lists differ between compared runs")]
    SeedMismatch,
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
