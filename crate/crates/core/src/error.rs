use thiserror::Error;

/// Errors produced anywhere in the workbench.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (wrong vector length, invalid value).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid solver, evolver, model or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A document could not be parsed.
    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    /// Random instance generation gave up after the retry limit.
    #[error("could not generate instance satisfying the spec after {retries} retries")]
    Generation { retries: usize },

    /// A training-subset pool was empty.
    #[error("selection error: no candidates available for subset {kind}")]
    Selection { kind: String },

    /// Non-finite values where finite ones are required.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// A model file could not be used.
    #[error("model error: {0}")]
    Model(String),

    #[error("model file version mismatch: file has version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by bad configuration rather than bad data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
