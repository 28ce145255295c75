use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),

    #[error("chain diverged at step {step}")]
    Diverged { step: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("empty histogram")]
    EmptyHistogram,

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 validation, 2 divergence, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Diverged { .. } => 2,
            Error::Io(_) => 3,
            _ => 1,
        }
    }
}
