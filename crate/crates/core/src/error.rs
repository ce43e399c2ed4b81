use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Two tensors that must agree in shape do not.
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    Shape {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    /// A computation produced a non-finite value.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// Malformed on-disk data (WAV, checkpoint, dataset files).
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// An operation was attempted in the wrong state (missing artifact, untrained model).
    #[error("state error: {0}")]
    State(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
