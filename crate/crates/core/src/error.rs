use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("sketch contains no ink")]
    EmptySketch,
    #[error("shape has no present parts")]
    EmptyShape,
    #[error("invalid state: {0}")]
    State(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case identifier for messages and exit reporting.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Argument(_) => "invalid_argument",
            Error::Config(_) => "config_error",
            Error::Numeric(_) => "numeric_error",
            Error::EmptySketch => "empty_sketch",
            Error::EmptyShape => "empty_shape",
            Error::State(_) => "invalid_state",
            Error::Parse { .. } => "parse_error",
            Error::Format(_) => "format_error",
            Error::Io(_) => "io_error",
            Error::Json(_) => "json_error",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
