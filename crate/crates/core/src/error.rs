use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("non-finite value at flat index {index}: {what}")]
    Numeric { index: usize, what: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("gamma pole at {0}")]
    Pole(f64),
    #[error("kernel is singular at {0}")]
    Singularity(String),
    #[error("unsupported dimension n = {n}: {what}")]
    UnsupportedDimension { n: usize, what: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable code, used in JSON output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Domain(_) => "domain",
            Error::Numeric { .. } => "numeric",
            Error::Argument(_) => "argument",
            Error::Pole(_) => "pole",
            Error::Singularity(_) => "singularity",
            Error::UnsupportedDimension { .. } => "unsupported_dimension",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
