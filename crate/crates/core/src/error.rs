use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rejected input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Integrity { path: PathBuf, message: String },

    #[error("no overlapping dates between assets: {}", assets.join(", "))]
    NoOverlap { assets: Vec<String> },

    #[error("config error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("optimizer setup error: {0}")]
    Setup(String),

    #[error("singular design in {fit} fit: {detail}")]
    SingularDesign { fit: String, detail: String },

    #[error("window error: {0}")]
    Window(String),

    #[error("unknown asset '{0}'")]
    Lookup(String),

    #[error("did not converge after {iterations} iterations (objective {objective})")]
    NonConvergence {
        best: Vec<f64>,
        objective: f64,
        iterations: usize,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Wraps the error with a short description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
