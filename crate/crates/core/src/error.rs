use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("unknown parameter index {0}")]
    UnknownParameter(usize),

    #[error("unknown context: {0}")]
    UnknownContext(String),

    #[error("decision {0} outside the domain: {1}")]
    Domain(f64, String),

    #[error("utility {utility} is not in the support at decision {decision}, context {context}")]
    Observation {
        utility: f64,
        decision: f64,
        context: usize,
    },

    #[error("decision {decision} for context {context} is below the hindsight lower bound by {slack}")]
    FhInfeasible {
        context: usize,
        decision: f64,
        slack: f64,
    },

    #[error("resource guard exceeded: {0}")]
    Resource(String),

    #[error("policy contract violated at t={t}: decision {decision}")]
    PolicyContract { t: usize, decision: f64 },

    #[error("unsupported instance: {0}")]
    UnsupportedInstance(String),

    #[error("unknown instance `{0}`")]
    UnknownInstance(String),

    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        if e.is_io_error() {
            Error::Io(e.to_string())
        } else {
            Error::Schema {
                line,
                message: e.to_string(),
            }
        }
    }
}
