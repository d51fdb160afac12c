use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("no market {0}")]
    NoMarket(String),

    #[error("year {0} not present in cube")]
    YearAbsent(i32),

    #[error("no reporting establishments for naics6 code(s): {}", .0.join(", "))]
    Unimputable(Vec<String>),

    #[error("missing deflator for ({market}, {year})")]
    MissingDeflator { market: String, year: i32 },

    #[error("conditional probability undefined: {0}")]
    UndefinedConditional(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used in structured CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::NoMarket(_) => "no-market",
            Error::YearAbsent(_) => "year-absent",
            Error::Unimputable(_) => "unimputable",
            Error::MissingDeflator { .. } => "missing-deflator",
            Error::UndefinedConditional(_) => "undefined-conditional",
            Error::Singularity(_) => "singularity",
            Error::Infeasible(_) => "infeasible",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::NonConvergence { .. } => "non-convergence",
            Error::Json(_) => "json",
            Error::Config(_) => "config",
        }
    }
}
