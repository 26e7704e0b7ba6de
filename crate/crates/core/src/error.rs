use std::path::PathBuf;

use crate::model::Regime;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input value violates a documented precondition.
    #[error("invalid {what}: {reason}")]
    Validation { what: String, reason: String },

    #[error("operation requires {expected} regime, got {actual:?} (R = {sum_rate})")]
    Regime {
        expected: &'static str,
        actual: Regime,
        sum_rate: f64,
    },

    #[error("argument {value} outside the domain of {function}")]
    Domain { function: &'static str, value: f64 },

    #[error("no analytic cumulant generating function for {model} delays")]
    NoAnalyticCgf { model: &'static str },

    #[error("numerical failure in {operation}: {detail}")]
    Numeric { operation: &'static str, detail: String },

    #[error("target {target} is unreachable: {detail}")]
    Infeasible { target: f64, detail: String },

    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            what: what.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn numeric(operation: &'static str, detail: impl Into<String>) -> Self {
        Error::Numeric {
            operation,
            detail: detail.into(),
        }
    }

    /// Short stable tag for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation { .. } => "validation",
            Error::Regime { .. } => "regime",
            Error::Domain { .. } => "domain",
            Error::NoAnalyticCgf { .. } => "no_analytic_cgf",
            Error::Numeric { .. } => "numeric",
            Error::Infeasible { .. } => "infeasible",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }
}
