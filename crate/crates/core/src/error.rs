use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("no path from node {source_node} to node {target}")]
    NoPath { source_node: usize, target: usize },

    #[error("edge {a}-{b} ({length_km} km) exceeds the optical reach of {reach_km} km")]
    ReachExceeded {
        a: usize,
        b: usize,
        length_km: f64,
        reach_km: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("search budget exceeded: {needed} > {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("instance is infeasible")]
    Infeasible,

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("no results: {0}")]
    EmptyResults(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for infeasible or empty results, 3 for bad
    /// configuration or input, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible | Error::EmptyResults(_) => 2,
            Error::InvalidArgument(_) | Error::InvalidTopology(_) | Error::Parse { .. } | Error::ReachExceeded { .. } => 3,
            _ => 1,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
