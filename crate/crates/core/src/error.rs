use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}:{column}: {message}")]
    Schema {
        file: String,
        line: u64,
        column: String,
        message: String,
    },

    #[error("{file}:{line}: {message}")]
    Referential {
        file: String,
        line: u64,
        message: String,
    },

    #[error("duplicate person id {0:?}")]
    DuplicatePerson(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("district {0:?} has no cells")]
    EmptyDistrict(String),

    #[error("district {0:?} has no cell with positive weight")]
    DegenerateDistrict(String),

    #[error("table {table:?} has no distribution for key {key:?}")]
    MissingDistribution { table: String, key: Vec<String> },

    #[error("table {table:?} has no distribution for {} keys, first {:?}", keys.len(), keys.first())]
    MissingDistributions {
        table: String,
        keys: Vec<Vec<String>>,
    },

    #[error("table {table:?} expects {expected} key attributes, got {got}")]
    ArityMismatch {
        table: String,
        expected: usize,
        got: usize,
    },

    #[error("probability vector sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("all capacities are exhausted")]
    CapacityExhausted,

    #[error("no feasible occupation for person {person:?} (age {age}) under key {key:?}")]
    Infeasible {
        person: String,
        age: u32,
        key: Vec<String>,
    },

    #[error("contradiction: {0}")]
    Contradiction(String),

    #[error("stage incomplete: {0}")]
    StageIncomplete(String),

    #[error("district sets differ: {0}")]
    MismatchedDistricts(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(file: &str, err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        Error::Schema {
            file: file.to_string(),
            line,
            column: String::new(),
            message: err.to_string(),
        }
    }
}

impl Error {
    /// Short machine-readable category, used in the CLI's error report.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Schema { .. } => "schema",
            Error::Referential { .. } => "referential",
            Error::DuplicatePerson(_) => "duplicate_person",
            Error::Config(_) => "config",
            Error::EmptyDistrict(_) => "empty_district",
            Error::DegenerateDistrict(_) => "degenerate_district",
            Error::MissingDistribution { .. } | Error::MissingDistributions { .. } => {
                "missing_distribution"
            }
            Error::ArityMismatch { .. } => "arity_mismatch",
            Error::NotNormalized { .. } => "not_normalized",
            Error::CapacityExhausted => "capacity_exhausted",
            Error::Infeasible { .. } => "infeasible",
            Error::Contradiction(_) => "contradiction",
            Error::StageIncomplete(_) => "stage_incomplete",
            Error::MismatchedDistricts(_) => "mismatched_districts",
            Error::Internal(_) => "internal",
        }
    }
}
