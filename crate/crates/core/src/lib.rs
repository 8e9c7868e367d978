//! Expert mental models: monotone elicitation of ordinal decision functions
//! over a hierarchy of factors.
//!
//! * [`lattice`]: ordinal scales and their product posets.
//! * [`monotone`]: partial and total monotone functions with closure.
//! * [`scheduler`]: Hansel-chain and greedy question selection.
//! * [`elicitation`]: sessions, conflicts, finalization.
//! * [`hierarchy`]: spec trees, validation, evaluation and explanations.
//! * [`aggregation`]: rule library and group aggregation.
//! * [`persistence`]: document formats and session logs.
//! * [`oracle`]: answer sources and LLM drafting.
//! * [`fisma`]: security-categorization preset.

pub mod aggregation;
pub mod elicitation;
pub mod fisma;
pub mod hierarchy;
pub mod lattice;
pub mod monotone;
pub mod oracle;
pub mod persistence;
pub mod scheduler;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use aggregation::AggregationError;
use elicitation::SessionError;
use fisma::FismaError;
use hierarchy::HierarchyError;
use lattice::LatticeError;
use monotone::MonotoneError;
use oracle::OracleError;
use persistence::PersistenceError;
use scheduler::SchedulerError;

/// Coarse error classes shared by the CLI exit codes and the HTTP API.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    Usage,
    NotFound,
    Validation,
    Conflict,
    Io,
    Oracle,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Usage => "usage",
            ErrorCategory::NotFound => "not_found",
            ErrorCategory::Validation => "validation",
            ErrorCategory::Conflict => "conflict",
            ErrorCategory::Io => "io",
            ErrorCategory::Oracle => "oracle",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Usage | ErrorCategory::NotFound => 2,
            ErrorCategory::Validation => 3,
            ErrorCategory::Conflict => 4,
            ErrorCategory::Io => 5,
            ErrorCategory::Oracle => 6,
        }
    }
}

impl std::fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Monotone(#[from] MonotoneError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Persistence(#[from] PersistenceError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Fisma(#[from] FismaError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<oracle::RunError> for Error {
    fn from(e: oracle::RunError) -> Self {
        match e {
            oracle::RunError::Oracle(o) => Error::Oracle(o),
            oracle::RunError::Session(s) => Error::Session(s),
        }
    }
}

fn monotone_category(e: &MonotoneError) -> ErrorCategory {
    match e {
        MonotoneError::Conflict(_) => ErrorCategory::Conflict,
        _ => ErrorCategory::Validation,
    }
}

fn hierarchy_category(e: &HierarchyError) -> ErrorCategory {
    match e {
        HierarchyError::UnknownNode(_) => ErrorCategory::NotFound,
        HierarchyError::InvalidDepth { .. } => ErrorCategory::Usage,
        HierarchyError::Aggregation { source, .. } => aggregation_category(source),
        _ => ErrorCategory::Validation,
    }
}

fn aggregation_category(e: &AggregationError) -> ErrorCategory {
    match e {
        AggregationError::Evaluation(h) => hierarchy_category(h),
        AggregationError::UnknownNode(_) => ErrorCategory::NotFound,
        _ => ErrorCategory::Validation,
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Lattice(_) | Error::Scheduler(_) | Error::Fisma(_) => ErrorCategory::Validation,
            Error::Monotone(e) => monotone_category(e),
            Error::Session(e) => match e {
                SessionError::Monotone(m) => monotone_category(m),
                SessionError::Conflict(_) | SessionError::WrongStatus(..) | SessionError::NoPendingQuestion => {
                    ErrorCategory::Conflict
                }
                SessionError::UnknownStrategy(_) => ErrorCategory::Usage,
                SessionError::Log(_) => ErrorCategory::Io,
                _ => ErrorCategory::Validation,
            },
            Error::Hierarchy(e) => hierarchy_category(e),
            Error::Aggregation(e) => aggregation_category(e),
            Error::Persistence(e) => match e {
                PersistenceError::UnknownNode(_) => ErrorCategory::NotFound,
                PersistenceError::Log { .. } => ErrorCategory::Io,
                PersistenceError::Hierarchy(h) => hierarchy_category(h),
                _ => ErrorCategory::Validation,
            },
            Error::Oracle(e) => match e {
                OracleError::Io(_) => ErrorCategory::Io,
                _ => ErrorCategory::Oracle,
            },
            Error::Usage(_) => ErrorCategory::Usage,
            Error::NotFound(_) => ErrorCategory::NotFound,
            Error::Io(_) => ErrorCategory::Io,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
