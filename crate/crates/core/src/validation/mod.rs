//! Static validation: declarative assertions over configuration trees and
//! configuration-complexity metrics.

mod assertion;
mod complexity;
mod path;

use thiserror::Error;

pub use assertion::{evaluate, Assertion, AssertionResult, Check, Comparator, FailureReason, ValidationReport};
pub use complexity::{aggregate_complexity, aggregate_metrics, complexity, ComplexityAggregate, ComplexityMetrics};
pub use path::{resolve, resolve_path, ConfigPath, Segment};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("malformed path {path:?}: {reason}")]
    PathSyntax { path: String, reason: String },
    #[error("invalid assertion: {0}")]
    InvalidAssertion(String),
    #[error("complexity of an empty corpus is undefined")]
    EmptyCorpus,
}
