//! Turning raw measurement sets into per-operation execution times.
//!
//! Two stages: a confidence filter drops samples outside an interval around
//! the mean, then isolation subtracts the empty-loop reference, divides by
//! the loop count, and removes auxiliary-operation costs in dependency
//! order.

mod filter;
mod isolate;

pub use filter::{filter_confidence, FilterPolicy};
pub use isolate::{isolate_all, isolate_one, relative_deviation, IsolatedTime, OpDependencyGraph};

use thiserror::Error;

use crate::stats::StatsError;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid filter policy: {0}")]
    InvalidPolicy(String),
    #[error("filter retained {retained} of {total} samples, below the required {min_retained}")]
    OverFiltered { retained: usize, total: usize, min_retained: usize },
    #[error("loop size mismatch: case measured at {measured}, reference at {reference}")]
    LoopSizeMismatch { measured: u32, reference: u32 },
    #[error("dependency cycle through feature `{feature_id}`")]
    CycleDetected { feature_id: String },
    #[error("no measurements for feature `{feature_id}`")]
    MissingMeasurement { feature_id: String },
    #[error("reference value must be positive")]
    ZeroReference,
    #[error(transparent)]
    Stats(#[from] StatsError),
}
