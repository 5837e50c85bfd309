//! From execution traces to per-domain performance marks.
//!
//! Traces of representative applets are parsed into invocation trees and
//! feature counts; counts become normalized per-domain weights; weights
//! combine with measured execution times and a reference base into marks
//! per feature, per domain, and overall.

mod scoring;
mod trace;
mod usage;

pub use scoring::{
    build_reference, compute_mark, score, DomainScore, FeatureScore, ReferenceAggregation,
    ReferenceBase, ScoreCard,
};
pub use trace::{parse_trace, InvocationTree, ParsedTrace, TraceEvent, TraceNode};
pub use usage::{aggregate_usage, compute_weights, DomainWeights, FeatureUsage};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfilerError {
    #[error("trace line {line}: {reason}")]
    TraceParse { line: usize, reason: String },
    #[error("unbalanced trace at line {line}: {reason}")]
    Unbalanced { line: usize, reason: String },
    #[error("domain `{domain}` has no traces")]
    NoTraces { domain: String },
    #[error("domain `{domain}` has no feature occurrences")]
    ZeroUsage { domain: String },
    #[error("feature `{feature}` was not measured on card `{card}`")]
    MissingFeature { feature: String, card: String },
    #[error("feature `{feature}` on card `{card}` has a non-positive mean")]
    NonPositiveMean { feature: String, card: String },
    #[error(
        "marks need positive times, got reference {reference_ns} ns and measured {measured_ns} ns"
    )]
    NonPositiveInput { reference_ns: f64, measured_ns: f64 },
    #[error("feature `{feature}` is weighted in domain `{domain}` but has no mark")]
    FeatureWithoutMark { feature: String, domain: String },
    #[error("scoring needs at least one domain")]
    NoDomains,
    #[error("invalid weights for domain `{domain}`: {reason}")]
    InvalidWeights { domain: String, reason: String },
}
