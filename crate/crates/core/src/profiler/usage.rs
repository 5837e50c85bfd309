//! Feature-usage counting and per-domain weights.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::profiler::{ParsedTrace, ProfilerError};

/// Raw feature-occurrence counts over all traces of one domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureUsage {
    pub domain: String,
    pub counts: BTreeMap<String, u64>,
    pub trace_count: usize,
}

/// Counts summed elementwise over the domain's traces.
pub fn aggregate_usage(
    domain: &str,
    traces: &[ParsedTrace],
) -> Result<FeatureUsage, ProfilerError> {
    if traces.is_empty() {
        return Err(ProfilerError::NoTraces { domain: domain.to_string() });
    }
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for trace in traces {
        for (feature, count) in &trace.counts {
            *counts.entry(feature.clone()).or_insert(0) += count;
        }
    }
    if counts.values().all(|&c| c == 0) {
        return Err(ProfilerError::ZeroUsage { domain: domain.to_string() });
    }
    Ok(FeatureUsage { domain: domain.to_string(), counts, trace_count: traces.len() })
}

/// Occurrence proportions: each feature's share of all occurrences in the
/// domain. Weights sum to 1; unused features carry no weight and are
/// dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainWeights {
    pub domain: String,
    pub weights: BTreeMap<String, f64>,
    pub feature_count: usize,
}

impl DomainWeights {
    /// Checks the defining invariants; use on documents from outside.
    pub fn validate(&self) -> Result<(), ProfilerError> {
        let invalid =
            |reason: String| ProfilerError::InvalidWeights { domain: self.domain.clone(), reason };
        if self.weights.is_empty() {
            return Err(invalid("no weighted features".into()));
        }
        if self.feature_count != self.weights.len() {
            return Err(invalid(format!(
                "feature_count {} does not match {} weights",
                self.feature_count,
                self.weights.len()
            )));
        }
        for (feature, weight) in &self.weights {
            if !weight.is_finite() || *weight < 0.0 {
                return Err(invalid(format!("weight of `{feature}` is {weight}")));
            }
        }
        let total: f64 = self.weights.values().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("weights sum to {total}, expected 1")));
        }
        Ok(())
    }
}

/// Normalizes counts into weights: `count / total`.
pub fn compute_weights(usage: &FeatureUsage) -> Result<DomainWeights, ProfilerError> {
    let total: u64 = usage.counts.values().sum();
    if total == 0 {
        return Err(ProfilerError::ZeroUsage { domain: usage.domain.clone() });
    }
    let weights: BTreeMap<String, f64> = usage
        .counts
        .iter()
        .filter(|(_, &count)| count > 0)
        .map(|(feature, &count)| (feature.clone(), count as f64 / total as f64))
        .collect();
    let feature_count = weights.len();
    Ok(DomainWeights { domain: usage.domain.clone(), weights, feature_count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiler::parse_trace;

    fn traces(texts: &[&str]) -> Vec<ParsedTrace> {
        texts.iter().map(|t| parse_trace(t).unwrap()).collect()
    }

    #[test]
    fn usage_sums_across_traces() {
        let usage = aggregate_usage("banking", &traces(&["BC a\nBC a\n", "BC a\nBC b\n"])).unwrap();
        assert_eq!(usage.counts, BTreeMap::from([("a".into(), 3), ("b".into(), 1)]));
        assert_eq!(usage.trace_count, 2);
    }

    #[test]
    fn single_trace_usage_equals_its_counts() {
        let parsed = parse_trace("ENTER m\nBC a\nEXIT\n").unwrap();
        let usage = aggregate_usage("banking", std::slice::from_ref(&parsed)).unwrap();
        assert_eq!(usage.counts, parsed.counts);
    }

    #[test]
    fn no_traces_is_an_error() {
        assert_eq!(
            aggregate_usage("transport", &[]).unwrap_err(),
            ProfilerError::NoTraces { domain: "transport".into() }
        );
    }

    #[test]
    fn occurrence_free_traces_are_an_error() {
        let empty = traces(&["# only comments\n", "\n"]);
        assert_eq!(
            aggregate_usage("transport", &empty).unwrap_err(),
            ProfilerError::ZeroUsage { domain: "transport".into() }
        );
    }

    #[test]
    fn weights_are_occurrence_proportions() {
        let usage = FeatureUsage {
            domain: "banking".into(),
            counts: BTreeMap::from([("a".into(), 30), ("b".into(), 10)]),
            trace_count: 1,
        };
        let weights = compute_weights(&usage).unwrap();
        assert_eq!(weights.weights[&"a".to_string()], 0.75);
        assert_eq!(weights.weights[&"b".to_string()], 0.25);
        assert_eq!(weights.feature_count, 2);
        weights.validate().unwrap();
    }

    #[test]
    fn single_feature_takes_all_weight() {
        let usage = FeatureUsage {
            domain: "d".into(),
            counts: BTreeMap::from([("only".into(), 7)]),
            trace_count: 1,
        };
        assert_eq!(compute_weights(&usage).unwrap().weights[&"only".to_string()], 1.0);
    }

    #[test]
    fn quarters_and_halves_come_out_exact() {
        let usage = FeatureUsage {
            domain: "d".into(),
            counts: BTreeMap::from([("a".into(), 1), ("b".into(), 1), ("c".into(), 2)]),
            trace_count: 1,
        };
        let weights = compute_weights(&usage).unwrap().weights;
        assert_eq!(weights[&"a".to_string()], 0.25);
        assert_eq!(weights[&"b".to_string()], 0.25);
        assert_eq!(weights[&"c".to_string()], 0.5);
    }

    #[test]
    fn zero_count_features_get_no_weight() {
        let usage = FeatureUsage {
            domain: "d".into(),
            counts: BTreeMap::from([("used".into(), 4), ("unused".into(), 0)]),
            trace_count: 1,
        };
        let weights = compute_weights(&usage).unwrap();
        assert!(!weights.weights.contains_key("unused"));
        assert_eq!(weights.feature_count, 1);
    }

    #[test]
    fn validation_rejects_a_broken_sum() {
        let bad = DomainWeights {
            domain: "d".into(),
            weights: BTreeMap::from([("a".into(), 0.5), ("b".into(), 0.6)]),
            feature_count: 2,
        };
        assert!(matches!(bad.validate(), Err(ProfilerError::InvalidWeights { .. })));
    }
}
