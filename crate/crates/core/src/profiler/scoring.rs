//! Marks: comparing measured execution times against a reference base.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::profiler::{DomainWeights, ProfilerError};

/// How per-card means fold into one reference value per feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceAggregation {
    /// Arithmetic mean of the per-card means (the default).
    #[default]
    Arithmetic,
    /// Geometric mean; better behaved for ratio marks.
    Geometric,
}

/// Reference execution time per feature, aggregated over a set of cards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBase {
    pub reference_ns: BTreeMap<String, f64>,
    pub source_card_count: usize,
}

/// Builds the reference base from per-card isolated means.
///
/// Every card must provide a positive mean for every feature any card
/// mentions; a gap would silently skew the aggregate.
pub fn build_reference(
    cards: &BTreeMap<String, BTreeMap<String, f64>>,
    aggregation: ReferenceAggregation,
) -> Result<ReferenceBase, ProfilerError> {
    let mut features: Vec<&String> = cards.values().flat_map(|means| means.keys()).collect();
    features.sort();
    features.dedup();

    let mut reference_ns = BTreeMap::new();
    for feature in features {
        let mut values = Vec::with_capacity(cards.len());
        for (card, means) in cards {
            let mean = *means.get(feature).ok_or_else(|| ProfilerError::MissingFeature {
                feature: feature.clone(),
                card: card.clone(),
            })?;
            if mean.is_nan() || mean <= 0.0 {
                return Err(ProfilerError::NonPositiveMean {
                    feature: feature.clone(),
                    card: card.clone(),
                });
            }
            values.push(mean);
        }
        let aggregated = match aggregation {
            ReferenceAggregation::Arithmetic => values.iter().sum::<f64>() / values.len() as f64,
            ReferenceAggregation::Geometric => {
                (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
            }
        };
        reference_ns.insert(feature.clone(), aggregated);
    }
    Ok(ReferenceBase { reference_ns, source_card_count: cards.len() })
}

/// A card's mark for one feature: reference time over measured time, so
/// faster-than-reference scores above 1.
pub fn compute_mark(reference_ns: f64, measured_ns: f64) -> Result<f64, ProfilerError> {
    if reference_ns.is_nan() || reference_ns <= 0.0 || measured_ns.is_nan() || measured_ns <= 0.0 {
        return Err(ProfilerError::NonPositiveInput { reference_ns, measured_ns });
    }
    Ok(reference_ns / measured_ns)
}

/// One feature's contribution within a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    /// The feature's occurrence proportion in the domain.
    pub weight: f64,
    /// Mark scaled by that proportion.
    pub weighted_mark: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainScore {
    pub features: BTreeMap<String, FeatureScore>,
    /// Sum of the weighted marks.
    pub global_mark: f64,
}

/// Per-feature marks and their domain roll-ups for one card.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub card_id: String,
    pub marks: BTreeMap<String, f64>,
    pub domains: BTreeMap<String, DomainScore>,
    /// Mean of the domain marks.
    pub overall: f64,
}

/// Combines feature marks with domain weights.
///
/// Every feature weighted in a domain needs a mark; features without weight
/// in a domain simply do not contribute there.
pub fn score(
    card_id: &str,
    marks: &BTreeMap<String, f64>,
    weights: &[DomainWeights],
) -> Result<ScoreCard, ProfilerError> {
    if weights.is_empty() {
        return Err(ProfilerError::NoDomains);
    }
    let mut domains = BTreeMap::new();
    for domain in weights {
        let mut features = BTreeMap::new();
        let mut global_mark = 0.0;
        for (feature, weight) in &domain.weights {
            let mark = *marks.get(feature).ok_or_else(|| ProfilerError::FeatureWithoutMark {
                feature: feature.clone(),
                domain: domain.domain.clone(),
            })?;
            let weighted_mark = mark * weight;
            global_mark += weighted_mark;
            features.insert(feature.clone(), FeatureScore { weight: *weight, weighted_mark });
        }
        domains.insert(domain.domain.clone(), DomainScore { features, global_mark });
    }
    let overall = domains.values().map(|d| d.global_mark).sum::<f64>() / domains.len() as f64;
    Ok(ScoreCard { card_id: card_id.to_string(), marks: marks.clone(), domains, overall })
}
