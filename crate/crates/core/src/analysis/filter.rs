//! Confidence-interval outlier rejection.

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisError;
use crate::stats::MeasurementSet;

/// Width of the retention interval, in standard deviations around the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterPolicy {
    #[serde(default = "default_n_sigma")]
    pub n_sigma: f64,
    #[serde(default = "default_min_retained")]
    pub min_retained: usize,
}

fn default_n_sigma() -> f64 {
    2.0
}

fn default_min_retained() -> usize {
    2
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self { n_sigma: default_n_sigma(), min_retained: default_min_retained() }
    }
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.n_sigma.is_nan() || self.n_sigma <= 0.0 {
            return Err(AnalysisError::InvalidPolicy(format!(
                "interval width must be positive, got {} sigma",
                self.n_sigma
            )));
        }
        Ok(())
    }
}

/// Retains the samples inside `[mean - n_sigma * std_dev, mean + n_sigma * std_dev]`.
///
/// The interval is computed once from the input set and applied in a single
/// pass; bounds are inclusive. Retained samples keep their original sequence
/// indices, and the returned set's statistics describe only the survivors.
pub fn filter_confidence(
    set: &MeasurementSet,
    policy: &FilterPolicy,
) -> Result<MeasurementSet, AnalysisError> {
    policy.validate()?;
    let stats = set.stats()?;
    if stats.count < 2 {
        return Err(AnalysisError::Stats(crate::stats::StatsError::InsufficientSamples {
            needed: 2,
            got: stats.count,
        }));
    }
    // Zero spread means every sample equals the mean; the interval is that
    // single point and everything stays.
    if stats.std_dev == 0.0 {
        return Ok(set.clone());
    }
    let lo = stats.mean - policy.n_sigma * stats.std_dev;
    let hi = stats.mean + policy.n_sigma * stats.std_dev;
    let retained: Vec<_> = set
        .samples()
        .iter()
        .filter(|s| {
            let d = s.duration_ns as f64;
            d >= lo && d <= hi
        })
        .cloned()
        .collect();
    if retained.len() < policy.min_retained {
        return Err(AnalysisError::OverFiltered {
            retained: retained.len(),
            total: set.len(),
            min_retained: policy.min_retained,
        });
    }
    Ok(MeasurementSet::from_samples(set.test_id(), set.loop_size(), retained)?)
}
