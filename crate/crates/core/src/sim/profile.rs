//! Device profiles: per-operation latencies, overheads and noise.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("profile document is not valid JSON: {0}")]
    Parse(String),
    #[error("profile violates an invariant: {0}")]
    Invariant(String),
}

/// Additive noise applied to run-phase exchange durations.
///
/// Draws are signed; the device clamps the total duration at zero, so a
/// negative draw can never produce a negative exchange time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNoise", into = "RawNoise")]
pub enum NoiseModel {
    /// Exact durations.
    None,
    /// Zero-mean gaussian jitter with the given standard deviation.
    Gaussian { sigma: f64 },
    /// A driver-style quantized delay: `step * k` nanoseconds where `k` is
    /// drawn from `weights` (index = multiple), plus zero-mean gaussian
    /// jitter of `jitter_sigma`.
    Stepped { step: u64, weights: Vec<f64>, jitter_sigma: f64 },
}

impl NoiseModel {
    fn validate(&self) -> Result<(), ProfileError> {
        match self {
            NoiseModel::None => Ok(()),
            NoiseModel::Gaussian { sigma } => {
                if !sigma.is_finite() || *sigma < 0.0 {
                    return Err(ProfileError::Invariant(format!(
                        "gaussian sigma must be finite and non-negative, got {sigma}"
                    )));
                }
                Ok(())
            }
            NoiseModel::Stepped { step, weights, jitter_sigma } => {
                if *step == 0 {
                    return Err(ProfileError::Invariant("stepped step must be positive".into()));
                }
                if weights.is_empty() {
                    return Err(ProfileError::Invariant(
                        "stepped weights must be non-empty".into(),
                    ));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(ProfileError::Invariant(
                        "stepped weights must be finite and non-negative".into(),
                    ));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(ProfileError::Invariant(format!(
                        "stepped weights must sum to 1, got {total}"
                    )));
                }
                if !jitter_sigma.is_finite() || *jitter_sigma < 0.0 {
                    return Err(ProfileError::Invariant(format!(
                        "stepped jitter_sigma must be finite and non-negative, got {jitter_sigma}"
                    )));
                }
                Ok(())
            }
        }
    }
}

// Wire form of the noise object: a `variant` discriminator plus the fields
// that variant needs, nothing else.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    variant: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    step: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    jitter_sigma: Option<f64>,
}

impl TryFrom<RawNoise> for NoiseModel {
    type Error = String;

    fn try_from(raw: RawNoise) -> Result<Self, String> {
        let reject_extra = |field: &str, present: bool| {
            if present {
                Err(format!("noise variant {:?} does not take {field}", raw.variant))
            } else {
                Ok(())
            }
        };
        match raw.variant.as_str() {
            "none" => {
                reject_extra("sigma", raw.sigma.is_some())?;
                reject_extra("step", raw.step.is_some())?;
                reject_extra("weights", raw.weights.is_some())?;
                reject_extra("jitter_sigma", raw.jitter_sigma.is_some())?;
                Ok(NoiseModel::None)
            }
            "gaussian" => {
                reject_extra("step", raw.step.is_some())?;
                reject_extra("weights", raw.weights.is_some())?;
                reject_extra("jitter_sigma", raw.jitter_sigma.is_some())?;
                let sigma = raw.sigma.ok_or("gaussian noise requires sigma")?;
                Ok(NoiseModel::Gaussian { sigma })
            }
            "stepped" => {
                reject_extra("sigma", raw.sigma.is_some())?;
                Ok(NoiseModel::Stepped {
                    step: raw.step.ok_or("stepped noise requires step")?,
                    weights: raw.weights.ok_or("stepped noise requires weights")?,
                    jitter_sigma: raw.jitter_sigma.ok_or("stepped noise requires jitter_sigma")?,
                })
            }
            other => Err(format!("unknown noise variant {other:?}")),
        }
    }
}

impl From<NoiseModel> for RawNoise {
    fn from(model: NoiseModel) -> Self {
        let mut raw = RawNoise {
            variant: String::new(),
            sigma: None,
            step: None,
            weights: None,
            jitter_sigma: None,
        };
        match model {
            NoiseModel::None => raw.variant = "none".into(),
            NoiseModel::Gaussian { sigma } => {
                raw.variant = "gaussian".into();
                raw.sigma = Some(sigma);
            }
            NoiseModel::Stepped { step, weights, jitter_sigma } => {
                raw.variant = "stepped".into();
                raw.step = Some(step);
                raw.weights = Some(weights);
                raw.jitter_sigma = Some(jitter_sigma);
            }
        }
        raw
    }
}

/// Timing characteristics of one card behind a reader.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfile {
    pub name: String,
    /// Fixed cost charged to every exchange (transport, dispatch).
    pub exchange_overhead_ns: u64,
    /// Loop bookkeeping cost charged once per iteration.
    pub per_iteration_overhead_ns: u64,
    pub rng_seed: u64,
    /// Execution time of each operation the applet can run.
    pub op_latencies_ns: BTreeMap<String, u64>,
    pub noise: NoiseModel,
}

impl DeviceProfile {
    /// Parses and validates a profile document. Unknown keys are errors.
    pub fn from_json(document: &str) -> Result<Self, ProfileError> {
        let profile: DeviceProfile =
            serde_json::from_str(document).map_err(|e| ProfileError::Parse(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.name.is_empty() {
            return Err(ProfileError::Invariant("profile name must be non-empty".into()));
        }
        self.noise.validate()
    }
}
