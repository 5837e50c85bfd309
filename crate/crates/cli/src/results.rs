//! On-disk document schemas: results, weights, reference base, scorecard.
//!
//! Every document carries a top-level `schema_version` so consumers can
//! reject files written by an incompatible tool generation.

use std::collections::BTreeMap;
use std::path::Path;

use mesure::analysis::IsolatedTime;
use mesure::harness::LoopSize;
use mesure::profiler::{DomainWeights, ReferenceBase, ScoreCard};
use mesure::stats::{MeasurementSet, MeasurementStats, NormalityReport, PeakReport};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("reading {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: unsupported schema_version {found} (this tool reads {supported})")]
    SchemaVersion { path: String, found: u32, supported: u32 },
    #[error("{path}: isolated entry {feature:?} has no matching case")]
    DanglingIsolated { path: String, feature: String },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, DocumentError> {
    let display = path.display().to_string();
    let raw = std::fs::read_to_string(path)
        .map_err(|source| DocumentError::Read { path: display.clone(), source })?;
    serde_json::from_str(&raw).map_err(|source| DocumentError::Parse { path: display, source })
}

fn check_version(path: &Path, found: u32) -> Result<(), DocumentError> {
    if found != SCHEMA_VERSION {
        return Err(DocumentError::SchemaVersion {
            path: path.display().to_string(),
            found,
            supported: SCHEMA_VERSION,
        });
    }
    Ok(())
}

/// Serializes a document as pretty JSON with a trailing newline, the byte
/// format the determinism contract is stated over.
pub fn to_canonical_json<T: Serialize>(document: &T) -> String {
    let mut text = serde_json::to_string_pretty(document).expect("documents serialize");
    text.push('\n');
    text
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub device_name: String,
    /// The campaign configuration as loaded, overrides applied.
    pub config: crate::config::CampaignConfig,
    /// Channel-clock timestamps, nanoseconds.
    pub started_ns: u64,
    pub finished_ns: u64,
}

/// One measurement set with its derived statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetResult {
    pub raw: MeasurementSet,
    /// Statistics after the confidence filter.
    pub filtered: MeasurementStats,
    /// Absent when the set is outside the test's supported range (for
    /// example zero spread on a noise-free device).
    pub normality: Option<NormalityReport>,
    pub peaks: Option<PeakReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub loop_size: LoopSize,
    pub measured: SetResult,
    pub reference: SetResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub schema_version: u32,
    pub metadata: RunMetadata,
    pub cases: BTreeMap<String, CaseResult>,
    pub isolated: BTreeMap<String, IsolatedTime>,
}

impl ResultsDocument {
    pub fn load(path: &Path) -> Result<Self, DocumentError> {
        let doc: Self = read_json(path)?;
        check_version(path, doc.schema_version)?;
        for feature in doc.isolated.keys() {
            if !doc.cases.contains_key(feature) {
                return Err(DocumentError::DanglingIsolated {
                    path: path.display().to_string(),
                    feature: feature.clone(),
                });
            }
        }
        Ok(doc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsDocument {
    pub schema_version: u32,
    #[serde(flatten)]
    pub weights: DomainWeights,
}

impl WeightsDocument {
    pub fn new(weights: DomainWeights) -> Self {
        Self { schema_version: SCHEMA_VERSION, weights }
    }

    pub fn load(path: &Path) -> Result<Self, DocumentError> {
        let doc: Self = read_json(path)?;
        check_version(path, doc.schema_version)?;
        Ok(doc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDocument {
    pub schema_version: u32,
    #[serde(flatten)]
    pub base: ReferenceBase,
}

impl ReferenceDocument {
    pub fn new(base: ReferenceBase) -> Self {
        Self { schema_version: SCHEMA_VERSION, base }
    }

    pub fn load(path: &Path) -> Result<Self, DocumentError> {
        let doc: Self = read_json(path)?;
        check_version(path, doc.schema_version)?;
        Ok(doc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCardDocument {
    pub schema_version: u32,
    #[serde(flatten)]
    pub card: ScoreCard,
}

impl ScoreCardDocument {
    pub fn new(card: ScoreCard) -> Self {
        Self { schema_version: SCHEMA_VERSION, card }
    }

    pub fn load(path: &Path) -> Result<Self, DocumentError> {
        let doc: Self = read_json(path)?;
        check_version(path, doc.schema_version)?;
        Ok(doc)
    }
}

/// Loop sizes chosen by a calibration-only run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDocument {
    pub schema_version: u32,
    pub device_name: String,
    pub cases: BTreeMap<String, LoopSize>,
}

/// An isolated-times entry in a hand-written measurement file: either a
/// bare mean or the full record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeanEntry {
    Mean(f64),
    Full(IsolatedTime),
}

impl MeanEntry {
    pub fn mean_ns(&self) -> f64 {
        match self {
            MeanEntry::Mean(mean) => *mean,
            MeanEntry::Full(isolated) => isolated.mean_ns,
        }
    }
}

/// The minimal shape the scoring command accepts for one card's means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolatedDocument {
    pub schema_version: u32,
    #[serde(default)]
    pub card_id: Option<String>,
    pub isolated: BTreeMap<String, MeanEntry>,
}

/// Any file carrying per-feature means usable for scoring: a full results
/// document, a bare isolated document, or a previously written reference.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum MeansInput {
    Results(Box<ResultsDocument>),
    Reference(ReferenceDocument),
    Isolated(IsolatedDocument),
}

/// Per-feature means extracted from any accepted input, with the identity
/// the file implies (file stem as a last resort).
#[derive(Debug)]
pub struct ExtractedMeans {
    pub card_id: String,
    pub means: BTreeMap<String, f64>,
}

pub fn load_means(path: &Path) -> Result<ExtractedMeans, DocumentError> {
    let input: MeansInput = read_json(path)?;
    let stem = || {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string())
    };
    let (version, card_id, means) = match input {
        MeansInput::Results(doc) => (
            doc.schema_version,
            doc.metadata.device_name.clone(),
            doc.isolated.iter().map(|(k, v)| (k.clone(), v.mean_ns)).collect(),
        ),
        MeansInput::Reference(doc) => (doc.schema_version, stem(), doc.base.reference_ns),
        MeansInput::Isolated(doc) => (
            doc.schema_version,
            doc.card_id.clone().unwrap_or_else(stem),
            doc.isolated.iter().map(|(k, v)| (k.clone(), v.mean_ns())).collect(),
        ),
    };
    check_version(path, version)?;
    Ok(ExtractedMeans { card_id, means })
}
