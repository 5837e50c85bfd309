//! Finding the smallest loop size that meets a precision policy.

use serde::{Deserialize, Serialize};

use crate::harness::bench::{collect_run_samples, exchange_phase};
use crate::harness::HarnessError;
use crate::sim::{P1_CLEANUP, P1_SETUP};
use crate::stats::MeasurementStats;
use crate::suite::TestCaseSpec;
use crate::transport::Channel;

/// Loop size as carried on the wire: the run phase repeats its body
/// `p2^2` times, so one byte spans loop counts up to 65025.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LoopSizeDoc", into = "LoopSizeDoc")]
pub struct LoopSize {
    p2: u8,
    loops: u32,
}

impl LoopSize {
    pub fn new(p2: u8) -> Result<Self, HarnessError> {
        if p2 == 0 {
            return Err(HarnessError::InvalidLoopFactor);
        }
        Ok(Self { p2, loops: u32::from(p2) * u32::from(p2) })
    }

    /// The byte sent as P2.
    pub fn p2(&self) -> u8 {
        self.p2
    }

    /// Run-body repetitions per exchange: `p2^2`.
    pub fn loops(&self) -> u32 {
        self.loops
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoopSizeDoc {
    p2: u8,
    loops: u32,
}

impl TryFrom<LoopSizeDoc> for LoopSize {
    type Error = String;

    fn try_from(doc: LoopSizeDoc) -> Result<Self, Self::Error> {
        let size = LoopSize::new(doc.p2).map_err(|e| e.to_string())?;
        if size.loops != doc.loops {
            return Err(format!(
                "loop count {} does not match p2 {} (expected {})",
                doc.loops, doc.p2, size.loops
            ));
        }
        Ok(size)
    }
}

impl From<LoopSize> for LoopSizeDoc {
    fn from(size: LoopSize) -> Self {
        Self { p2: size.p2, loops: size.loops }
    }
}

/// When a loop size counts as good enough.
///
/// Both criteria must hold over a confirmation batch: the mean exchange must
/// run at least `min_duration_ns`, and the spread `std_dev / mean` must not
/// exceed `ratio`. Calibration probes candidate sizes with `probe_reps`
/// cheap measurements and confirms the winner with `confirm_reps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationPolicy {
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default = "default_min_duration_ns")]
    pub min_duration_ns: u64,
    #[serde(default = "default_probe_reps")]
    pub probe_reps: usize,
    #[serde(default = "default_confirm_reps")]
    pub confirm_reps: usize,
}

fn default_ratio() -> f64 {
    0.02
}

fn default_min_duration_ns() -> u64 {
    1_000_000_000
}

fn default_probe_reps() -> usize {
    10
}

fn default_confirm_reps() -> usize {
    30
}

impl Default for CalibrationPolicy {
    fn default() -> Self {
        Self {
            ratio: default_ratio(),
            min_duration_ns: default_min_duration_ns(),
            probe_reps: default_probe_reps(),
            confirm_reps: default_confirm_reps(),
        }
    }
}

impl CalibrationPolicy {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.ratio.is_nan() || self.ratio <= 0.0 {
            return Err(HarnessError::InvalidPolicy(format!(
                "spread ratio must be positive, got {}",
                self.ratio
            )));
        }
        if self.probe_reps < 2 || self.confirm_reps < 2 {
            return Err(HarnessError::InvalidPolicy(format!(
                "probe and confirm repetitions must each be at least 2, got {} and {}",
                self.probe_reps, self.confirm_reps
            )));
        }
        Ok(())
    }

    /// Checks a confirmation batch against both criteria.
    ///
    /// A spread of exactly zero always passes the ratio criterion, so a
    /// noise-free device calibrates on duration alone.
    pub fn is_met(&self, stats: &MeasurementStats) -> bool {
        if stats.mean < self.min_duration_ns as f64 {
            return false;
        }
        stats.std_dev == 0.0 || (stats.mean > 0.0 && stats.std_dev / stats.mean <= self.ratio)
    }
}

/// Finds the smallest loop size satisfying `policy` for `case`.
///
/// Mean exchange time grows linearly with the loop count, so a binary search
/// over the loop factor against the duration criterion (probed with
/// `probe_reps` exchanges each) lands on the duration-minimal candidate.
/// That candidate is then confirmed against both criteria with
/// `confirm_reps` exchanges, advancing one factor at a time if the spread
/// ratio still fails.
pub fn calibrate<C: Channel + ?Sized>(
    channel: &mut C,
    case: &TestCaseSpec,
    policy: &CalibrationPolicy,
) -> Result<LoopSize, HarnessError> {
    policy.validate()?;
    exchange_phase(channel, case, P1_SETUP, 1)?;
    let result = search(channel, case, policy);
    // Cleanup is owed even when calibration fails; keep the first error.
    let cleanup = exchange_phase(channel, case, P1_CLEANUP, 1);
    let size = result?;
    cleanup?;
    Ok(size)
}

fn search<C: Channel + ?Sized>(
    channel: &mut C,
    case: &TestCaseSpec,
    policy: &CalibrationPolicy,
) -> Result<LoopSize, HarnessError> {
    let min_duration = policy.min_duration_ns as f64;
    let mut lo: u16 = 1;
    let mut hi: u16 = 255;
    while lo < hi {
        let mid = (lo + hi) / 2;
        let size = LoopSize::new(mid as u8)?;
        let probe = collect_run_samples(channel, case, size, policy.probe_reps)?;
        if probe.mean()? >= min_duration {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }

    let mut candidate = lo;
    while candidate <= 255 {
        let size = LoopSize::new(candidate as u8)?;
        let confirm = collect_run_samples(channel, case, size, policy.confirm_reps)?;
        let stats = confirm.stats()?;
        if policy.is_met(&stats) {
            return Ok(size);
        }
        log::debug!(
            "case `{}`: loop factor {candidate} rejected (mean {:.0} ns, spread {:.0} ns)",
            case.id,
            stats.mean,
            stats.std_dev
        );
        candidate += 1;
    }
    Err(HarnessError::CalibrationFailed {
        case_id: case.id.clone(),
        reason: format!(
            "no loop factor up to 255 reaches a mean of {} ns with spread ratio <= {}",
            policy.min_duration_ns, policy.ratio
        ),
    })
}
