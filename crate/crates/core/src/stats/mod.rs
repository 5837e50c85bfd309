//! Sample statistics over timed APDU exchanges.
//!
//! Durations are integer nanoseconds. Mean and standard deviation are
//! computed from exact integer moments so results do not depend on sample
//! order; conversion to `f64` happens once, at the end.

mod peaks;
mod shapiro;

pub use peaks::DEFAULT_PEAK_MASS_THRESHOLD;
pub use peaks::{detect_peaks, detect_peaks_with_threshold, estimate_step, Peak, PeakReport};
pub use shapiro::{shapiro_wilk, NormalityReport, MAX_SHAPIRO_SAMPLES, MIN_SHAPIRO_SAMPLES};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("measurement set is empty")]
    EmptySet,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("sample has zero variance")]
    ZeroVariance,
    #[error("sample size {n} outside supported range {min}..={max}")]
    SampleSizeOutOfRange { n: usize, min: usize, max: usize },
    #[error("duplicate sequence index {index}")]
    DuplicateSequenceIndex { index: u32 },
    #[error("loop size must be at least 1")]
    InvalidLoopSize,
    #[error("bin width must be positive and finite, got {width}")]
    InvalidBinWidth { width: f64 },
    #[error("histogram would need {bins} bins, more than the supported {max}")]
    TooManyBins { bins: u64, max: u64 },
    #[error("samples must be finite")]
    NonFiniteSample,
}

/// One timed exchange, as captured by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSample {
    pub duration_ns: u64,
    /// Position within the measurement run; unique per set.
    pub sequence_index: u32,
    /// Channel-clock reading when the sample was captured.
    pub wall_time_ns: u64,
}

/// Derived statistics of a [`MeasurementSet`].
///
/// `std_dev` is the sample standard deviation (n - 1 divisor); a
/// single-sample set reports 0.0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementStats {
    pub mean: f64,
    pub std_dev: f64,
    pub count: usize,
}

/// Samples collected for one test case at one loop size.
///
/// Integer moments are maintained on every write, so `mean`/`std_dev` are
/// always consistent with `samples` and independent of insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasurementSetDoc", into = "MeasurementSetDoc")]
pub struct MeasurementSet {
    test_id: String,
    loop_size: u32,
    samples: Vec<RawSample>,
    sum: u128,
    sum_sq: u128,
}

impl MeasurementSet {
    /// Creates an empty set. `loop_size` must be at least 1.
    pub fn new(test_id: impl Into<String>, loop_size: u32) -> Self {
        assert!(loop_size >= 1, "loop size must be at least 1");
        Self { test_id: test_id.into(), loop_size, samples: Vec::new(), sum: 0, sum_sq: 0 }
    }

    /// Builds a set from existing samples, rejecting duplicate sequence indices.
    pub fn from_samples(
        test_id: impl Into<String>,
        loop_size: u32,
        samples: Vec<RawSample>,
    ) -> Result<Self, StatsError> {
        let mut set = Self::new(test_id, loop_size);
        let mut seen: Vec<u32> = samples.iter().map(|s| s.sequence_index).collect();
        seen.sort_unstable();
        if let Some(dup) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(StatsError::DuplicateSequenceIndex { index: dup[0] });
        }
        for sample in &samples {
            set.accumulate(sample.duration_ns);
        }
        set.samples = samples;
        Ok(set)
    }

    /// Appends a sample, assigning the next sequence index.
    pub fn push(&mut self, duration_ns: u64, wall_time_ns: u64) {
        let sequence_index = self.samples.len() as u32;
        self.accumulate(duration_ns);
        self.samples.push(RawSample { duration_ns, sequence_index, wall_time_ns });
    }

    fn accumulate(&mut self, duration_ns: u64) {
        let d = duration_ns as u128;
        self.sum += d;
        self.sum_sq = self.sum_sq.saturating_add(d * d);
    }

    pub fn test_id(&self) -> &str {
        &self.test_id
    }

    pub fn loop_size(&self) -> u32 {
        self.loop_size
    }

    /// Exact sum of all durations, for callers that subtract sets with a
    /// common denominator before any floating-point rounding happens.
    pub fn total_ns(&self) -> u128 {
        self.sum
    }

    pub fn samples(&self) -> &[RawSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Durations as floating-point values, in sample order.
    pub fn durations(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.duration_ns as f64).collect()
    }

    /// Arithmetic mean of the durations.
    pub fn mean(&self) -> Result<f64, StatsError> {
        if self.samples.is_empty() {
            return Err(StatsError::EmptySet);
        }
        Ok(self.sum as f64 / self.samples.len() as f64)
    }

    /// Sample standard deviation (n - 1 divisor); needs at least two samples.
    pub fn std_dev(&self) -> Result<f64, StatsError> {
        let n = self.samples.len();
        if n < 2 {
            return Err(StatsError::InsufficientSamples { needed: 2, got: n });
        }
        Ok((self.variance_numerator(n).max(0.0) / ((n * (n - 1)) as f64)).sqrt())
    }

    // n * sum(x^2) - sum(x)^2 = n * (n - 1) * s^2, exact unless the integer
    // moments overflowed (durations near u64::MAX), where it falls back to a
    // two-pass float computation.
    fn variance_numerator(&self, n: usize) -> f64 {
        let exact = (n as u128)
            .checked_mul(self.sum_sq)
            .filter(|_| self.sum_sq < u128::MAX)
            .and_then(|a| self.sum.checked_mul(self.sum).map(|b| a - b));
        match exact {
            Some(num) => num as f64,
            None => {
                let mean = self.sum as f64 / n as f64;
                let ss: f64 = self
                    .samples
                    .iter()
                    .map(|s| {
                        let d = s.duration_ns as f64 - mean;
                        d * d
                    })
                    .sum();
                ss * n as f64
            }
        }
    }

    /// Mean and standard deviation together; errors only on an empty set.
    pub fn stats(&self) -> Result<MeasurementStats, StatsError> {
        let mean = self.mean()?;
        let std_dev = if self.samples.len() < 2 { 0.0 } else { self.std_dev()? };
        Ok(MeasurementStats { mean, std_dev, count: self.samples.len() })
    }
}

#[derive(Serialize, Deserialize)]
struct MeasurementSetDoc {
    test_id: String,
    loop_size: u32,
    samples: Vec<RawSample>,
    stats: Option<MeasurementStats>,
}

impl From<MeasurementSet> for MeasurementSetDoc {
    fn from(set: MeasurementSet) -> Self {
        let stats = set.stats().ok();
        Self { test_id: set.test_id, loop_size: set.loop_size, samples: set.samples, stats }
    }
}

impl TryFrom<MeasurementSetDoc> for MeasurementSet {
    type Error = StatsError;

    // Stored stats are advisory; moments are rebuilt from the samples.
    fn try_from(doc: MeasurementSetDoc) -> Result<Self, StatsError> {
        if doc.loop_size == 0 {
            return Err(StatsError::InvalidLoopSize);
        }
        Self::from_samples(doc.test_id, doc.loop_size, doc.samples)
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn durations() -> impl Strategy<Value = Vec<u64>> {
        proptest::collection::vec(0u64..1_000_000_000_000, 2..200)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        // Integer moments make both statistics independent of sample order.
        #[test]
        fn permutation_invariant(mut ds in durations(), seed in 0u64..1000) {
            let a = {
                let mut set = MeasurementSet::new("case", 1);
                for d in &ds { set.push(*d, 0); }
                (set.mean().unwrap(), set.std_dev().unwrap())
            };
            // deterministic shuffle driven by the seed
            let mut order: Vec<usize> = (0..ds.len()).collect();
            let mut state = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
            for i in (1..order.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                order.swap(i, (state % (i as u64 + 1)) as usize);
            }
            ds = order.iter().map(|&i| ds[i]).collect();
            let b = {
                let mut set = MeasurementSet::new("case", 1);
                for d in &ds { set.push(*d, 0); }
                (set.mean().unwrap(), set.std_dev().unwrap())
            };
            prop_assert_eq!(a, b);
        }

        // Shifting all durations by c moves the mean by c and leaves the
        // spread untouched.
        #[test]
        fn shift_moves_mean_only(ds in durations(), c in 0u64..1_000_000_000) {
            let base = {
                let mut set = MeasurementSet::new("case", 1);
                for d in &ds { set.push(*d, 0); }
                set
            };
            let shifted = {
                let mut set = MeasurementSet::new("case", 1);
                for d in &ds { set.push(*d + c, 0); }
                set
            };
            let expected = base.mean().unwrap() + c as f64;
            let got = shifted.mean().unwrap();
            prop_assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1.0));
            prop_assert_eq!(base.std_dev().unwrap(), shifted.std_dev().unwrap());
        }

        #[test]
        fn std_dev_is_nonnegative(ds in durations()) {
            let mut set = MeasurementSet::new("case", 1);
            for d in &ds { set.push(*d, 0); }
            prop_assert!(set.std_dev().unwrap() >= 0.0);
        }
    }
}
