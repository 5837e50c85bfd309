//! Histogram peak detection for multimodal latency distributions.
//!
//! Noisy drivers quantize exchange times into separated clusters; the peak
//! report exposes where those clusters sit and how far apart they are.

use serde::{Deserialize, Serialize};

use super::StatsError;

/// Peaks keeping less than this fraction of the samples are ignored.
pub const DEFAULT_PEAK_MASS_THRESHOLD: f64 = 0.05;

const MIN_PEAK_SAMPLES: usize = 10;
const MAX_BINS: u64 = 1 << 24;

/// One histogram mode: `center_ns` is the bin midpoint (or midpoint average
/// for a plateau of equal-count bins), `mass` the fraction of all samples in
/// it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub center_ns: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    /// Peaks in ascending center order.
    pub peaks: Vec<Peak>,
    /// Median gap between neighbouring peak centers; absent below two peaks.
    pub step_estimate_ns: Option<f64>,
    pub bin_width_ns: f64,
}

/// Detects histogram peaks with the default mass threshold.
///
/// `bin_width` of `None` selects the Freedman-Diaconis width; a provided
/// width must be positive and finite. Needs at least 10 samples.
pub fn detect_peaks(durations: &[f64], bin_width: Option<f64>) -> Result<PeakReport, StatsError> {
    detect_peaks_with_threshold(durations, bin_width, DEFAULT_PEAK_MASS_THRESHOLD)
}

/// As [`detect_peaks`], with an explicit mass threshold in [0, 1).
pub fn detect_peaks_with_threshold(
    durations: &[f64],
    bin_width: Option<f64>,
    mass_threshold: f64,
) -> Result<PeakReport, StatsError> {
    let n = durations.len();
    if n < MIN_PEAK_SAMPLES {
        return Err(StatsError::InsufficientSamples { needed: MIN_PEAK_SAMPLES, got: n });
    }
    if durations.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFiniteSample);
    }
    if let Some(width) = bin_width {
        if !(width.is_finite() && width > 0.0) {
            return Err(StatsError::InvalidBinWidth { width });
        }
    }

    let mut sorted = durations.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
    let (min, max) = (sorted[0], sorted[n - 1]);
    let range = max - min;

    // All samples identical: a single mode at the shared value.
    if range <= 0.0 {
        return Ok(PeakReport {
            peaks: vec![Peak { center_ns: min, mass: 1.0 }],
            step_estimate_ns: None,
            bin_width_ns: bin_width.unwrap_or(1.0),
        });
    }

    let width = match bin_width {
        Some(w) => w,
        None => freedman_diaconis(&sorted),
    };
    // floor + 1 keeps a sample sitting exactly on the top edge in its own
    // bin instead of clamping it into the previous one
    let ratio = range / width;
    if !ratio.is_finite() || ratio >= MAX_BINS as f64 {
        return Err(StatsError::TooManyBins { bins: ratio as u64, max: MAX_BINS });
    }
    let bin_count = ratio.floor() as usize + 1;

    let mut counts = vec![0usize; bin_count];
    for &v in &sorted {
        let idx = (((v - min) / width) as usize).min(bin_count - 1);
        counts[idx] += 1;
    }

    let mut report = PeakReport {
        peaks: plateau_maxima(&counts, min, width, n, mass_threshold),
        step_estimate_ns: None,
        bin_width_ns: width,
    };
    report.step_estimate_ns = estimate_step(&report);
    Ok(report)
}

// 2 * IQR / n^(1/3); falls back to range-based sizing for degenerate IQR.
fn freedman_diaconis(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    let width = 2.0 * iqr / (n as f64).cbrt();
    if width.is_finite() && width > 0.0 {
        width
    } else {
        (sorted[n - 1] - sorted[0]) / (n as f64).sqrt()
    }
}

// Linearly interpolated quantile of a sorted sample.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

// Maximal runs of equal-count bins that dominate both neighbours; each run
// is one peak with the run's combined mass.
fn plateau_maxima(
    counts: &[usize],
    min: f64,
    width: f64,
    total: usize,
    mass_threshold: f64,
) -> Vec<Peak> {
    let center = |idx: usize| min + (idx as f64 + 0.5) * width;
    let mut peaks = Vec::new();
    let mut start = 0;
    while start < counts.len() {
        let mut end = start;
        while end + 1 < counts.len() && counts[end + 1] == counts[start] {
            end += 1;
        }
        let left = if start == 0 { 0 } else { counts[start - 1] };
        let right = if end + 1 == counts.len() { 0 } else { counts[end + 1] };
        let count = counts[start];
        if count > 0 && count >= left && count >= right {
            let run_len = end - start + 1;
            let mass = (count * run_len) as f64 / total as f64;
            if mass > mass_threshold {
                let center_sum: f64 = (start..=end).map(center).sum();
                peaks.push(Peak { center_ns: center_sum / run_len as f64, mass });
            }
        }
        start = end + 1;
    }
    peaks
}

/// Median gap between consecutive peak centers; `None` below two peaks.
/// An even gap count takes the lower of the two middle values.
pub fn estimate_step(report: &PeakReport) -> Option<f64> {
    if report.peaks.len() < 2 {
        return None;
    }
    let mut gaps: Vec<f64> =
        report.peaks.windows(2).map(|pair| pair[1].center_ns - pair[0].center_ns).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).expect("finite gaps"));
    Some(gaps[(gaps.len() - 1) / 2])
}
