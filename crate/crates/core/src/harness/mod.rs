//! Loop-size calibration and measurement campaigns.
//!
//! A campaign runs each test case's applet through its three phases: one
//! setup exchange, a block of timed run exchanges at a calibrated loop size,
//! and one cleanup exchange. Only run-phase times enter the measurements.

mod bench;
mod calibrate;

pub use bench::{run_bench, run_suite, BenchPlan, CaseMeasurement, DEFAULT_REPETITIONS};
pub use calibrate::{calibrate, CalibrationPolicy, LoopSize};

use thiserror::Error;

use crate::stats::StatsError;
use crate::transport::TransportError;

/// Class byte used for every benchmark APDU; the device only dispatches on INS.
pub const APPLET_CLA: u8 = 0x80;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("device refused case `{case_id}` with status {sw:#06x}")]
    Device { case_id: String, sw: u16 },
    #[error("calibration failed for case `{case_id}`: {reason}")]
    CalibrationFailed { case_id: String, reason: String },
    #[error("invalid calibration policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid bench plan: {0}")]
    InvalidPlan(String),
    #[error("loop factor must be nonzero")]
    InvalidLoopFactor,
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("case `{case_id}`: {source}")]
    Case {
        case_id: String,
        #[source]
        source: Box<HarnessError>,
    },
}
