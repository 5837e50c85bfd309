//! Benchmarking core for smart-card platform measurement.
//!
//! The crate measures how long a card takes to execute individual operations
//! by timing APDU exchanges against an applet that runs each operation inside
//! a loop of known size, then subtracting the cost of an empty loop measured
//! at the same size. Everything needed for that pipeline lives here:
//!
//! - [`stats`]: sample statistics, normality testing, latency-histogram peaks
//! - [`suite`]: test-case descriptions and the applet suite they form
//! - [`sim`]: a deterministic simulated card with configurable noise
//! - [`transport`]: APDU framing plus virtual-clock and TCP channels
//! - [`harness`]: loop-size calibration and measurement campaigns
//! - [`analysis`]: confidence filtering and per-operation isolation
//! - [`profiler`]: trace-driven usage weights and performance scoring
//! - [`sweep`]: multi-seed campaign sweeps (data-parallel with the
//!   `parallel` feature, sequential otherwise)

pub mod analysis;
pub mod harness;
pub mod profiler;
pub mod sim;
pub mod stats;
pub mod suite;
pub mod sweep;
pub mod transport;

pub use analysis::{filter_confidence, isolate_all, isolate_one, relative_deviation};
pub use harness::{calibrate, run_bench, run_suite, CalibrationPolicy, LoopSize};
pub use sim::{DeviceProfile, NoiseModel, SimDevice};
pub use stats::{MeasurementSet, MeasurementStats, RawSample};
pub use suite::{AppletSuite, CaseKind, TestCaseSpec};
pub use transport::{ApduCommand, ApduResponse, Channel, InProcessChannel, TcpChannel};
