//! Deterministic simulated card.
//!
//! A [`SimDevice`] answers APDUs for a validated applet suite, charging a
//! fixed per-exchange overhead plus, for run-phase commands, the looped cost
//! of the selected case's run body under the profile's noise model.

mod device;
mod profile;

pub use device::{sample_noise, DeviceError, SimDevice};
pub use device::{P1_CLEANUP, P1_RUN, P1_SETUP};
pub use device::{SW_INS_NOT_SUPPORTED, SW_INTERNAL_ERROR, SW_SUCCESS, SW_WRONG_P1P2};
pub use profile::{DeviceProfile, NoiseModel, ProfileError};
