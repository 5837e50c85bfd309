//! The simulated card itself.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use thiserror::Error;

use crate::suite::AppletSuite;
use crate::transport::{ApduCommand, ApduResponse};

use super::{DeviceProfile, NoiseModel};

pub const SW_SUCCESS: u16 = 0x9000;
pub const SW_INS_NOT_SUPPORTED: u16 = 0x6D00;
pub const SW_WRONG_P1P2: u16 = 0x6A86;
pub const SW_INTERNAL_ERROR: u16 = 0x6F00;

/// P1 selects the life-cycle phase of the addressed test case.
pub const P1_SETUP: u8 = 0x00;
pub const P1_RUN: u8 = 0x01;
pub const P1_CLEANUP: u8 = 0x02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("profile {profile:?} lacks a latency for feature {feature:?} used by case {case:?}")]
    MissingLatency { profile: String, feature: String, case: String },
}

/// Draws one noise value in nanoseconds. May be negative; callers clamp the
/// resulting duration at zero.
///
/// The model must satisfy the profile invariants (validated at load time).
pub fn sample_noise(model: &NoiseModel, rng: &mut impl Rng) -> i64 {
    match model {
        NoiseModel::None => 0,
        NoiseModel::Gaussian { sigma } => gaussian_draw(*sigma, rng),
        NoiseModel::Stepped { step, weights, jitter_sigma } => {
            let index = WeightedIndex::new(weights).expect("weights validated at profile load");
            let multiple = index.sample(rng) as u64;
            let quantized = step.saturating_mul(multiple);
            i64::try_from(quantized)
                .unwrap_or(i64::MAX)
                .saturating_add(gaussian_draw(*jitter_sigma, rng))
        }
    }
}

fn gaussian_draw(sigma: f64, rng: &mut impl Rng) -> i64 {
    if sigma <= 0.0 {
        return 0;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated at profile load");
    normal.sample(rng).round() as i64
}

/// A card that executes the applet suite with the timing of one profile.
///
/// Identical (profile, suite, seed, command sequence) always produce
/// identical durations.
#[derive(Debug, Clone)]
pub struct SimDevice {
    profile: DeviceProfile,
    suite: AppletSuite,
    rng: ChaCha8Rng,
    // per INS: summed op latencies of the case's run body
    body_cost: BTreeMap<u8, u64>,
}

impl SimDevice {
    /// Builds a device seeded from the profile's own `rng_seed`.
    pub fn new(profile: DeviceProfile, suite: AppletSuite) -> Result<Self, DeviceError> {
        let seed = profile.rng_seed;
        Self::with_seed(profile, suite, seed)
    }

    /// Builds a device with an explicit seed, overriding the profile's.
    pub fn with_seed(
        profile: DeviceProfile,
        suite: AppletSuite,
        seed: u64,
    ) -> Result<Self, DeviceError> {
        let mut body_cost = BTreeMap::new();
        for case in suite.cases() {
            let mut total: u64 = 0;
            for feature in case.run_body() {
                let latency = profile.op_latencies_ns.get(feature).ok_or_else(|| {
                    DeviceError::MissingLatency {
                        profile: profile.name.clone(),
                        feature: feature.to_string(),
                        case: case.id.clone(),
                    }
                })?;
                total = total.saturating_add(*latency);
            }
            body_cost.insert(case.ins, total);
        }
        Ok(Self { profile, suite, rng: ChaCha8Rng::seed_from_u64(seed), body_cost })
    }

    pub fn profile(&self) -> &DeviceProfile {
        &self.profile
    }

    pub fn suite(&self) -> &AppletSuite {
        &self.suite
    }

    /// Executes one command and reports how long the card was busy.
    ///
    /// Failures are in-band status words: unknown INS, P2 of zero (the loop
    /// size must be positive), unknown P1, or a latency missing at dispatch
    /// time. Failed exchanges cost the exchange overhead only; run-phase
    /// successes add `L * (per-iteration overhead + run-body cost)` with
    /// `L = P2^2`, plus one noise draw, clamped at zero.
    pub fn handle_apdu(&mut self, command: &ApduCommand) -> (ApduResponse, u64) {
        let overhead = self.profile.exchange_overhead_ns;
        let failure = |sw: u16| (ApduResponse { data: Vec::new(), sw }, overhead);

        if self.suite.case_by_ins(command.ins).is_none() {
            return failure(SW_INS_NOT_SUPPORTED);
        }
        if command.p2 == 0 {
            return failure(SW_WRONG_P1P2);
        }
        match command.p1 {
            P1_SETUP | P1_CLEANUP => (ApduResponse { data: Vec::new(), sw: SW_SUCCESS }, overhead),
            P1_RUN => {
                let Some(&body) = self.body_cost.get(&command.ins) else {
                    return failure(SW_INTERNAL_ERROR);
                };
                let loops = (command.p2 as u64) * (command.p2 as u64);
                let iteration = self.profile.per_iteration_overhead_ns.saturating_add(body);
                let base = overhead.saturating_add(loops.saturating_mul(iteration));
                let noise = sample_noise(&self.profile.noise, &mut self.rng);
                let duration = if noise < 0 {
                    base.saturating_sub(noise.unsigned_abs())
                } else {
                    base.saturating_add(noise as u64)
                };
                (ApduResponse { data: Vec::new(), sw: SW_SUCCESS }, duration)
            }
            _ => failure(SW_WRONG_P1P2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suite::{CaseKind, TestCaseSpec};

    fn demo_profile() -> DeviceProfile {
        DeviceProfile::from_json(
            r#"{
                "name": "demo-card",
                "exchange_overhead_ns": 1000000,
                "per_iteration_overhead_ns": 500,
                "rng_seed": 42,
                "op_latencies_ns": {"sadd": 10000, "sspush": 3000},
                "noise": {"variant": "none"}
            }"#,
        )
        .unwrap()
    }

    fn demo_suite() -> AppletSuite {
        let case = |id: &str, ins: u8, aux: &[&str]| TestCaseSpec {
            id: id.into(),
            ins,
            kind: CaseKind::Bytecode,
            auxiliaries: aux.iter().map(|s| s.to_string()).collect(),
            reference_id: "Emptyloop".into(),
        };
        AppletSuite::new(vec![
            case("Emptyloop", 0, &[]),
            case("sspush", 1, &[]),
            case("sadd", 2, &["sspush", "sspush"]),
        ])
        .unwrap()
    }

    fn run(ins: u8, p1: u8, p2: u8) -> ApduCommand {
        ApduCommand { cla: 0x80, ins, p1, p2, data: Vec::new() }
    }

    #[test]
    fn empty_loop_duration_is_affine_in_loop_size() {
        let mut device = SimDevice::new(demo_profile(), demo_suite()).unwrap();
        // L = 41^2 = 1681: overhead + 1681 * 500
        let (response, duration) = device.handle_apdu(&run(0, P1_RUN, 41));
        assert_eq!(response.sw, SW_SUCCESS);
        assert_eq!(duration, 1_840_500);
    }

    #[test]
    fn run_body_cost_includes_auxiliaries() {
        let mut device = SimDevice::new(demo_profile(), demo_suite()).unwrap();
        // body = 3000 + 3000 + 10000, plus 500 per-iteration overhead
        let (_, duration) = device.handle_apdu(&run(2, P1_RUN, 41));
        assert_eq!(duration, 1_000_000 + 1681 * 16_500);
        assert_eq!(duration, 28_736_500);
    }

    #[test]
    fn setup_and_cleanup_cost_overhead_only() {
        let mut device = SimDevice::new(demo_profile(), demo_suite()).unwrap();
        for p1 in [P1_SETUP, P1_CLEANUP] {
            let (response, duration) = device.handle_apdu(&run(2, p1, 41));
            assert_eq!(response.sw, SW_SUCCESS);
            assert_eq!(duration, 1_000_000);
        }
    }

    #[test]
    fn unknown_ins_is_rejected_in_band() {
        let mut device = SimDevice::new(demo_profile(), demo_suite()).unwrap();
        let (response, duration) = device.handle_apdu(&run(0xFF, P1_RUN, 41));
        assert_eq!(response.sw, SW_INS_NOT_SUPPORTED);
        assert_eq!(duration, 1_000_000);
    }

    #[test]
    fn zero_p2_is_rejected() {
        let mut device = SimDevice::new(demo_profile(), demo_suite()).unwrap();
        let (response, _) = device.handle_apdu(&run(2, P1_RUN, 0));
        assert_eq!(response.sw, SW_WRONG_P1P2);
    }

    #[test]
    fn unknown_phase_is_rejected() {
        let mut device = SimDevice::new(demo_profile(), demo_suite()).unwrap();
        let (response, _) = device.handle_apdu(&run(2, 0x07, 41));
        assert_eq!(response.sw, SW_WRONG_P1P2);
    }

    #[test]
    fn missing_latency_is_caught_at_construction() {
        let mut profile = demo_profile();
        profile.op_latencies_ns.remove("sadd");
        let err = SimDevice::new(profile, demo_suite()).unwrap_err();
        assert_eq!(
            err,
            DeviceError::MissingLatency {
                profile: "demo-card".into(),
                feature: "sadd".into(),
                case: "sadd".into()
            }
        );
    }

    #[test]
    fn identical_seeds_produce_identical_noise_sequences() {
        let mut profile = demo_profile();
        profile.noise = NoiseModel::Gaussian { sigma: 50_000.0 };
        let mut a = SimDevice::with_seed(profile.clone(), demo_suite(), 7).unwrap();
        let mut b = SimDevice::with_seed(profile, demo_suite(), 7).unwrap();
        for _ in 0..50 {
            let (_, da) = a.handle_apdu(&run(2, P1_RUN, 41));
            let (_, db) = b.handle_apdu(&run(2, P1_RUN, 41));
            assert_eq!(da, db);
        }
    }

    #[test]
    fn gaussian_noise_is_centered_on_the_exact_duration() {
        let mut profile = demo_profile();
        profile.noise = NoiseModel::Gaussian { sigma: 50_000.0 };
        let mut device = SimDevice::with_seed(profile, demo_suite(), 3).unwrap();
        let n = 2000u64;
        let sum: u128 = (0..n).map(|_| device.handle_apdu(&run(0, P1_RUN, 41)).1 as u128).sum();
        let mean = sum as f64 / n as f64;
        // zero-mean noise: the sample mean stays within a few standard errors
        let tolerance = 5.0 * 50_000.0 / (n as f64).sqrt();
        assert!((mean - 1_840_500.0).abs() < tolerance, "mean {mean}");
    }

    #[test]
    fn stepped_noise_quantizes_to_step_multiples() {
        let mut profile = demo_profile();
        profile.noise =
            NoiseModel::Stepped { step: 200_000, weights: vec![0.5, 0.3, 0.2], jitter_sigma: 0.0 };
        let mut device = SimDevice::with_seed(profile, demo_suite(), 9).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..500 {
            let (_, duration) = device.handle_apdu(&run(0, P1_RUN, 41));
            let offset = duration - 1_840_500;
            assert_eq!(offset % 200_000, 0, "offset {offset} not on the step grid");
            seen.insert(offset / 200_000);
        }
        assert_eq!(seen, [0u64, 1, 2].into_iter().collect());
    }

    #[test]
    fn sample_noise_none_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_noise(&NoiseModel::None, &mut rng), 0);
        assert_eq!(sample_noise(&NoiseModel::Gaussian { sigma: 0.0 }, &mut rng), 0);
    }
}
