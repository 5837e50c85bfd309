//! End-to-end campaigns against the simulated card: calibrate, bench,
//! filter, isolate, and compare the recovered per-operation times with the
//! latencies the device was configured with.

use std::collections::BTreeMap;

use mesure::analysis::{isolate_all, FilterPolicy, OpDependencyGraph};
use mesure::harness::{run_suite, CalibrationPolicy};
use mesure::sim::{DeviceProfile, NoiseModel, SimDevice};
use mesure::suite::{AppletSuite, CaseKind, TestCaseSpec};
use mesure::transport::InProcessChannel;
use proptest::prelude::*;

fn reference_case() -> TestCaseSpec {
    TestCaseSpec {
        id: "Emptyloop".into(),
        ins: 0x00,
        kind: CaseKind::Jcre,
        auxiliaries: vec![],
        reference_id: "Emptyloop".into(),
    }
}

fn op_case(id: &str, ins: u8, auxiliaries: &[&str]) -> TestCaseSpec {
    TestCaseSpec {
        id: id.into(),
        ins,
        kind: CaseKind::Bytecode,
        auxiliaries: auxiliaries.iter().map(|s| s.to_string()).collect(),
        reference_id: "Emptyloop".into(),
    }
}

fn profile(latencies: &[(&str, u64)], noise: NoiseModel) -> DeviceProfile {
    DeviceProfile {
        name: "pipeline-card".into(),
        exchange_overhead_ns: 1_000_000,
        per_iteration_overhead_ns: 500,
        rng_seed: 42,
        op_latencies_ns: latencies.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        noise,
    }
}

fn quick_policy() -> CalibrationPolicy {
    CalibrationPolicy { ratio: 0.05, min_duration_ns: 2_000_000, probe_reps: 4, confirm_reps: 6 }
}

fn run_campaign(
    profile: DeviceProfile,
    suite: AppletSuite,
    repetitions: usize,
) -> BTreeMap<String, f64> {
    let graph = OpDependencyGraph::from_suite(&suite);
    let device = SimDevice::new(profile, suite.clone()).expect("profile covers the suite");
    let mut channel = InProcessChannel::new(device);
    let results =
        run_suite(&mut channel, &suite, &quick_policy(), repetitions).expect("campaign succeeds");
    isolate_all(&results, &graph, &FilterPolicy::default())
        .expect("isolation succeeds")
        .into_iter()
        .map(|(id, isolated)| (id, isolated.mean_ns))
        .collect()
}

#[test]
fn noise_free_campaign_recovers_latencies_exactly() {
    let suite = AppletSuite::new(vec![
        reference_case(),
        op_case("sspush", 0x01, &[]),
        op_case("sadd", 0x02, &["sspush", "sspush"]),
    ])
    .unwrap();
    let profile = profile(&[("sadd", 10_000), ("sspush", 3_000)], NoiseModel::None);
    let recovered = run_campaign(profile, suite, 10);
    assert_eq!(recovered["sspush"], 3_000.0);
    assert_eq!(recovered["sadd"], 10_000.0);
}

#[test]
fn noisy_campaign_recovers_latencies_within_one_percent() {
    let suite = AppletSuite::new(vec![
        reference_case(),
        op_case("sspush", 0x01, &[]),
        op_case("sadd", 0x02, &["sspush", "sspush"]),
    ])
    .unwrap();
    // Exchange-level noise shrinks by the loop size once isolated, so a
    // longer floor buys precision: at 20 ms the 50 us sigma leaves only a
    // few nanoseconds of standard error per operation.
    let profile =
        profile(&[("sadd", 10_000), ("sspush", 3_000)], NoiseModel::Gaussian { sigma: 50_000.0 });
    let policy = CalibrationPolicy { min_duration_ns: 20_000_000, ..quick_policy() };
    let graph = OpDependencyGraph::from_suite(&suite);
    let device = SimDevice::new(profile, suite.clone()).unwrap();
    let mut channel = InProcessChannel::new(device);
    let results = run_suite(&mut channel, &suite, &policy, 30).unwrap();
    let recovered: BTreeMap<String, f64> = isolate_all(&results, &graph, &FilterPolicy::default())
        .unwrap()
        .into_iter()
        .map(|(id, isolated)| (id, isolated.mean_ns))
        .collect();
    assert!((recovered["sspush"] - 3_000.0).abs() / 3_000.0 < 0.01, "{recovered:?}");
    assert!((recovered["sadd"] - 10_000.0).abs() / 10_000.0 < 0.01, "{recovered:?}");
}

#[test]
fn deep_auxiliary_chains_cancel() {
    let suite = AppletSuite::new(vec![
        reference_case(),
        op_case("load", 0x01, &[]),
        op_case("add", 0x02, &["load", "load"]),
        op_case("store", 0x03, &["load", "add"]),
    ])
    .unwrap();
    let profile = profile(&[("load", 1_000), ("add", 4_000), ("store", 2_500)], NoiseModel::None);
    let recovered = run_campaign(profile, suite, 10);
    assert_eq!(recovered["load"], 1_000.0);
    assert_eq!(recovered["add"], 4_000.0);
    assert_eq!(recovered["store"], 2_500.0);
}

/// A randomly shaped dependency graph: op `i` may lean on any lower-numbered
/// op, each up to twice, which keeps the graph acyclic by construction.
fn arbitrary_workloads() -> impl Strategy<Value = (Vec<Vec<usize>>, Vec<u64>)> {
    (1usize..=4).prop_flat_map(|n_ops| {
        let shapes = proptest::collection::vec(proptest::collection::vec(0usize..=2, 4), n_ops);
        let latencies = proptest::collection::vec(1_000u64..=50_000, n_ops);
        (shapes, latencies).prop_map(move |(shapes, latencies)| {
            let aux: Vec<Vec<usize>> = shapes
                .iter()
                .enumerate()
                .map(|(i, counts)| {
                    let mut aux = Vec::new();
                    for (j, &count) in counts.iter().take(i).enumerate() {
                        for _ in 0..count {
                            aux.push(j);
                        }
                    }
                    aux
                })
                .collect();
            (aux, latencies)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Whatever the dependency shape, a noise-free campaign reproduces every
    // configured latency.
    #[test]
    fn random_workloads_round_trip((aux, latencies) in arbitrary_workloads()) {
        let names: Vec<String> = (0..latencies.len()).map(|i| format!("op{i}")).collect();
        let mut cases = vec![reference_case()];
        for (i, aux_indices) in aux.iter().enumerate() {
            let aux_names: Vec<&str> = aux_indices.iter().map(|&j| names[j].as_str()).collect();
            cases.push(op_case(&names[i], (i + 1) as u8, &aux_names));
        }
        let suite = AppletSuite::new(cases).unwrap();
        let latency_table: Vec<(&str, u64)> = names
            .iter()
            .map(|n| n.as_str())
            .zip(latencies.iter().copied())
            .collect();
        let recovered = run_campaign(profile(&latency_table, NoiseModel::None), suite, 5);
        for (name, expected) in &latency_table {
            let got = recovered[*name];
            let relative = (got - *expected as f64).abs() / *expected as f64;
            prop_assert!(relative <= 1e-9, "{name}: got {got}, expected {expected}");
        }
    }
}
