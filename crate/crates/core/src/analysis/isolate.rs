//! Empty-loop subtraction and auxiliary-cost removal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{filter_confidence, AnalysisError, FilterPolicy};
use crate::harness::CaseMeasurement;
use crate::stats::MeasurementSet;
use crate::suite::AppletSuite;

/// Mean per-execution cost of one operation after subtracting its reference
/// and auxiliary operations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolatedTime {
    pub feature_id: String,
    pub mean_ns: f64,
    /// Combined spread of case and reference sets, scaled to one execution.
    pub spread_ns: f64,
    pub loop_size: u32,
    pub sample_count: usize,
}

/// Isolates one operation's cost from its measurement pair.
///
/// Per-execution cost is the difference of mean exchange times divided by
/// the loop count, minus the already-isolated means of the auxiliary
/// operations (one entry per execution, so an auxiliary used twice appears
/// twice). When both sets hold the same number of samples the difference is
/// taken on exact integer sums before any rounding, making the reference
/// subtraction cancel shared offsets bit-exactly.
///
/// A negative result is reported as-is with a warning: it signals noise
/// overwhelming the operation or a wrong auxiliary chain, and clamping
/// would hide that.
pub fn isolate_one(
    measured: &MeasurementSet,
    reference: &MeasurementSet,
    aux_means_ns: &[f64],
) -> Result<IsolatedTime, AnalysisError> {
    let loop_size = measured.loop_size();
    if reference.loop_size() != loop_size {
        return Err(AnalysisError::LoopSizeMismatch {
            measured: loop_size,
            reference: reference.loop_size(),
        });
    }
    let measured_stats = measured.stats()?;
    let reference_stats = reference.stats()?;

    let mean_difference = if measured_stats.count == reference_stats.count {
        (measured.total_ns() as i128 - reference.total_ns() as i128) as f64
            / measured_stats.count as f64
    } else {
        measured_stats.mean - reference_stats.mean
    };
    let per_execution = mean_difference / f64::from(loop_size);
    let mean_ns = per_execution - aux_means_ns.iter().sum::<f64>();
    if mean_ns < 0.0 {
        log::warn!(
            "feature `{}` isolated to {mean_ns:.1} ns; noise may be overwhelming it or its \
             auxiliary chain is wrong",
            measured.test_id()
        );
    }
    let spread_ns = (measured_stats.std_dev.powi(2) + reference_stats.std_dev.powi(2)).sqrt()
        / f64::from(loop_size);
    Ok(IsolatedTime {
        feature_id: measured.test_id().to_string(),
        mean_ns,
        spread_ns,
        loop_size,
        sample_count: measured_stats.count,
    })
}

/// Which auxiliary operations each operation's run body executes.
///
/// Edges keep multiplicity: an auxiliary listed twice is subtracted twice.
/// Construction rejects cyclic graphs; auxiliaries that are not nodes
/// themselves are treated as external leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpDependencyGraph {
    edges: BTreeMap<String, Vec<String>>,
}

impl OpDependencyGraph {
    pub fn new(edges: BTreeMap<String, Vec<String>>) -> Result<Self, AnalysisError> {
        let graph = Self { edges };
        graph.check_acyclic()?;
        Ok(graph)
    }

    /// One node per non-reference case, with its auxiliary list.
    pub fn from_suite(suite: &AppletSuite) -> Self {
        let edges = suite
            .cases()
            .iter()
            .filter(|case| !case.is_reference())
            .map(|case| (case.id.clone(), case.auxiliaries.clone()))
            .collect();
        Self::new(edges).expect("suite construction already rejects cycles")
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.edges.keys().map(String::as_str)
    }

    pub fn auxiliaries(&self, id: &str) -> &[String] {
        self.edges.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Nodes ordered so every auxiliary comes before its dependents;
    /// deterministic for a given graph.
    pub fn topological_order(&self) -> Vec<&str> {
        let mut resolved: Vec<&str> = Vec::new();
        let mut pending: Vec<&str> = self.edges.keys().map(String::as_str).collect();
        while !pending.is_empty() {
            let ready: Vec<&str> = pending
                .iter()
                .copied()
                .filter(|id| {
                    self.auxiliaries(id).iter().all(|aux| {
                        !self.edges.contains_key(aux) || resolved.contains(&aux.as_str())
                    })
                })
                .collect();
            assert!(!ready.is_empty(), "cycle slipped past construction");
            pending.retain(|id| !ready.contains(id));
            resolved.extend(ready);
        }
        resolved
    }

    fn check_acyclic(&self) -> Result<(), AnalysisError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Visiting,
            Done,
        }
        fn visit<'a>(
            graph: &'a OpDependencyGraph,
            id: &'a str,
            marks: &mut BTreeMap<&'a str, Mark>,
        ) -> Result<(), AnalysisError> {
            match marks.get(id) {
                Some(Mark::Done) => return Ok(()),
                Some(Mark::Visiting) => {
                    return Err(AnalysisError::CycleDetected { feature_id: id.to_string() })
                }
                None => {}
            }
            marks.insert(id, Mark::Visiting);
            for aux in graph.auxiliaries(id) {
                if graph.edges.contains_key(aux) {
                    visit(graph, aux, marks)?;
                }
            }
            marks.insert(id, Mark::Done);
            Ok(())
        }
        let mut marks = BTreeMap::new();
        for id in self.edges.keys() {
            visit(self, id, &mut marks)?;
        }
        Ok(())
    }
}

/// Filters every measurement pair, then isolates each graph node in
/// dependency order so auxiliary means are available when needed.
///
/// Measurements not named by the graph are ignored; a graph node without
/// measurements is an error.
pub fn isolate_all(
    results: &BTreeMap<String, CaseMeasurement>,
    graph: &OpDependencyGraph,
    filter: &FilterPolicy,
) -> Result<BTreeMap<String, IsolatedTime>, AnalysisError> {
    let mut isolated: BTreeMap<String, IsolatedTime> = BTreeMap::new();
    for node in graph.topological_order() {
        let one = results
            .get(node)
            .ok_or_else(|| AnalysisError::MissingMeasurement { feature_id: node.to_string() })?;
        let measured = filter_confidence(&one.measured, filter)?;
        let reference = filter_confidence(&one.reference, filter)?;
        let aux_means: Vec<f64> = graph
            .auxiliaries(node)
            .iter()
            .map(|aux| {
                isolated
                    .get(aux)
                    .map(|t| t.mean_ns)
                    .ok_or_else(|| AnalysisError::MissingMeasurement { feature_id: aux.clone() })
            })
            .collect::<Result<_, _>>()?;
        let time = isolate_one(&measured, &reference, &aux_means)?;
        isolated.insert(node.to_string(), time);
    }
    Ok(isolated)
}

/// How far a measured value sits from a trusted reference, as a fraction of
/// the reference.
pub fn relative_deviation(measured_ns: f64, reference_ns: f64) -> Result<f64, AnalysisError> {
    if reference_ns.is_nan() || reference_ns <= 0.0 {
        return Err(AnalysisError::ZeroReference);
    }
    Ok((measured_ns - reference_ns).abs() / reference_ns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::LoopSize;

    fn set_with(test_id: &str, loop_size: u32, durations: &[u64]) -> MeasurementSet {
        let mut set = MeasurementSet::new(test_id, loop_size);
        for &d in durations {
            set.push(d, 0);
        }
        set
    }

    #[test]
    fn equal_means_isolate_to_zero() {
        let measured = set_with("sadd", 100, &[5_000, 5_000]);
        let reference = set_with("Emptyloop", 100, &[5_000, 5_000]);
        let time = isolate_one(&measured, &reference, &[]).unwrap();
        assert_eq!(time.mean_ns, 0.0);
        assert_eq!(time.spread_ns, 0.0);
    }

    #[test]
    fn demo_arithmetic_recovers_the_known_cost() {
        let measured = set_with("sadd", 1681, &[28_736_500]);
        let reference = set_with("Emptyloop", 1681, &[1_840_500]);
        let time = isolate_one(&measured, &reference, &[3_000.0, 3_000.0]).unwrap();
        assert_eq!(time.mean_ns, 10_000.0);
        assert_eq!(time.loop_size, 1681);
        assert_eq!(time.sample_count, 1);
    }

    #[test]
    fn mismatched_loop_sizes_are_rejected() {
        let measured = set_with("sadd", 100, &[5_000, 5_000]);
        let reference = set_with("Emptyloop", 81, &[5_000, 5_000]);
        assert!(matches!(
            isolate_one(&measured, &reference, &[]).unwrap_err(),
            AnalysisError::LoopSizeMismatch { measured: 100, reference: 81 }
        ));
    }

    #[test]
    fn negative_isolation_is_reported_not_clamped() {
        let measured = set_with("odd", 10, &[1_000, 1_000]);
        let reference = set_with("Emptyloop", 10, &[2_000, 2_000]);
        let time = isolate_one(&measured, &reference, &[]).unwrap();
        assert_eq!(time.mean_ns, -100.0);
    }

    fn chain_results() -> BTreeMap<String, CaseMeasurement> {
        // Known device arithmetic: overhead 1 ms, 500 ns per iteration,
        // sspush 3000 ns, sadd 10000 ns with two sspush auxiliaries.
        let sspush = CaseMeasurement {
            loop_size: LoopSize::new(17).unwrap(),
            measured: set_with("sspush", 289, &[2_011_500, 2_011_500]),
            reference: set_with("Emptyloop", 289, &[1_144_500, 1_144_500]),
        };
        let sadd = CaseMeasurement {
            loop_size: LoopSize::new(8).unwrap(),
            measured: set_with("sadd", 64, &[2_056_000, 2_056_000]),
            reference: set_with("Emptyloop", 64, &[1_032_000, 1_032_000]),
        };
        BTreeMap::from([("sspush".to_string(), sspush), ("sadd".to_string(), sadd)])
    }

    fn chain_graph() -> OpDependencyGraph {
        OpDependencyGraph::new(BTreeMap::from([
            ("sspush".to_string(), vec![]),
            ("sadd".to_string(), vec!["sspush".to_string(), "sspush".to_string()]),
        ]))
        .unwrap()
    }

    #[test]
    fn chain_isolation_resolves_auxiliaries_first() {
        let isolated =
            isolate_all(&chain_results(), &chain_graph(), &FilterPolicy::default()).unwrap();
        assert_eq!(isolated["sspush"].mean_ns, 3_000.0);
        assert_eq!(isolated["sadd"].mean_ns, 10_000.0);
    }

    #[test]
    fn single_op_matches_isolate_one() {
        let results = chain_results();
        let graph =
            OpDependencyGraph::new(BTreeMap::from([("sspush".to_string(), vec![])])).unwrap();
        let all = isolate_all(&results, &graph, &FilterPolicy::default()).unwrap();
        let one =
            isolate_one(&results["sspush"].measured, &results["sspush"].reference, &[]).unwrap();
        assert_eq!(all["sspush"], one);
    }

    #[test]
    fn cycles_are_rejected_before_any_arithmetic() {
        let err = OpDependencyGraph::new(BTreeMap::from([
            ("a".to_string(), vec!["b".to_string()]),
            ("b".to_string(), vec!["a".to_string()]),
        ]))
        .unwrap_err();
        assert!(matches!(err, AnalysisError::CycleDetected { .. }));
    }

    #[test]
    fn missing_measurement_names_the_feature() {
        let mut results = chain_results();
        results.remove("sspush");
        let err = isolate_all(&results, &chain_graph(), &FilterPolicy::default()).unwrap_err();
        match err {
            AnalysisError::MissingMeasurement { feature_id } => assert_eq!(feature_id, "sspush"),
            other => panic!("expected MissingMeasurement, got {other:?}"),
        }
    }

    #[test]
    fn deviation_matches_published_style_figures() {
        let high = relative_deviation(11_380.83, 10_611.57).unwrap();
        assert!((high - 0.0725).abs() < 1e-4, "got {high}");
        let low = relative_deviation(10_260.65, 10_611.57).unwrap();
        assert!((low - 0.0331).abs() < 1e-4, "got {low}");
    }

    #[test]
    fn deviation_of_identical_values_is_zero() {
        assert_eq!(relative_deviation(5_000.0, 5_000.0).unwrap(), 0.0);
    }

    #[test]
    fn non_positive_reference_is_rejected() {
        for reference in [0.0, -10.0, f64::NAN] {
            assert!(matches!(
                relative_deviation(1.0, reference).unwrap_err(),
                AnalysisError::ZeroReference
            ));
        }
    }
}
