//! Multi-seed campaign sweeps against the simulated card.
//!
//! A sweep runs the full pipeline (calibrate, bench, filter, isolate) once
//! per RNG seed, which is how noise sensitivity gets characterised without
//! touching hardware. Seeds are independent, so with the `parallel` feature
//! the per-seed campaigns fan out across a rayon pool; the sequential path
//! stays available either way for comparison and for single-core targets.

use std::collections::BTreeMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{isolate_all, AnalysisError, FilterPolicy, IsolatedTime, OpDependencyGraph};
use crate::harness::{run_suite, CalibrationPolicy, HarnessError};
use crate::sim::{DeviceError, DeviceProfile, SimDevice};
use crate::suite::AppletSuite;
use crate::transport::InProcessChannel;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("seed {seed}: {source}")]
    Device {
        seed: u64,
        #[source]
        source: DeviceError,
    },
    #[error("seed {seed}: {source}")]
    Harness {
        seed: u64,
        #[source]
        source: HarnessError,
    },
    #[error("seed {seed}: {source}")]
    Analysis {
        seed: u64,
        #[source]
        source: AnalysisError,
    },
}

/// Isolated per-operation times from one seeded campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub seed: u64,
    pub isolated: BTreeMap<String, IsolatedTime>,
}

/// A reusable sweep setup: one profile, suite, and policy set shared by
/// every seeded campaign.
#[derive(Debug, Clone)]
pub struct Sweep {
    profile: DeviceProfile,
    suite: AppletSuite,
    graph: OpDependencyGraph,
    policy: CalibrationPolicy,
    filter: FilterPolicy,
    repetitions: usize,
}

impl Sweep {
    pub fn new(
        profile: DeviceProfile,
        suite: AppletSuite,
        policy: CalibrationPolicy,
        filter: FilterPolicy,
        repetitions: usize,
    ) -> Self {
        let graph = OpDependencyGraph::from_suite(&suite);
        Self { profile, suite, graph, policy, filter, repetitions }
    }

    /// Runs the full campaign for one seed.
    pub fn run_seed(&self, seed: u64) -> Result<SweepOutcome, SweepError> {
        let device = SimDevice::with_seed(self.profile.clone(), self.suite.clone(), seed)
            .map_err(|source| SweepError::Device { seed, source })?;
        let mut channel = InProcessChannel::new(device);
        let results = run_suite(&mut channel, &self.suite, &self.policy, self.repetitions)
            .map_err(|source| SweepError::Harness { seed, source })?;
        let isolated = isolate_all(&results, &self.graph, &self.filter)
            .map_err(|source| SweepError::Analysis { seed, source })?;
        Ok(SweepOutcome { seed, isolated })
    }

    /// Runs every seed on the calling thread, in order.
    pub fn run_serial(&self, seeds: &[u64]) -> Result<Vec<SweepOutcome>, SweepError> {
        seeds.iter().map(|&seed| self.run_seed(seed)).collect()
    }

    /// Runs the seeds across the rayon pool. Outcomes come back in input
    /// order regardless of which campaign finishes first.
    #[cfg(feature = "parallel")]
    pub fn run_parallel(&self, seeds: &[u64]) -> Result<Vec<SweepOutcome>, SweepError> {
        seeds.par_iter().map(|&seed| self.run_seed(seed)).collect()
    }

    /// Parallel when the `parallel` feature is enabled, sequential otherwise.
    pub fn run(&self, seeds: &[u64]) -> Result<Vec<SweepOutcome>, SweepError> {
        #[cfg(feature = "parallel")]
        {
            self.run_parallel(seeds)
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.run_serial(seeds)
        }
    }
}
