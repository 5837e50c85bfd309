//! Collecting repeated timed measurements for test cases.

use std::collections::BTreeMap;

use crate::harness::{calibrate, CalibrationPolicy, HarnessError, LoopSize, APPLET_CLA};
use crate::sim::{P1_CLEANUP, P1_RUN, P1_SETUP, SW_SUCCESS};
use crate::stats::MeasurementSet;
use crate::suite::{AppletSuite, TestCaseSpec};
use crate::transport::{ApduCommand, Channel, TimedExchange};

/// Recommended measurement count; fewer repetitions draw a warning.
pub const DEFAULT_REPETITIONS: usize = 30;

/// How one case (and its reference) gets measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchPlan {
    pub repetitions: usize,
    pub loop_size: LoopSize,
}

/// Sends one phase of a case's applet and checks for in-band success.
pub(crate) fn exchange_phase<C: Channel + ?Sized>(
    channel: &mut C,
    case: &TestCaseSpec,
    p1: u8,
    p2: u8,
) -> Result<TimedExchange, HarnessError> {
    let command = ApduCommand::new(APPLET_CLA, case.ins, p1, p2);
    let exchange = channel.exchange(&command)?;
    if exchange.response.sw != SW_SUCCESS {
        return Err(HarnessError::Device { case_id: case.id.clone(), sw: exchange.response.sw });
    }
    Ok(exchange)
}

/// Collects `repetitions` run-phase samples; the caller owns setup/cleanup.
pub(crate) fn collect_run_samples<C: Channel + ?Sized>(
    channel: &mut C,
    case: &TestCaseSpec,
    loop_size: LoopSize,
    repetitions: usize,
) -> Result<MeasurementSet, HarnessError> {
    let mut set = MeasurementSet::new(&case.id, loop_size.loops());
    for _ in 0..repetitions {
        // Nothing between the exchange and the sample append: the channel
        // already timed the exchange, so no work here can pollute it.
        let exchange = exchange_phase(channel, case, P1_RUN, loop_size.p2())?;
        set.push(exchange.elapsed_ns, channel.now_ns());
    }
    Ok(set)
}

/// Measures one case: setup once, `plan.repetitions` timed run exchanges at
/// `plan.loop_size`, cleanup once. Only run-phase times are recorded.
///
/// Any non-success status word aborts without a partial result.
pub fn run_bench<C: Channel + ?Sized>(
    channel: &mut C,
    case: &TestCaseSpec,
    plan: &BenchPlan,
) -> Result<MeasurementSet, HarnessError> {
    if plan.repetitions == 0 {
        return Err(HarnessError::InvalidPlan("repetitions must be at least 1".into()));
    }
    if plan.repetitions < DEFAULT_REPETITIONS {
        log::warn!(
            "case `{}`: {} repetitions is below the recommended {DEFAULT_REPETITIONS}",
            case.id,
            plan.repetitions
        );
    }
    exchange_phase(channel, case, P1_SETUP, plan.loop_size.p2())?;
    let set = collect_run_samples(channel, case, plan.loop_size, plan.repetitions)?;
    exchange_phase(channel, case, P1_CLEANUP, plan.loop_size.p2())?;
    Ok(set)
}

/// One case's measurements paired with its reference, taken at the same
/// loop size so the reference subtraction is well defined.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseMeasurement {
    pub loop_size: LoopSize,
    pub measured: MeasurementSet,
    pub reference: MeasurementSet,
}

/// Runs the full campaign: every non-reference case in dependency order,
/// each calibrated with `policy`, then benched together with its reference
/// at the calibrated loop size.
///
/// Auxiliaries are cases themselves, so the dependency closure is measured
/// automatically; cyclic suites cannot be constructed in the first place.
/// Errors are tagged with the id of the case being processed.
pub fn run_suite<C: Channel + ?Sized>(
    channel: &mut C,
    suite: &AppletSuite,
    policy: &CalibrationPolicy,
    repetitions: usize,
) -> Result<BTreeMap<String, CaseMeasurement>, HarnessError> {
    let mut results = BTreeMap::new();
    for case in suite.measurement_order() {
        let loop_size = calibrate(channel, case, policy).map_err(|e| tag(&case.id, e))?;
        let reference =
            suite.case(&case.reference_id).expect("suite construction resolves every reference");
        let plan = BenchPlan { repetitions, loop_size };
        let measured = run_bench(channel, case, &plan).map_err(|e| tag(&case.id, e))?;
        let reference = run_bench(channel, reference, &plan).map_err(|e| tag(&case.id, e))?;
        results.insert(case.id.clone(), CaseMeasurement { loop_size, measured, reference });
    }
    Ok(results)
}

/// Wraps an error with the campaign case it interrupted, unless the error
/// already names that case.
fn tag(case_id: &str, error: HarnessError) -> HarnessError {
    let already_named = match &error {
        HarnessError::Device { case_id: id, .. }
        | HarnessError::CalibrationFailed { case_id: id, .. }
        | HarnessError::Case { case_id: id, .. } => id == case_id,
        _ => false,
    };
    if already_named {
        error
    } else {
        HarnessError::Case { case_id: case_id.to_string(), source: Box::new(error) }
    }
}
