//! The subcommand implementations behind the `mesure` binary.
//!
//! Exit-code contract: configuration and input-format problems are usage
//! errors (exit 2); anything that goes wrong while the pipeline runs is a
//! runtime error (exit 1).

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use mesure::analysis::{filter_confidence, isolate_all, OpDependencyGraph};
use mesure::harness::{calibrate, run_suite, LoopSize};
use mesure::profiler::{
    aggregate_usage, build_reference, compute_mark, compute_weights, parse_trace, score,
    DomainWeights, ParsedTrace, ReferenceAggregation, ReferenceBase,
};
use mesure::sim::{DeviceProfile, SimDevice};
use mesure::stats::{detect_peaks, shapiro_wilk, MeasurementSet};
use mesure::suite::AppletSuite;
use mesure::transport::{Channel, InProcessChannel, Server, TcpChannel};

use crate::config::{CampaignConfig, DeviceEndpoint, LoadedConfig};
use crate::results::{
    load_means, to_canonical_json, CalibrationDocument, CaseResult, ReferenceDocument,
    ResultsDocument, RunMetadata, ScoreCardDocument, SetResult, WeightsDocument, SCHEMA_VERSION,
};

/// A failed command, split by which exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation, configuration, or input document: exit 2.
    Usage(anyhow::Error),
    /// The pipeline itself failed: exit 1.
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn inner(&self) -> &anyhow::Error {
        match self {
            CliError::Usage(err) | CliError::Runtime(err) => err,
        }
    }
}

fn usage(err: impl Into<anyhow::Error>) -> CliError {
    CliError::Usage(err.into())
}

fn runtime(err: impl Into<anyhow::Error>) -> CliError {
    CliError::Runtime(err.into())
}

/// Scalar config fields exposed as command-line flags; a set flag wins over
/// the file.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct ConfigOverrides {
    /// Measurement repetitions per set.
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Confidence-filter half-width in standard deviations.
    #[arg(long)]
    pub n_sigma: Option<f64>,
    /// Directory receiving result artifacts.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Simulator noise seed, overriding profile and config file.
    #[arg(long)]
    pub rng_seed: Option<u64>,
    /// Calibration: maximum allowed std-dev over mean.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Calibration: minimum run-phase duration in nanoseconds.
    #[arg(long)]
    pub min_duration_ns: Option<u64>,
    /// Calibration: samples per probe during the search.
    #[arg(long)]
    pub probe_reps: Option<usize>,
    /// Calibration: samples used to confirm a candidate loop size.
    #[arg(long)]
    pub confirm_reps: Option<usize>,
}

impl ConfigOverrides {
    fn apply(&self, config: &mut CampaignConfig) {
        if let Some(v) = self.repetitions {
            config.repetitions = v;
        }
        if let Some(v) = self.n_sigma {
            config.n_sigma = v;
        }
        if let Some(path) = &self.out_dir {
            // Command-line paths are relative to the invocation directory,
            // not the config file.
            config.out_dir = if path.is_absolute() {
                path.clone()
            } else {
                std::env::current_dir().unwrap_or_default().join(path)
            };
        }
        if let Some(v) = self.rng_seed {
            config.rng_seed = Some(v);
        }
        if let Some(v) = self.ratio {
            config.calibration.ratio = v;
        }
        if let Some(v) = self.min_duration_ns {
            config.calibration.min_duration_ns = v;
        }
        if let Some(v) = self.probe_reps {
            config.calibration.probe_reps = v;
        }
        if let Some(v) = self.confirm_reps {
            config.calibration.confirm_reps = v;
        }
    }
}

fn load_config(path: &Path, overrides: &ConfigOverrides) -> Result<LoadedConfig, CliError> {
    let mut loaded = LoadedConfig::parse(path).map_err(usage)?;
    overrides.apply(&mut loaded.config);
    loaded.finalize().map_err(usage)
}

fn load_suite(path: &Path) -> Result<AppletSuite, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| usage(anyhow!("reading suite {}: {e}", path.display())))?;
    AppletSuite::from_json(&raw).map_err(|e| usage(anyhow!("suite {}: {e}", path.display())))
}

fn load_profile(path: &Path) -> Result<DeviceProfile, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| usage(anyhow!("reading profile {}: {e}", path.display())))?;
    DeviceProfile::from_json(&raw).map_err(|e| usage(anyhow!("profile {}: {e}", path.display())))
}

/// Opens the campaign's channel and names the device behind it.
fn open_channel(
    loaded: &LoadedConfig,
    suite: &AppletSuite,
) -> Result<(Box<dyn Channel>, String), CliError> {
    match &loaded.config.device {
        DeviceEndpoint::Profile { .. } => {
            let path = loaded.profile_path().expect("checked at load");
            let profile = load_profile(&path)?;
            let name = profile.name.clone();
            let seed = loaded.config.rng_seed.unwrap_or(profile.rng_seed);
            let device = SimDevice::with_seed(profile, suite.clone(), seed)
                .map_err(|e| usage(anyhow!("profile {}: {e}", path.display())))?;
            Ok((Box::new(InProcessChannel::new(device)), name))
        }
        DeviceEndpoint::Tcp { endpoint } => {
            let channel = TcpChannel::connect(endpoint)
                .map_err(|e| runtime(anyhow!("connecting to {endpoint}: {e}")))?;
            Ok((Box::new(channel), endpoint.clone()))
        }
    }
}

fn write_artifact(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| runtime(anyhow!("creating {}: {e}", parent.display())))?;
    }
    std::fs::write(path, content).map_err(|e| runtime(anyhow!("writing {}: {e}", path.display())))
}

pub fn cmd_serve(profile_path: &Path, suite_path: &Path, listen: &str) -> Result<(), CliError> {
    let profile = load_profile(profile_path)?;
    let suite = load_suite(suite_path)?;
    let server = Server::bind(listen, &profile, &suite)
        .map_err(|e| usage(anyhow!("binding {listen}: {e}")))?;
    let addr = server.local_addr().map_err(runtime)?;
    println!("listening on {addr}");
    let _ = std::io::stdout().flush();
    server.run().map_err(runtime)
}

pub fn cmd_calibrate(config_path: &Path, overrides: &ConfigOverrides) -> Result<(), CliError> {
    let loaded = load_config(config_path, overrides)?;
    let suite = load_suite(&loaded.suite_path())?;
    let (mut channel, device_name) = open_channel(&loaded, &suite)?;
    let policy = loaded.config.calibration.clone();

    let mut cases: BTreeMap<String, LoopSize> = BTreeMap::new();
    for case in suite.measurement_order() {
        let loop_size = calibrate(channel.as_mut(), case, &policy).map_err(runtime)?;
        println!("{}: P2={} L={}", case.id, loop_size.p2(), loop_size.loops());
        cases.insert(case.id.clone(), loop_size);
    }
    channel.close();

    let document = CalibrationDocument { schema_version: SCHEMA_VERSION, device_name, cases };
    let path = loaded.out_dir().join("calibration.json");
    write_artifact(&path, &to_canonical_json(&document))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn set_result(set: &MeasurementSet, policy: &mesure::analysis::FilterPolicy) -> SetResult {
    let filtered = filter_confidence(set, policy)
        .and_then(|f| f.stats().map_err(Into::into))
        .unwrap_or_else(|_| set.stats().expect("benched sets are non-empty"));
    let durations = set.durations();
    SetResult {
        raw: set.clone(),
        filtered,
        normality: shapiro_wilk(&durations).ok(),
        peaks: detect_peaks(&durations, None).ok(),
    }
}

fn samples_csv(cases: &BTreeMap<String, CaseResult>) -> String {
    let mut csv = String::from("case,rep,L,duration_ns\n");
    let mut push_set = |set: &MeasurementSet, loops: u32| {
        for sample in set.samples() {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                set.test_id(),
                sample.sequence_index,
                loops,
                sample.duration_ns
            ));
        }
    };
    for case in cases.values() {
        push_set(&case.measured.raw, case.loop_size.loops());
        push_set(&case.reference.raw, case.loop_size.loops());
    }
    csv
}

pub fn cmd_bench(config_path: &Path, overrides: &ConfigOverrides) -> Result<(), CliError> {
    let loaded = load_config(config_path, overrides)?;
    let suite = load_suite(&loaded.suite_path())?;
    let graph = OpDependencyGraph::from_suite(&suite);
    let (mut channel, device_name) = open_channel(&loaded, &suite)?;
    let policy = loaded.config.calibration.clone();
    let filter = loaded.config.filter_policy();

    let started_ns = channel.now_ns();
    let results = run_suite(channel.as_mut(), &suite, &policy, loaded.config.repetitions)
        .map_err(|e| runtime(anyhow!(e).context("measurement campaign")))?;
    let finished_ns = channel.now_ns();
    channel.close();

    let isolated = isolate_all(&results, &graph, &filter)
        .map_err(|e| runtime(anyhow!(e).context("isolating operation times")))?;
    let cases: BTreeMap<String, CaseResult> = results
        .iter()
        .map(|(id, measurement)| {
            let case = CaseResult {
                loop_size: measurement.loop_size,
                measured: set_result(&measurement.measured, &filter),
                reference: set_result(&measurement.reference, &filter),
            };
            (id.clone(), case)
        })
        .collect();

    let document = ResultsDocument {
        schema_version: SCHEMA_VERSION,
        metadata: RunMetadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            device_name,
            config: loaded.config.clone(),
            started_ns,
            finished_ns,
        },
        cases,
        isolated,
    };

    let out_dir = loaded.out_dir();
    let results_path = out_dir.join("results.json");
    write_artifact(&results_path, &to_canonical_json(&document))?;
    let csv_path = out_dir.join("samples.csv");
    write_artifact(&csv_path, &samples_csv(&document.cases))?;

    for (id, isolated) in &document.isolated {
        println!(
            "{id}: {:.1} ns/op (spread {:.1}, L={})",
            isolated.mean_ns, isolated.spread_ns, isolated.loop_size
        );
    }
    println!("wrote {}", results_path.display());
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn trace_files(domain_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(domain_dir)
        .map_err(|e| runtime(anyhow!("reading {}: {e}", domain_dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|path| path.is_file() && path.extension().is_some_and(|ext| ext == "trace"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn cmd_profile(traces_dir: &Path, out_dir: &Path) -> Result<(), CliError> {
    let entries = std::fs::read_dir(traces_dir)
        .map_err(|e| usage(anyhow!("reading {}: {e}", traces_dir.display())))?;
    let mut domains: Vec<(String, PathBuf)> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|path| path.is_dir())
        .filter_map(|path| {
            path.file_name().map(|name| (name.to_string_lossy().into_owned(), path.clone()))
        })
        .collect();
    domains.sort();
    if domains.is_empty() {
        let name = traces_dir.display().to_string();
        return Err(runtime(mesure::profiler::ProfilerError::NoTraces { domain: name }));
    }

    for (domain, dir) in &domains {
        let mut traces: Vec<ParsedTrace> = Vec::new();
        for file in trace_files(dir)? {
            let raw = std::fs::read_to_string(&file)
                .map_err(|e| runtime(anyhow!("reading {}: {e}", file.display())))?;
            let parsed = parse_trace(&raw)
                .map_err(|e| runtime(anyhow!(e).context(format!("{}", file.display()))))?;
            traces.push(parsed);
        }
        let usage_counts = aggregate_usage(domain, &traces).map_err(runtime)?;
        let weights = compute_weights(&usage_counts).map_err(runtime)?;
        let document = WeightsDocument::new(weights);
        let path = out_dir.join(format!("{domain}.weights.json"));
        write_artifact(&path, &to_canonical_json(&document))?;
        println!(
            "{domain}: {} features from {} traces, wrote {}",
            document.weights.feature_count,
            usage_counts.trace_count,
            path.display()
        );
    }
    Ok(())
}

/// Assembles the reference base. A single prebuilt reference document is
/// used as-is; otherwise every path contributes one card's means.
fn load_reference(
    paths: &[PathBuf],
    aggregation: ReferenceAggregation,
) -> Result<ReferenceBase, CliError> {
    if paths.len() == 1 {
        if let Ok(doc) = ReferenceDocument::load(&paths[0]) {
            return Ok(doc.base);
        }
    }
    let mut cards: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for path in paths {
        let extracted = load_means(path).map_err(usage)?;
        if cards.insert(extracted.card_id.clone(), extracted.means).is_some() {
            return Err(usage(anyhow!(
                "two reference inputs claim the card id {:?}; pass --card-id on one",
                extracted.card_id
            )));
        }
    }
    build_reference(&cards, aggregation).map_err(runtime)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_score(
    measured_path: &Path,
    reference_paths: &[PathBuf],
    weights_paths: &[PathBuf],
    out: &Path,
    card_id: Option<&str>,
    geometric: bool,
    write_reference: Option<&Path>,
) -> Result<(), CliError> {
    let aggregation =
        if geometric { ReferenceAggregation::Geometric } else { ReferenceAggregation::Arithmetic };
    let reference = load_reference(reference_paths, aggregation)?;
    if let Some(path) = write_reference {
        write_artifact(path, &to_canonical_json(&ReferenceDocument::new(reference.clone())))?;
        println!("wrote {}", path.display());
    }

    let measured = load_means(measured_path).map_err(usage)?;
    let card = card_id.map(str::to_owned).unwrap_or(measured.card_id);

    let mut marks: BTreeMap<String, f64> = BTreeMap::new();
    for (feature, reference_ns) in &reference.reference_ns {
        if let Some(measured_ns) = measured.means.get(feature) {
            let mark = compute_mark(*reference_ns, *measured_ns).map_err(runtime)?;
            marks.insert(feature.clone(), mark);
        }
    }

    let mut weights: Vec<DomainWeights> = Vec::new();
    for path in weights_paths {
        let doc = WeightsDocument::load(path).map_err(usage)?;
        doc.weights
            .validate()
            .map_err(|e| usage(anyhow!(e).context(format!("{}", path.display()))))?;
        weights.push(doc.weights);
    }

    let scorecard = score(&card, &marks, &weights).map_err(runtime)?;
    for (domain, domain_score) in &scorecard.domains {
        println!("{domain}: P = {:.4}", domain_score.global_mark);
    }
    println!("overall: {:.4}", scorecard.overall);

    write_artifact(out, &to_canonical_json(&ScoreCardDocument::new(scorecard)))?;
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

fn scorecard_csv(card: &mesure::profiler::ScoreCard) -> String {
    let mut csv = String::from("feature,domain,N,alpha,W\n");
    for (domain, domain_score) in &card.domains {
        for (feature, feature_score) in &domain_score.features {
            let mark = card.marks.get(feature).copied().unwrap_or(f64::NAN);
            csv.push_str(&format!(
                "{feature},{domain},{mark},{},{}\n",
                feature_score.weight, feature_score.weighted_mark
            ));
        }
        csv.push_str(&format!("TOTAL,{domain},,,{}\n", domain_score.global_mark));
    }
    csv.push_str(&format!("OVERALL,,,,{}\n", card.overall));
    csv
}

pub fn cmd_report(
    scorecard_path: &Path,
    format: ReportFormat,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let document = ScoreCardDocument::load(scorecard_path).map_err(usage)?;
    let rendered = match format {
        ReportFormat::Json => to_canonical_json(&document),
        ReportFormat::Csv => scorecard_csv(&document.card),
    };
    match out {
        Some(path) => {
            write_artifact(path, &rendered)?;
            println!("wrote {}", path.display());
        }
        None => print!("{rendered}"),
    }
    Ok(())
}
