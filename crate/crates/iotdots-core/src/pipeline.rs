//! End-to-end orchestration: instrument the app corpus, simulate batches of
//! scenario runs (in parallel), train the transition model on benign data,
//! analyze test runs, and assemble reproducible reports.

use crate::detect::{
    detect_anomalies, detect_tampered, office_policy, train_tamper_family, AnalyzerParams,
    Detection, SecurityPolicy, TamperFamily, TamperReport,
};
use crate::instrument::{self, InstrumentationReport};
use crate::logstore::LogRecord;
use crate::markov::{self, TransitionModel};
use crate::metrics::{
    confusion_counts, metrics_from_counts, split_train_test, ConfusionCounts, MetricsReport,
};
use crate::par;
use crate::scenario::{
    self, inject_threat, office_baseline, RoutineSpec, Scenario, ThreatClass, TruthWindow,
};
use crate::schema::{self, FeatureSchema, StateVector};
use crate::sim::{self, RunConfig, RunOutput};
use crate::source::SourceUnit;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

/// Threat classes exercised by the synthetic suite, in rotation order.
/// Behavior-1 is evaluated separately through tamper detection.
pub const SUITE_THREATS: [ThreatClass; 9] = [
    ThreatClass::Activity1,
    ThreatClass::Activity2,
    ThreatClass::Activity3,
    ThreatClass::Activity4,
    ThreatClass::Activity5,
    ThreatClass::Behavior2,
    ThreatClass::Behavior3,
    ThreatClass::Behavior4,
    ThreatClass::Behavior5,
];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub apps_dir: Option<PathBuf>,
    pub scenario_file: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub model_file: Option<PathBuf>,
    pub policy_file: Option<PathBuf>,
    pub dt_ms: u64,
    pub epsilon: f64,
    pub tau: Option<f64>,
    pub batch_size: usize,
    pub batch_age_ms: u64,
    pub tamper_window: usize,
    pub tamper_rho: f64,
    pub seed: u64,
    pub train_fraction: f64,
    pub days: u64,
    pub users: usize,
    pub benign_runs: usize,
    pub threat_runs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            apps_dir: None,
            scenario_file: None,
            data_dir: None,
            model_file: None,
            policy_file: None,
            dt_ms: 10_000,
            epsilon: 1e-3,
            tau: None,
            batch_size: crate::logstore::DEFAULT_BATCH_SIZE,
            batch_age_ms: crate::logstore::DEFAULT_BATCH_AGE_MS,
            tamper_window: 30,
            tamper_rho: 0.5,
            seed: 42,
            train_fraction: 0.75,
            days: 7,
            users: 10,
            benign_runs: 30,
            threat_runs: 50,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |field: &str, message: &str| {
            Err(PipelineError::Config { field: field.to_string(), message: message.to_string() })
        };
        if self.dt_ms == 0 || self.dt_ms > 3_600_000 {
            return bad("dt_ms", "slot width must be in (0, 1h]");
        }
        if self.epsilon < 0.0 {
            return bad("epsilon", "smoothing must be non-negative");
        }
        if let Some(tau) = self.tau {
            if !(0.0..1.0).contains(&tau) {
                return bad("tau", "threshold must be in [0, 1)");
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size", "batch size must be at least 1");
        }
        if self.tamper_window == 0 {
            return bad("tamper_window", "window must be at least 1 slot");
        }
        if !(self.tamper_rho > 0.0 && self.tamper_rho <= 1.0) {
            return bad("tamper_rho", "ratio must be in (0, 1]");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction", "fraction must be strictly between 0 and 1");
        }
        if self.days == 0 || self.days > 31 {
            return bad("days", "days must be in 1..=31");
        }
        if self.users == 0 || self.users > 50 {
            return bad("users", "users must be in 1..=50");
        }
        if self.benign_runs < 2 {
            return bad("benign_runs", "at least two benign runs are needed to split");
        }
        Ok(())
    }

    pub fn analyzer_params(&self) -> AnalyzerParams {
        AnalyzerParams {
            dt_ms: self.dt_ms,
            epsilon: self.epsilon,
            tau: self.tau,
            tamper_window: self.tamper_window,
            tamper_rho: self.tamper_rho,
            ..AnalyzerParams::default()
        }
    }

    /// Stable hash of the serialized configuration for the repro block.
    pub fn config_hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.as_bytes() {
            hash ^= *b as u64;
            hash = hash.wrapping_mul(0x1000_0000_01b3);
        }
        format!("{hash:016x}")
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration at {field}: {message}")]
    Config { field: String, message: String },
    #[error("instrumentation failed for {app_id}: {message}")]
    Instrument { app_id: String, message: String },
    #[error(transparent)]
    Sim(#[from] sim::SimError),
    #[error(transparent)]
    Train(#[from] markov::TrainError),
    #[error(transparent)]
    Analyzer(#[from] schema::AnalyzerError),
    #[error(transparent)]
    Threat(#[from] scenario::ThreatError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Corpus apps instrumented once, reused across every run of a suite.
#[derive(Debug, Clone)]
pub struct OfficeSuite {
    pub cfg: PipelineConfig,
    pub instrumented: BTreeMap<String, String>,
    pub reports: Vec<(String, InstrumentationReport)>,
}

impl OfficeSuite {
    pub fn new(cfg: PipelineConfig) -> Result<OfficeSuite, PipelineError> {
        cfg.validate()?;
        let mut instrumented = BTreeMap::new();
        let mut reports = Vec::new();
        for (app_id, source) in scenario::corpus::office_apps() {
            let unit = SourceUnit::new(source, app_id);
            let (modified, report) =
                instrument::instrument(&unit).map_err(|e| PipelineError::Instrument {
                    app_id: app_id.to_string(),
                    message: e.to_string(),
                })?;
            instrumented.insert(app_id.to_string(), modified.text);
            reports.push((app_id.to_string(), report));
        }
        Ok(OfficeSuite { cfg, instrumented, reports })
    }

    fn materialize(&self, seed: u64, routine: RoutineSpec) -> Scenario {
        let mut s = office_baseline(seed, self.cfg.days, self.cfg.users, routine);
        for app in &mut s.apps {
            if let Some(source) = self.instrumented.get(&app.app_id) {
                app.source = source.clone();
            }
        }
        s
    }

    pub fn benign_scenario(&self, index: usize) -> Scenario {
        self.materialize(self.cfg.seed.wrapping_mul(1000).wrapping_add(index as u64), RoutineSpec::default())
    }

    pub fn threat_scenario(&self, index: usize, threat: ThreatClass) -> Result<Scenario, PipelineError> {
        let base = self.materialize(
            self.cfg.seed.wrapping_mul(1000).wrapping_add(500 + index as u64),
            RoutineSpec::default(),
        );
        Ok(inject_threat(&base, threat, &BTreeMap::new())?)
    }

    pub fn policy(&self) -> SecurityPolicy {
        office_policy(
            (1..=self.cfg.users).map(|i| format!("ctrl-{:02}", i)),
            self.instrumented.keys().cloned(),
        )
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            allow_plain: false,
            batch_size: self.cfg.batch_size,
            batch_age_ms: self.cfg.batch_age_ms,
        }
    }
}

/// Simulate many scenarios, in parallel when the feature allows.
pub fn simulate_batch(scenarios: Vec<Scenario>, cfg: &RunConfig) -> Result<Vec<RunOutput>, PipelineError> {
    let cfg = cfg.clone();
    let results = par::map_batch(scenarios, move |s| {
        let apps = sim::prepare_apps(&s)?;
        sim::run(&s, &apps, &cfg)
    });
    results.into_iter().collect::<Result<Vec<_>, _>>().map_err(PipelineError::from)
}

/// Sorted records, labels, and states for one run.
pub fn states_for_run(
    output: &RunOutput,
    scenario_zones: &BTreeMap<String, String>,
    schema: &FeatureSchema,
    dt_ms: u64,
) -> Result<(Vec<crate::schema::LabeledRecord>, Vec<StateVector>), PipelineError> {
    let mut records: Vec<LogRecord> = output.logs.clone();
    records.sort_by(|a, b| (a.ts, &a.app_id, a.seq).cmp(&(b.ts, &b.app_id, b.seq)));
    let labeled = schema::label_logs(&records, scenario_zones, dt_ms);
    let states = schema::build_states(&labeled, schema, dt_ms)?;
    Ok((labeled, states))
}

pub fn zones_of(scenario: &Scenario) -> BTreeMap<String, String> {
    scenario.topology.iter().map(|d| (d.id.clone(), d.zone.clone())).collect()
}

/// Model plus everything needed to analyze further runs.
pub struct TrainedSuite {
    pub model: TransitionModel,
    pub schema: FeatureSchema,
    pub policy: SecurityPolicy,
    pub zones: BTreeMap<String, String>,
    pub params: AnalyzerParams,
    /// Benign training sequences, kept for leave-one-out tamper training.
    pub train_sequences: Vec<Vec<u64>>,
    pub train_run_count: usize,
    pub benign_test: Vec<RunOutput>,
}

/// Simulate the benign runs, split them, and train the transition model.
pub fn train_office_suite(suite: &OfficeSuite) -> Result<TrainedSuite, PipelineError> {
    let cfg = &suite.cfg;
    let scenarios: Vec<Scenario> = (0..cfg.benign_runs).map(|i| suite.benign_scenario(i)).collect();
    let zones = zones_of(&scenarios[0]);
    let feature_schema = schema::office_schema(&scenarios[0]);
    let outputs = simulate_batch(scenarios, &suite.run_config())?;

    let (train_runs, benign_test) =
        split_train_test(outputs, cfg.train_fraction, cfg.seed, |_| false)
            .map_err(|e| PipelineError::Config { field: "train_fraction".into(), message: e.to_string() })?;

    let mut train_sequences = Vec::with_capacity(train_runs.len());
    for output in &train_runs {
        let (_, states) = states_for_run(output, &zones, &feature_schema, cfg.dt_ms)?;
        train_sequences.push(states.iter().map(|s| s.bits).collect());
    }
    let model = markov::train(&train_sequences, cfg.epsilon)?;
    Ok(TrainedSuite {
        model,
        schema: feature_schema,
        policy: suite.policy(),
        zones,
        params: cfg.analyzer_params(),
        train_sequences,
        train_run_count: train_runs.len(),
        benign_test,
    })
}

/// Analyze one run against a trained suite.
pub fn analyze_run(
    trained: &TrainedSuite,
    output: &RunOutput,
) -> Result<(Vec<Detection>, Vec<TruthWindow>), PipelineError> {
    let (labeled, states) = states_for_run(output, &trained.zones, &trained.schema, trained.params.dt_ms)?;
    let detections = detect_anomalies(
        &trained.model,
        &trained.schema,
        &states,
        &labeled,
        &trained.policy,
        &trained.params,
    )?;
    Ok((detections, output.truth.clone()))
}

/// Fixed benign evaluation windows added to runs without injections.
pub fn benign_eval_windows(days: u64) -> Vec<TruthWindow> {
    use crate::scenario::{DAY_MS, HOUR_MS, MIN_MS};
    let mut out = Vec::new();
    if days >= 2 {
        let base = DAY_MS;
        out.push(TruthWindow {
            start: base + 10 * HOUR_MS,
            end: base + 10 * HOUR_MS + 10 * MIN_MS,
            class: ThreatClass::Benign,
        });
        out.push(TruthWindow {
            start: base + 20 * HOUR_MS + MIN_MS,
            end: base + 20 * HOUR_MS + 11 * MIN_MS,
            class: ThreatClass::Benign,
        });
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverheadReport {
    pub per_app: BTreeMap<String, (usize, usize)>,
    pub mean_lines_added: f64,
    pub mean_bytes_added: f64,
}

pub fn overhead_report(reports: &[(String, InstrumentationReport)]) -> OverheadReport {
    let per_app: BTreeMap<String, (usize, usize)> = reports
        .iter()
        .map(|(app, r)| (app.clone(), (r.lines_added, r.bytes_added)))
        .collect();
    let n = reports.len().max(1) as f64;
    let mean_lines = reports.iter().map(|(_, r)| r.lines_added as f64).sum::<f64>() / n;
    let mean_bytes = reports.iter().map(|(_, r)| r.bytes_added as f64).sum::<f64>() / n;
    OverheadReport { per_app, mean_lines_added: mean_lines, mean_bytes_added: mean_bytes }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReproBlock {
    pub config_hash: String,
    pub seed: u64,
    pub parameters: PipelineConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunDetections {
    pub run: String,
    pub truth: Vec<TruthWindow>,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct E2eReport {
    pub reproduction: ReproBlock,
    pub train_runs: usize,
    pub benign_test_runs: usize,
    pub threat_runs: usize,
    pub metrics: MetricsReport,
    pub overhead: OverheadReport,
    pub timeline: Vec<RunDetections>,
}

/// The full pipeline: instrument, simulate, train, inject, analyze, evaluate.
pub fn run_e2e(cfg: PipelineConfig) -> Result<E2eReport, PipelineError> {
    let suite = OfficeSuite::new(cfg.clone())?;
    let trained = train_office_suite(&suite)?;

    let mut timeline: Vec<RunDetections> = Vec::new();
    let mut counts: BTreeMap<ThreatClass, ConfusionCounts> = BTreeMap::new();
    let mut windows = 0u64;

    // Benign hold-out runs, with fixed evaluation windows.
    let benign_eval = benign_eval_windows(cfg.days);
    for (i, output) in trained.benign_test.iter().enumerate() {
        let (detections, mut truth) = analyze_run(&trained, output)?;
        truth.extend(benign_eval.iter().copied());
        windows += truth.len() as u64;
        for (class, c) in confusion_counts(&detections, &truth) {
            counts.entry(class).or_default().add(&c);
        }
        timeline.push(RunDetections { run: format!("benign-{i:02}"), truth, detections });
    }

    // Threat-injected runs cycle through the nine anomaly classes.
    let threat_scenarios: Result<Vec<(ThreatClass, Scenario)>, PipelineError> = (0..cfg.threat_runs)
        .map(|i| {
            let class = SUITE_THREATS[i % SUITE_THREATS.len()];
            suite.threat_scenario(i, class).map(|s| (class, s))
        })
        .collect();
    let threat_scenarios = threat_scenarios?;
    let outputs = simulate_batch(
        threat_scenarios.iter().map(|(_, s)| s.clone()).collect(),
        &suite.run_config(),
    )?;
    for (i, ((class, _), output)) in threat_scenarios.iter().zip(outputs.iter()).enumerate() {
        let (detections, truth) = analyze_run(&trained, output)?;
        windows += truth.len() as u64;
        for (c, counts_for_class) in confusion_counts(&detections, &truth) {
            counts.entry(c).or_default().add(&counts_for_class);
        }
        timeline.push(RunDetections {
            run: format!("threat-{i:02}-{}", class.name()),
            truth,
            detections,
        });
    }

    Ok(E2eReport {
        reproduction: ReproBlock { config_hash: cfg.config_hash(), seed: cfg.seed, parameters: cfg },
        train_runs: trained.train_run_count,
        benign_test_runs: trained.benign_test.len(),
        threat_runs: threat_scenarios.len(),
        metrics: metrics_from_counts(&counts, windows),
        overhead: overhead_report(&suite.reports),
        timeline,
    })
}

/// One tamper experiment: freeze `k` devices from the candidate pool on a
/// fresh run and compare the flag set against ground truth.
pub struct TamperOutcome {
    pub accuracy: f64,
    pub report: TamperReport,
    pub tampered: Vec<String>,
}

/// Candidate pool for tamper experiments. Actuators precede the sensor that
/// drives them, so a frozen sensor never silences a still-clean actuator;
/// the tail holds devices whose benign behavior is too quiet for either
/// cessation or cooperation to pin down.
pub const TAMPER_POOL: [&str; 22] = [
    "cam-lobby",
    "door-conference",
    "light-office-a",
    "motion-office-a",
    "light-office-b",
    "motion-office-b",
    "light-lobby",
    "motion-lobby",
    "light-conference",
    "motion-conference",
    "light-kitchen",
    "motion-kitchen",
    "thermo-1",
    "temp-office-a",
    "lock-main",
    "door-main",
    "temp-server",
    "lux-lobby",
    "motion-server",
    "door-server",
    "alarm-1",
    "hub-1",
];

pub fn tamper_family(trained: &TrainedSuite) -> Result<TamperFamily, PipelineError> {
    Ok(train_tamper_family(&trained.train_sequences, &trained.schema, trained.params.epsilon)?)
}

pub fn run_tamper_experiment(
    suite: &OfficeSuite,
    trained: &TrainedSuite,
    family: &TamperFamily,
    k: usize,
) -> Result<TamperOutcome, PipelineError> {
    let tampered: Vec<String> = TAMPER_POOL.iter().take(k).map(|s| s.to_string()).collect();
    let base = suite.benign_scenario(900 + k);
    let mut params = BTreeMap::new();
    params.insert(
        "devices".to_string(),
        serde_json::Value::Array(tampered.iter().map(|d| serde_json::Value::String(d.clone())).collect()),
    );
    let scenario = inject_threat(&base, ThreatClass::Behavior1, &params)?;
    let apps = sim::prepare_apps(&scenario)?;
    let output = sim::run(&scenario, &apps, &suite.run_config())?;
    let (_, states) = states_for_run(&output, &trained.zones, &trained.schema, trained.params.dt_ms)?;
    let report = detect_tampered(family, &states, &trained.params);

    // Accuracy over all devices with features, tampered = positive.
    let devices: Vec<&String> = family.device_masks.keys().collect();
    let mut correct = 0usize;
    let mut total = 0usize;
    for device in devices {
        let is_tampered = tampered.contains(device);
        let flagged = report.flagged.contains(device);
        total += 1;
        if is_tampered == flagged {
            correct += 1;
        }
    }
    // Devices outside the feature schema (the hub) count as unflaggable.
    for d in &tampered {
        if !family.device_masks.contains_key(d) {
            total += 1;
        }
    }
    Ok(TamperOutcome { accuracy: correct as f64 / total.max(1) as f64, report, tampered })
}
