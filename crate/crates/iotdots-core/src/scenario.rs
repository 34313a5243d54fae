//! Scenario model: smart-office topology, app bindings, user routines, the
//! timeline generator, and the threat-injection catalog.
//!
//! Scenario files stay compact: they carry topology, users, app references,
//! and an optional daily-routine spec; `load_scenario` materializes the
//! routine into a concrete timeline with a seeded generator so identical
//! files and seeds produce identical runs.

use crate::device::{DeviceModel, DeviceType};
use crate::logstore::{LocationMode, LogValue};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

pub const MIN_MS: u64 = 60_000;
pub const HOUR_MS: u64 = 3_600_000;
pub const DAY_MS: u64 = 86_400_000;

/// Embedded app corpus, so generated scenarios work without a checkout.
pub mod corpus {
    pub const LISTING1: &str = include_str!("../fixtures/apps/listing1.groovy");
    pub const LOBBY_LIGHT: &str = include_str!("../fixtures/apps/lobby-light.groovy");
    pub const OFFICE_A_LIGHT: &str = include_str!("../fixtures/apps/office-a-light.groovy");
    pub const OFFICE_B_LIGHT: &str = include_str!("../fixtures/apps/office-b-light.groovy");
    pub const CONFERENCE_LIGHT: &str = include_str!("../fixtures/apps/conference-light.groovy");
    pub const THERMOSTAT_COMFORT: &str = include_str!("../fixtures/apps/thermostat-comfort.groovy");
    pub const SECURITY_MONITOR: &str = include_str!("../fixtures/apps/security-monitor.groovy");
    pub const SMOKE_ALERT: &str = include_str!("../fixtures/apps/smoke-alert.groovy");
    pub const LOCK_MANAGER: &str = include_str!("../fixtures/apps/lock-manager.groovy");
    pub const ACTIVITY_LOGGER: &str = include_str!("../fixtures/apps/activity-logger.groovy");
    pub const CLIMATE_GUARD: &str = include_str!("../fixtures/apps/climate-guard.groovy");

    /// (app id, source) pairs for the ten office apps.
    pub fn office_apps() -> Vec<(&'static str, &'static str)> {
        vec![
            ("lobby-light", LOBBY_LIGHT),
            ("office-a-light", OFFICE_A_LIGHT),
            ("office-b-light", OFFICE_B_LIGHT),
            ("conference-light", CONFERENCE_LIGHT),
            ("thermostat-comfort", THERMOSTAT_COMFORT),
            ("security-monitor", SECURITY_MONITOR),
            ("smoke-alert", SMOKE_ALERT),
            ("lock-manager", LOCK_MANAGER),
            ("activity-logger", ACTIVITY_LOGGER),
            ("climate-guard", CLIMATE_GUARD),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ThreatClass {
    #[serde(rename = "Activity-1")]
    Activity1,
    #[serde(rename = "Activity-2")]
    Activity2,
    #[serde(rename = "Activity-3")]
    Activity3,
    #[serde(rename = "Activity-4")]
    Activity4,
    #[serde(rename = "Activity-5")]
    Activity5,
    #[serde(rename = "Behavior-1")]
    Behavior1,
    #[serde(rename = "Behavior-2")]
    Behavior2,
    #[serde(rename = "Behavior-3")]
    Behavior3,
    #[serde(rename = "Behavior-4")]
    Behavior4,
    #[serde(rename = "Behavior-5")]
    Behavior5,
    Benign,
}

impl ThreatClass {
    pub const THREATS: [ThreatClass; 10] = [
        ThreatClass::Activity1,
        ThreatClass::Activity2,
        ThreatClass::Activity3,
        ThreatClass::Activity4,
        ThreatClass::Activity5,
        ThreatClass::Behavior1,
        ThreatClass::Behavior2,
        ThreatClass::Behavior3,
        ThreatClass::Behavior4,
        ThreatClass::Behavior5,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ThreatClass::Activity1 => "Activity-1",
            ThreatClass::Activity2 => "Activity-2",
            ThreatClass::Activity3 => "Activity-3",
            ThreatClass::Activity4 => "Activity-4",
            ThreatClass::Activity5 => "Activity-5",
            ThreatClass::Behavior1 => "Behavior-1",
            ThreatClass::Behavior2 => "Behavior-2",
            ThreatClass::Behavior3 => "Behavior-3",
            ThreatClass::Behavior4 => "Behavior-4",
            ThreatClass::Behavior5 => "Behavior-5",
            ThreatClass::Benign => "Benign",
        }
    }

    pub fn parse(s: &str) -> Option<ThreatClass> {
        ThreatClass::THREATS
            .iter()
            .copied()
            .chain([ThreatClass::Benign])
            .find(|c| c.name().eq_ignore_ascii_case(s))
    }

    /// Activities 4 and 5 only violate policy inside regulated hours.
    pub fn time_dependent(&self) -> bool {
        matches!(self, ThreatClass::Activity4 | ThreatClass::Activity5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Env,
    User { id: String },
    App { id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimelineAction {
    SensorChange {
        device: String,
        attribute: String,
        value: LogValue,
    },
    Command {
        device: String,
        command: String,
        #[serde(default)]
        args: Vec<LogValue>,
        /// Location mode of the command's origin, when it differs from the
        /// environment mode (remote control).
        #[serde(default)]
        origin_mode: Option<LocationMode>,
        /// Controller override for actors without a user binding.
        #[serde(default)]
        controller: Option<String>,
    },
    ModeChange {
        mode: LocationMode,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEvent {
    pub ts: u64,
    pub actor: Actor,
    pub action: TimelineAction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppInstance {
    pub app_id: String,
    pub source: String,
    #[serde(default)]
    pub bindings: BTreeMap<String, LogValue>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserBinding {
    pub user_id: String,
    pub controller_id: String,
    #[serde(default)]
    pub zone: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthWindow {
    pub start: u64,
    pub end: u64,
    pub class: ThreatClass,
}

/// Device whose reports freeze at their last value inside the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TamperWindow {
    pub device: String,
    pub from: u64,
    pub to: u64,
}

/// App whose event reports for one device are inverted inside the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertWindow {
    pub app_id: String,
    pub device: String,
    pub from: u64,
    pub to: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub duration_ms: u64,
    pub topology: Vec<DeviceModel>,
    pub apps: Vec<AppInstance>,
    pub users: Vec<UserBinding>,
    pub timeline: Vec<TimelineEvent>,
    #[serde(default)]
    pub injections: Vec<InjectionRecord>,
    #[serde(default)]
    pub truth: Vec<TruthWindow>,
    #[serde(default)]
    pub tampered: Vec<TamperWindow>,
    #[serde(default)]
    pub inverted: Vec<InvertWindow>,
}

/// Record of an applied injection, kept for reports and ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectionRecord {
    pub threat: ThreatClass,
    pub window: (u64, u64),
}

impl Scenario {
    pub fn device(&self, id: &str) -> Option<&DeviceModel> {
        self.topology.iter().find(|d| d.id == id)
    }

    pub fn zone_of(&self, device: &str) -> Option<&str> {
        self.device(device).map(|d| d.zone.as_str())
    }

    pub fn controller_of(&self, user: &str) -> Option<&str> {
        self.users.iter().find(|u| u.user_id == user).map(|u| u.controller_id.as_str())
    }

    pub fn tampered_devices(&self) -> BTreeSet<String> {
        self.tampered.iter().map(|t| t.device.clone()).collect()
    }

    fn validate(&self) -> Result<(), SchemaError> {
        let mut ids = BTreeSet::new();
        for d in &self.topology {
            if !ids.insert(&d.id) {
                return Err(SchemaError::invalid("topology", format!("duplicate device id {:?}", d.id)));
            }
        }
        let mut prev = 0u64;
        for (i, ev) in self.timeline.iter().enumerate() {
            if ev.ts < prev {
                return Err(SchemaError::invalid(
                    format!("timeline[{i}].ts"),
                    "timestamps must be non-decreasing",
                ));
            }
            prev = ev.ts;
            if let TimelineAction::SensorChange { device, .. }
            | TimelineAction::Command { device, .. } = &ev.action
            {
                if self.device(device).is_none() {
                    return Err(SchemaError::invalid(
                        format!("timeline[{i}].device"),
                        format!("unknown device {:?}", device),
                    ));
                }
            }
        }
        for (i, inj) in self.injections.iter().enumerate() {
            if inj.window.1 > self.duration_ms || inj.window.0 > inj.window.1 {
                return Err(SchemaError::invalid(
                    format!("injections[{i}].window"),
                    "window must lie within the scenario duration",
                ));
            }
        }
        for (i, w) in self.truth.iter().enumerate() {
            if w.end > self.duration_ms || w.start > w.end {
                return Err(SchemaError::invalid(
                    format!("truth[{i}]"),
                    "window must lie within the scenario duration",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario does not parse: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid scenario at {field}: {message}")]
    Invalid { field: String, message: String },
}

impl SchemaError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> SchemaError {
        SchemaError::Invalid { field: field.into(), message: message.into() }
    }
}

/// On-disk scenario schema: a materialized `Scenario` plus an optional
/// routine block and app source references.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub seed: u64,
    pub duration_days: u64,
    pub topology: Vec<DeviceModel>,
    pub apps: Vec<AppRef>,
    pub users: Vec<UserBinding>,
    #[serde(default)]
    pub routine: Option<RoutineSpec>,
    #[serde(default)]
    pub timeline: Vec<TimelineEvent>,
    #[serde(default)]
    pub injections: Vec<InjectionSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppRef {
    pub app_id: String,
    /// Path to the app source, relative to the scenario file.
    #[serde(default)]
    pub source_file: Option<String>,
    /// Inline source, if no file reference is given.
    #[serde(default)]
    pub source_inline: Option<String>,
    #[serde(default)]
    pub bindings: BTreeMap<String, LogValue>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectionSpec {
    pub threat: String,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

/// Knobs for the office daily-routine generator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RoutineSpec {
    /// Users who stay past the allowed-hours boundary each weekday.
    #[serde(default)]
    pub late_workers: usize,
    /// Midday out-of-pattern device manipulations per weekday.
    #[serde(default)]
    pub wander_events: usize,
}

impl Default for RoutineSpec {
    fn default() -> Self {
        RoutineSpec { late_workers: 0, wander_events: 0 }
    }
}

/// Load a scenario file, materialize its routine, and apply its injections.
pub fn load_scenario(path: &Path) -> Result<Scenario, SchemaError> {
    let text = std::fs::read_to_string(path)?;
    let file: ScenarioFile = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut apps = Vec::new();
    for app in &file.apps {
        let source = match (&app.source_file, &app.source_inline) {
            (Some(rel), _) => std::fs::read_to_string(base.join(rel))?,
            (None, Some(inline)) => inline.clone(),
            (None, None) => {
                return Err(SchemaError::invalid(
                    format!("apps[{:?}]", app.app_id),
                    "either source_file or source_inline is required",
                ))
            }
        };
        apps.push(AppInstance { app_id: app.app_id.clone(), source, bindings: app.bindings.clone() });
    }
    let mut scenario = Scenario {
        name: file.name,
        seed: file.seed,
        duration_ms: file.duration_days * DAY_MS,
        topology: file.topology,
        apps,
        users: file.users,
        timeline: Vec::new(),
        injections: Vec::new(),
        truth: Vec::new(),
        tampered: Vec::new(),
        inverted: Vec::new(),
    };
    let mut timeline = match &file.routine {
        Some(spec) => {
            office_timeline(&scenario.users, file.duration_days, scenario.seed, *spec)
        }
        None => Vec::new(),
    };
    timeline.extend(file.timeline.clone());
    timeline.sort_by_key(|e| e.ts);
    scenario.timeline = timeline;
    scenario.validate()?;
    for spec in &file.injections {
        let threat = ThreatClass::parse(&spec.threat)
            .ok_or_else(|| SchemaError::invalid("injections", format!("unknown threat {:?}", spec.threat)))?;
        scenario = inject_threat(&scenario, threat, &spec.params)
            .map_err(|e| SchemaError::invalid("injections", e.to_string()))?;
    }
    scenario.validate()?;
    Ok(scenario)
}

#[derive(Debug, Error, PartialEq)]
pub enum ThreatError {
    #[error("unknown threat {0:?}")]
    UnknownThreat(String),
    #[error("bad parameter {param:?}: {message}")]
    ParamError { param: String, message: String },
}

type Params = BTreeMap<String, serde_json::Value>;

fn param_str<'a>(params: &'a Params, key: &str, default: &'a str) -> Result<&'a str, ThreatError> {
    match params.get(key) {
        None => Ok(default),
        Some(serde_json::Value::String(s)) => Ok(s.as_str()),
        Some(_) => Err(ThreatError::ParamError { param: key.into(), message: "expected a string".into() }),
    }
}

fn param_u64(params: &Params, key: &str, default: u64) -> Result<u64, ThreatError> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| ThreatError::ParamError { param: key.into(), message: "expected an integer".into() }),
    }
}

/// Amend a scenario per the threat catalog: extra timeline events, tamper or
/// inversion windows, and ground-truth labels (with an equal-length benign
/// twin window one day earlier for evaluation).
pub fn inject_threat(scenario: &Scenario, threat: ThreatClass, params: &Params) -> Result<Scenario, ThreatError> {
    if threat == ThreatClass::Benign {
        return Err(ThreatError::UnknownThreat("Benign".into()));
    }
    let mut out = scenario.clone();
    let day = param_u64(params, "day", 1)?;
    let base = day * DAY_MS;
    let at = |h: u64, m: u64, s: u64| base + h * HOUR_MS + m * MIN_MS + s * 1000;

    let mut events: Vec<TimelineEvent> = Vec::new();
    let user_cmd = |user: &str, ts: u64, device: &str, command: &str| TimelineEvent {
        ts,
        actor: Actor::User { id: user.to_string() },
        action: TimelineAction::Command {
            device: device.to_string(),
            command: command.to_string(),
            args: Vec::new(),
            origin_mode: None,
            controller: None,
        },
    };
    let sensor = |ts: u64, device: &str, attribute: &str, value: &str| TimelineEvent {
        ts,
        actor: Actor::Env,
        action: TimelineAction::SensorChange {
            device: device.to_string(),
            attribute: attribute.to_string(),
            value: LogValue::Text(value.to_string()),
        },
    };

    let window: (u64, u64);
    match threat {
        ThreatClass::Activity1 => {
            // Anomalous in-zone control: rapid light toggling by an
            // authorized user while the office is occupied.
            let device = param_str(params, "device", "light-office-a")?.to_string();
            let user = param_str(params, "user", "user-02")?.to_string();
            let start = at(10, 0, 0);
            for k in 0..6u64 {
                let cmd = if k % 2 == 0 { "off" } else { "on" };
                events.push(user_cmd(&user, start + k * 30_000, &device, cmd));
            }
            window = (start, start + 5 * MIN_MS);
        }
        ThreatClass::Activity2 => {
            // Remote control at night: thermostat driven from outside.
            let user = param_str(params, "user", "user-01")?.to_string();
            let start = at(22, 0, 0);
            for (k, cmd) in ["cool", "off", "cool"].iter().enumerate() {
                let mut ev = user_cmd(&user, start + k as u64 * 2 * MIN_MS, "thermo-1", cmd);
                if let TimelineAction::Command { origin_mode, .. } = &mut ev.action {
                    *origin_mode = Some(LocationMode::Other);
                }
                events.push(ev);
            }
            window = (start, start + 10 * MIN_MS);
        }
        ThreatClass::Activity3 => {
            // Presence in the restricted server room during office hours.
            let start = at(14, 0, 0);
            events.push(sensor(start, "door-server", "contact", "open"));
            events.push(sensor(start + 30_000, "motion-server", "motion", "active"));
            events.push(sensor(start + MIN_MS, "door-server", "contact", "closed"));
            events.push(sensor(start + 8 * MIN_MS, "motion-server", "motion", "inactive"));
            events.push(sensor(start + 8 * MIN_MS + 30_000, "door-server", "contact", "open"));
            events.push(sensor(start + 9 * MIN_MS, "door-server", "contact", "closed"));
            window = (start, start + 10 * MIN_MS);
        }
        ThreatClass::Activity4 => {
            // Motion through the office after hours, nobody touches the lock.
            let start = at(21, 0, 0);
            events.push(sensor(start, "motion-lobby", "motion", "active"));
            events.push(sensor(start + 2 * MIN_MS, "motion-office-a", "motion", "active"));
            events.push(sensor(start + 6 * MIN_MS, "motion-lobby", "motion", "inactive"));
            events.push(sensor(start + 8 * MIN_MS, "motion-office-a", "motion", "inactive"));
            window = (start, start + 10 * MIN_MS);
        }
        ThreatClass::Activity5 => {
            // Secure-pin unlock after hours by an authorized user.
            let user = param_str(params, "user", "user-03")?.to_string();
            let start = at(20, 45, 0);
            events.push(user_cmd(&user, start, "lock-main", "unlock"));
            events.push(sensor(start + 30_000, "door-main", "contact", "open"));
            events.push(sensor(start + MIN_MS, "door-main", "contact", "closed"));
            events.push(sensor(start + 40_000, "motion-lobby", "motion", "active"));
            events.push(sensor(start + 5 * MIN_MS, "motion-lobby", "motion", "inactive"));
            window = (at(20, 40, 0), at(20, 55, 0));
        }
        ThreatClass::Behavior1 => {
            // Tampered devices: reports freeze at their last value.
            let devices: Vec<String> = match params.get("devices") {
                Some(serde_json::Value::Array(list)) => list
                    .iter()
                    .map(|v| {
                        v.as_str().map(str::to_string).ok_or_else(|| ThreatError::ParamError {
                            param: "devices".into(),
                            message: "expected device id strings".into(),
                        })
                    })
                    .collect::<Result<_, _>>()?,
                None => Vec::new(),
                Some(_) => {
                    return Err(ThreatError::ParamError {
                        param: "devices".into(),
                        message: "expected an array".into(),
                    })
                }
            };
            let from = base;
            let to = scenario.duration_ms;
            for device in &devices {
                if scenario.device(device).is_none() {
                    return Err(ThreatError::ParamError {
                        param: "devices".into(),
                        message: format!("unknown device {:?}", device),
                    });
                }
                out.tampered.push(TamperWindow { device: device.clone(), from, to });
            }
            if devices.is_empty() {
                // Tampering zero devices changes nothing.
                return Ok(out);
            }
            out.truth.push(TruthWindow { start: from, end: to, class: ThreatClass::Behavior1 });
            out.injections.push(InjectionRecord { threat, window: (from, to) });
            return Ok(out);
        }
        ThreatClass::Behavior2 => {
            // Impersonation: a leaked pin used from an unregistered
            // controller, followed by a walk into the server room.
            let controller = param_str(params, "controller", "ctrl-unknown-77")?.to_string();
            let start = at(13, 0, 0);
            let mut unlock = user_cmd("intruder", start, "lock-main", "unlock");
            if let TimelineAction::Command { controller: c, .. } = &mut unlock.action {
                *c = Some(controller);
            }
            events.push(unlock);
            events.push(sensor(start + 30_000, "door-main", "contact", "open"));
            events.push(sensor(start + MIN_MS, "door-main", "contact", "closed"));
            events.push(sensor(start + 2 * MIN_MS, "door-server", "contact", "open"));
            events.push(sensor(start + 2 * MIN_MS + 30_000, "motion-server", "motion", "active"));
            events.push(sensor(start + 7 * MIN_MS, "motion-server", "motion", "inactive"));
            events.push(sensor(start + 8 * MIN_MS, "door-server", "contact", "closed"));
            window = (at(12, 55, 0), at(13, 10, 0));
        }
        ThreatClass::Behavior3 => {
            // False data injection: the zone app reports inverted states
            // across the afternoon meeting, contradicting the independent
            // observer when the conference room empties.
            let app_id = param_str(params, "app", "conference-light")?.to_string();
            let device = param_str(params, "device", "motion-conference")?.to_string();
            let from = at(14, 45, 0);
            let to = at(16, 30, 0);
            out.inverted.push(InvertWindow { app_id, device, from, to });
            window = (from, to);
        }
        ThreatClass::Behavior4 => {
            // Malicious app enforces incorrect thermostat state mid-day.
            let app = param_str(params, "app", "mal-climate")?.to_string();
            let start = at(11, 0, 0);
            for k in 0..6u64 {
                events.push(TimelineEvent {
                    ts: start + k * 2 * MIN_MS,
                    actor: Actor::App { id: app.clone() },
                    action: TimelineAction::Command {
                        device: "thermo-1".into(),
                        command: "off".into(),
                        args: Vec::new(),
                        origin_mode: None,
                        controller: None,
                    },
                });
            }
            window = (start, start + 15 * MIN_MS);
        }
        ThreatClass::Behavior5 => {
            // Side channel: rapid light pattern immediately precedes another
            // device's disable.
            let app = param_str(params, "app", "mal-light")?.to_string();
            let pattern_device = param_str(params, "pattern_device", "light-kitchen")?.to_string();
            let target = param_str(params, "target_device", "cam-lobby")?.to_string();
            let start = at(15, 0, 0);
            let app_cmd = |ts: u64, device: &str, command: &str| TimelineEvent {
                ts,
                actor: Actor::App { id: app.clone() },
                action: TimelineAction::Command {
                    device: device.to_string(),
                    command: command.to_string(),
                    args: Vec::new(),
                    origin_mode: None,
                    controller: None,
                },
            };
            for k in 0..5u64 {
                let cmd = if k % 2 == 0 { "on" } else { "off" };
                events.push(app_cmd(start + k * 1000, &pattern_device, cmd));
            }
            events.push(app_cmd(start + 5500, &target, "off"));
            window = (at(14, 58, 0), at(15, 5, 0));
        }
        ThreatClass::Benign => unreachable!(),
    }

    if window.1 > scenario.duration_ms {
        return Err(ThreatError::ParamError {
            param: "day".into(),
            message: "injection window extends past the scenario end".into(),
        });
    }
    out.timeline.extend(events);
    out.timeline.sort_by_key(|e| e.ts);
    out.truth.push(TruthWindow { start: window.0, end: window.1, class: threat });
    // Equal-length benign twin one day earlier, for evaluation windows.
    if window.0 >= DAY_MS {
        out.truth.push(TruthWindow {
            start: window.0 - DAY_MS,
            end: window.1 - DAY_MS,
            class: ThreatClass::Benign,
        });
    }
    out.injections.push(InjectionRecord { threat, window });
    Ok(out)
}

/// The evaluation topology: 22 devices of 10 types across six zones.
pub fn office_topology() -> Vec<DeviceModel> {
    use DeviceType::*;
    let mut d = Vec::new();
    d.push(DeviceModel::new("hub-1", Hub, "lobby"));
    d.push(DeviceModel::new("light-lobby", Light, "lobby"));
    d.push(DeviceModel::new("light-office-a", Light, "office-a"));
    d.push(DeviceModel::new("light-office-b", Light, "office-b"));
    d.push(DeviceModel::new("light-conference", Light, "conference"));
    d.push(DeviceModel::new("light-kitchen", Light, "kitchen"));
    d.push(DeviceModel::new("motion-lobby", MotionSensor, "lobby"));
    d.push(DeviceModel::new("motion-office-a", MotionSensor, "office-a"));
    d.push(DeviceModel::new("motion-office-b", MotionSensor, "office-b"));
    d.push(DeviceModel::new("motion-conference", MotionSensor, "conference"));
    d.push(DeviceModel::new("motion-server", MotionSensor, "server-room"));
    d.push(DeviceModel::new("motion-kitchen", MotionSensor, "kitchen"));
    d.push(DeviceModel::new("door-main", DoorSensor, "lobby"));
    d.push(DeviceModel::new("door-server", DoorSensor, "server-room"));
    d.push(DeviceModel::new("door-conference", DoorSensor, "conference"));
    d.push(DeviceModel::new("lock-main", Lock, "lobby"));
    d.push(DeviceModel::new("thermo-1", Thermostat, "office-a"));
    d.push(DeviceModel::new("temp-office-a", TemperatureSensor, "office-a"));
    d.push(DeviceModel::new("temp-server", TemperatureSensor, "server-room"));
    d.push(DeviceModel::new("lux-lobby", LightSensor, "lobby"));
    d.push(DeviceModel::new("cam-lobby", Camera, "lobby"));
    d.push(DeviceModel::new("alarm-1", FireAlarm, "kitchen"));
    d
}

/// The first user works the front desk; the rest split across the offices.
pub fn office_users(count: usize) -> Vec<UserBinding> {
    (1..=count)
        .map(|i| UserBinding {
            user_id: format!("user-{:02}", i),
            controller_id: format!("ctrl-{:02}", i),
            zone: if i == 1 {
                "lobby".into()
            } else if i % 2 == 1 {
                "office-a".into()
            } else {
                "office-b".into()
            },
        })
        .collect()
}

pub fn office_app_instances() -> Vec<AppInstance> {
    let text = |s: &str| LogValue::Text(s.to_string());
    let num = LogValue::Number;
    let bind = |pairs: Vec<(&str, LogValue)>| -> BTreeMap<String, LogValue> {
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    };
    let mut apps = Vec::new();
    let mut push = |id: &str, source: &str, bindings: BTreeMap<String, LogValue>| {
        apps.push(AppInstance { app_id: id.to_string(), source: source.to_string(), bindings });
    };
    push(
        "lobby-light",
        corpus::LOBBY_LIGHT,
        bind(vec![
            ("motionSensor", text("motion-lobby")),
            ("light", text("light-lobby")),
            // High-traffic zone, short timeout.
            ("offDelay", num(60.0)),
        ]),
    );
    push(
        "office-a-light",
        corpus::OFFICE_A_LIGHT,
        bind(vec![
            ("motionSensor", text("motion-office-a")),
            ("light", text("light-office-a")),
            ("offDelay", num(120.0)),
        ]),
    );
    push(
        "office-b-light",
        corpus::OFFICE_B_LIGHT,
        bind(vec![
            ("motionSensor", text("motion-office-b")),
            ("light", text("light-office-b")),
            ("offDelay", num(120.0)),
        ]),
    );
    push(
        "conference-light",
        corpus::CONFERENCE_LIGHT,
        bind(vec![
            ("motionSensor", text("motion-conference")),
            ("doorSensor", text("door-conference")),
            ("light", text("light-conference")),
        ]),
    );
    push(
        "thermostat-comfort",
        corpus::THERMOSTAT_COMFORT,
        bind(vec![
            ("tempSensor", text("temp-office-a")),
            ("thermostat", text("thermo-1")),
            ("setpoint", num(72.0)),
            ("alertPoint", num(85.0)),
            ("phone", text("5550100")),
        ]),
    );
    push(
        "security-monitor",
        corpus::SECURITY_MONITOR,
        bind(vec![("camera", text("cam-lobby")), ("serverDoor", text("door-server"))]),
    );
    push(
        "smoke-alert",
        corpus::SMOKE_ALERT,
        bind(vec![
            ("smokeDetector", text("alarm-1")),
            ("phone", text("5550100")),
            ("endpoint", text("https://monitor.example.org/smoke")),
        ]),
    );
    push(
        "lock-manager",
        corpus::LOCK_MANAGER,
        bind(vec![
            ("mainDoor", text("door-main")),
            ("lock", text("lock-main")),
            ("relockDelay", num(30.0)),
        ]),
    );
    push(
        "activity-logger",
        corpus::ACTIVITY_LOGGER,
        bind(vec![
            ("motionLobby", text("motion-lobby")),
            ("motionOfficeA", text("motion-office-a")),
            ("motionOfficeB", text("motion-office-b")),
            ("motionConference", text("motion-conference")),
            ("motionServer", text("motion-server")),
            ("motionKitchen", text("motion-kitchen")),
            ("doorMain", text("door-main")),
            ("doorServer", text("door-server")),
            ("doorConference", text("door-conference")),
            ("entranceLock", text("lock-main")),
            ("lightLobby", text("light-lobby")),
            ("lightOfficeA", text("light-office-a")),
            ("lightOfficeB", text("light-office-b")),
            ("lightConference", text("light-conference")),
            ("lightKitchen", text("light-kitchen")),
            ("thermostat", text("thermo-1")),
            ("tempOfficeA", text("temp-office-a")),
            ("tempServer", text("temp-server")),
            ("luxLobby", text("lux-lobby")),
            ("camera", text("cam-lobby")),
            ("smokeDetector", text("alarm-1")),
            ("luxThreshold", num(500.0)),
        ]),
    );
    push(
        "climate-guard",
        corpus::CLIMATE_GUARD,
        bind(vec![
            ("tempSensor", text("temp-server")),
            ("thermostat", text("thermo-1")),
            ("maxTemp", num(80.0)),
            ("endpoint", text("https://ops.example.org/alerts")),
        ]),
    );
    apps
}

/// Build the full office-baseline scenario with a materialized timeline.
/// Day zero is a Monday; days five and six of each week are weekend days
/// with environmental readings only.
pub fn office_baseline(seed: u64, days: u64, user_count: usize, spec: RoutineSpec) -> Scenario {
    let users = office_users(user_count);
    let timeline = office_timeline(&users, days, seed, spec);
    Scenario {
        name: format!("office-baseline-u{}-{}", user_count, seed),
        seed,
        duration_ms: days * DAY_MS,
        topology: office_topology(),
        apps: office_app_instances(),
        users,
        timeline,
        injections: Vec::new(),
        truth: Vec::new(),
        tampered: Vec::new(),
        inverted: Vec::new(),
    }
}

/// Merge per-user presence intervals into active/inactive sensor events.
fn occupancy_events(
    device: &str,
    mut intervals: Vec<(u64, u64)>,
    out: &mut Vec<TimelineEvent>,
) {
    intervals.retain(|(a, b)| a < b);
    intervals.sort();
    let mut merged: Vec<(u64, u64)> = Vec::new();
    for (a, b) in intervals {
        match merged.last_mut() {
            Some((_, end)) if a <= *end => *end = (*end).max(b),
            _ => merged.push((a, b)),
        }
    }
    for (a, b) in merged {
        out.push(TimelineEvent {
            ts: a,
            actor: Actor::Env,
            action: TimelineAction::SensorChange {
                device: device.to_string(),
                attribute: "motion".into(),
                value: LogValue::Text("active".into()),
            },
        });
        out.push(TimelineEvent {
            ts: b,
            actor: Actor::Env,
            action: TimelineAction::SensorChange {
                device: device.to_string(),
                attribute: "motion".into(),
                value: LogValue::Text("inactive".into()),
            },
        });
    }
}

fn office_temp_curve(ms_of_day: u64) -> f64 {
    let h = ms_of_day as f64 / HOUR_MS as f64;
    if h < 6.0 {
        66.0
    } else if h < 10.0 {
        66.0 + 8.0 * (h - 6.0) / 4.0
    } else if h < 17.0 {
        74.0
    } else if h < 19.0 {
        74.0 - 8.0 * (h - 17.0) / 2.0
    } else {
        66.0
    }
}

fn lux_curve(ms_of_day: u64) -> f64 {
    let h = ms_of_day as f64 / HOUR_MS as f64;
    if h < 6.0 {
        80.0
    } else if h < 9.0 {
        80.0 + (900.0 - 80.0) * (h - 6.0) / 3.0
    } else if h < 16.0 {
        900.0
    } else if h < 19.0 {
        900.0 - (900.0 - 80.0) * (h - 16.0) / 3.0
    } else {
        80.0
    }
}

/// Generate the benign weekday routine plus environmental curves.
pub fn office_timeline(users: &[UserBinding], days: u64, seed: u64, spec: RoutineSpec) -> Vec<TimelineEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<TimelineEvent> = Vec::new();
    let env_sensor = |ts: u64, device: &str, attribute: &str, value: LogValue| TimelineEvent {
        ts,
        actor: Actor::Env,
        action: TimelineAction::SensorChange {
            device: device.to_string(),
            attribute: attribute.to_string(),
            value,
        },
    };

    for day in 0..days {
        let base = day * DAY_MS;
        // Environmental curves run every day, weekends included.
        for tick in 0..(DAY_MS / (5 * MIN_MS)) {
            let ts = base + tick * 5 * MIN_MS;
            let tod = ts - base;
            let noise: f64 = rng.random_range(-0.5..0.5);
            out.push(env_sensor(
                ts,
                "temp-office-a",
                "temperature",
                LogValue::Number(office_temp_curve(tod) + noise),
            ));
            let noise2: f64 = rng.random_range(-0.5..0.5);
            out.push(env_sensor(ts, "temp-server", "temperature", LogValue::Number(64.0 + noise2)));
        }
        for tick in 0..(DAY_MS / (10 * MIN_MS)) {
            let ts = base + tick * 10 * MIN_MS;
            let tod = ts - base;
            let noise: f64 = rng.random_range(-10.0..10.0);
            out.push(env_sensor(ts, "lux-lobby", "illuminance", LogValue::Number(lux_curve(tod) + noise)));
        }

        let weekday = (day % 7) < 5;
        if !weekday || users.is_empty() {
            continue;
        }

        // Per-user schedule for the day.
        let mut arrivals: Vec<(usize, u64)> = Vec::new();
        let mut departures: Vec<(usize, u64)> = Vec::new();
        let late_from = users.len().saturating_sub(spec.late_workers);
        for (i, _) in users.iter().enumerate() {
            let arrival = base + 7 * HOUR_MS + 45 * MIN_MS + rng.random_range(0..75) * MIN_MS;
            let departure = if i >= late_from {
                // Overtime past the allowed-hours boundary.
                base + 20 * HOUR_MS + MIN_MS + (i as u64) * MIN_MS
            } else {
                base + 17 * HOUR_MS + 15 * MIN_MS + rng.random_range(0..60) * MIN_MS
            };
            arrivals.push((i, arrival));
            departures.push((i, departure));
        }
        let first_arrival = arrivals.iter().map(|(_, t)| *t).min().unwrap();
        let last_departure = departures.iter().map(|(_, t)| *t).max().unwrap();

        out.push(TimelineEvent {
            ts: first_arrival - MIN_MS,
            actor: Actor::Env,
            action: TimelineAction::ModeChange { mode: LocationMode::Office },
        });
        out.push(TimelineEvent {
            ts: last_departure + 3 * MIN_MS,
            actor: Actor::Env,
            action: TimelineAction::ModeChange { mode: LocationMode::Other },
        });

        // Meetings: two fixed slots with fixed attendee groups.
        let meeting1 = (base + 10 * HOUR_MS, base + 11 * HOUR_MS);
        let meeting2 = (base + 15 * HOUR_MS, base + 16 * HOUR_MS);
        let attends = |i: usize, meeting: usize| i % 3 == meeting;

        let mut lobby: Vec<(u64, u64)> = Vec::new();
        let mut zone_a: Vec<(u64, u64)> = Vec::new();
        let mut zone_b: Vec<(u64, u64)> = Vec::new();
        let mut kitchen: Vec<(u64, u64)> = Vec::new();
        let mut conference: Vec<(u64, u64)> = Vec::new();
        let mut kitchen_spans: Vec<(u64, u64, usize)> = Vec::new();

        for (i, user) in users.iter().enumerate() {
            let arrival = arrivals[i].1;
            let departure = departures[i].1;
            // Entry: unlock, door pulse, pass through the lobby.
            out.push(TimelineEvent {
                ts: arrival,
                actor: Actor::User { id: user.user_id.clone() },
                action: TimelineAction::Command {
                    device: "lock-main".into(),
                    command: "unlock".into(),
                    args: Vec::new(),
                    origin_mode: None,
                    controller: None,
                },
            });
            out.push(env_sensor(arrival + 20_000, "door-main", "contact", LogValue::Text("open".into())));
            out.push(env_sensor(arrival + 50_000, "door-main", "contact", LogValue::Text("closed".into())));
            lobby.push((arrival, arrival + 90_000));

            // Lunch in the kitchen.
            let lunch_out = base + 12 * HOUR_MS + rng.random_range(0..20) * MIN_MS;
            let lunch_back = lunch_out + (25 + rng.random_range(0..10)) * MIN_MS;
            kitchen.push((lunch_out + MIN_MS, lunch_back - MIN_MS));
            kitchen_spans.push((lunch_out + MIN_MS, lunch_back - MIN_MS, i));

            // Presence in the user's zone, minus lunch and meetings.
            let mut zone_spans = vec![(arrival + 90_000, departure)];
            let cut = |spans: &mut Vec<(u64, u64)>, hole: (u64, u64)| {
                let mut next = Vec::new();
                for (a, b) in spans.iter().copied() {
                    if hole.1 <= a || hole.0 >= b {
                        next.push((a, b));
                    } else {
                        if hole.0 > a {
                            next.push((a, hole.0));
                        }
                        if hole.1 < b {
                            next.push((hole.1, b));
                        }
                    }
                }
                *spans = next;
            };
            cut(&mut zone_spans, (lunch_out, lunch_back));
            for (m, meeting) in [meeting1, meeting2].iter().enumerate() {
                if attends(i, m + 1) {
                    cut(&mut zone_spans, *meeting);
                    conference.push(*meeting);
                }
            }
            let zone = match user.zone.as_str() {
                "lobby" => &mut lobby,
                "office-a" => &mut zone_a,
                _ => &mut zone_b,
            };
            zone.extend(zone_spans);

            // Exit: through the lobby and out the door.
            lobby.push((departure, departure + 90_000));
            out.push(env_sensor(departure + 60_000, "door-main", "contact", LogValue::Text("open".into())));
            out.push(env_sensor(departure + 80_000, "door-main", "contact", LogValue::Text("closed".into())));
        }

        // Kitchen light: switched by the first user in and the last out. The
        // main door stays propped open across the same stretch.
        if let (Some(open), Some(close)) = (
            kitchen_spans.iter().map(|(a, _, _)| *a).min(),
            kitchen_spans.iter().map(|(_, b, _)| *b).max(),
        ) {
            let first_user = kitchen_spans.iter().min_by_key(|(a, _, _)| *a).map(|(_, _, i)| *i).unwrap();
            let last_user = kitchen_spans.iter().max_by_key(|(_, b, _)| *b).map(|(_, _, i)| *i).unwrap();
            out.push(TimelineEvent {
                ts: open,
                actor: Actor::User { id: users[first_user].user_id.clone() },
                action: TimelineAction::Command {
                    device: "light-kitchen".into(),
                    command: "on".into(),
                    args: Vec::new(),
                    origin_mode: None,
                    controller: None,
                },
            });
            out.push(TimelineEvent {
                ts: close,
                actor: Actor::User { id: users[last_user].user_id.clone() },
                action: TimelineAction::Command {
                    device: "light-kitchen".into(),
                    command: "off".into(),
                    args: Vec::new(),
                    origin_mode: None,
                    controller: None,
                },
            });
            out.push(env_sensor(open - MIN_MS, "door-main", "contact", LogValue::Text("open".into())));
            out.push(env_sensor(close + MIN_MS, "door-main", "contact", LogValue::Text("closed".into())));
        }

        // Conference door open across each meeting.
        for (m, meeting) in [meeting1, meeting2].iter().enumerate() {
            if users.iter().enumerate().any(|(i, _)| attends(i, m + 1)) {
                out.push(env_sensor(meeting.0 - MIN_MS, "door-conference", "contact", LogValue::Text("open".into())));
                out.push(env_sensor(meeting.1 + MIN_MS, "door-conference", "contact", LogValue::Text("closed".into())));
            }
        }

        occupancy_events("motion-lobby", lobby, &mut out);
        occupancy_events("motion-office-a", zone_a, &mut out);
        occupancy_events("motion-office-b", zone_b, &mut out);
        occupancy_events("motion-kitchen", kitchen, &mut out);
        occupancy_events("motion-conference", conference, &mut out);

        // Out-of-pattern midday wandering, scaled by the confusion knob.
        for k in 0..spec.wander_events {
            let user = &users[k % users.len()];
            let ts = base + 14 * HOUR_MS + (k as u64) * 7 * MIN_MS + rng.random_range(0..5) * MIN_MS;
            for (offset, cmd) in [(0u64, "on"), (20_000u64, "off")] {
                out.push(TimelineEvent {
                    ts: ts + offset,
                    actor: Actor::User { id: user.user_id.clone() },
                    action: TimelineAction::Command {
                        device: "light-conference".into(),
                        command: cmd.into(),
                        args: Vec::new(),
                        origin_mode: None,
                        controller: None,
                    },
                });
            }
        }
    }

    out.sort_by_key(|e| e.ts);
    out
}

/// Build a minimal scenario that exercises one app: synthetic devices for
/// each device input plus a seeded random event trace over everything the
/// app subscribes to. Used by behavior-preservation tests.
pub fn exercise_scenario(
    app_id: &str,
    source: &str,
    seed: u64,
    event_count: usize,
) -> Result<Scenario, crate::parser::FrontendError> {
    use crate::ast::{ExprKind, InputType, StmtKind};
    use crate::device::ValueDomain;

    let unit = crate::source::SourceUnit::new(source, app_id);
    let ast = crate::parser::parse_source(&unit)?;

    let mut topology = Vec::new();
    let mut bindings: BTreeMap<String, LogValue> = BTreeMap::new();
    for input in ast.inputs() {
        match input.input_type {
            InputType::DeviceCapability => {
                let device_type = DeviceType::for_capability(&input.raw_type)
                    .unwrap_or(DeviceType::MotionSensor);
                let id = format!("dev-{}", input.name);
                topology.push(DeviceModel::new(&id, device_type, "zone-1"));
                bindings.insert(input.name.clone(), LogValue::Text(id));
            }
            InputType::Number => {
                let default = input.default_value().and_then(|e| match &e.kind {
                    ExprKind::Num(n) => Some(*n),
                    _ => None,
                });
                bindings.insert(input.name.clone(), LogValue::Number(default.unwrap_or(50.0)));
            }
            _ => {
                bindings.insert(input.name.clone(), LogValue::Text("5550123".to_string()));
            }
        }
    }

    // Everything the app subscribes to, as (device id or location, attribute).
    let mut subscribed: Vec<(Option<String>, String)> = Vec::new();
    ast.visit_stmts(&mut |_, stmt| {
        if let StmtKind::Subscribe { target, attribute, .. } = &stmt.kind {
            if let ExprKind::Ident(name) = &target.kind {
                if name == "location" {
                    subscribed.push((None, attribute.clone()));
                } else if let Some(LogValue::Text(id)) = bindings.get(name) {
                    subscribed.push((Some(id.clone()), attribute.clone()));
                }
            }
        }
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut timeline = Vec::new();
    let device_type_of = |id: &str, topology: &[DeviceModel]| {
        topology.iter().find(|d| d.id == id).map(|d| d.device_type)
    };
    for i in 0..event_count {
        let ts = (i as u64 + 1) * 30_000 + rng.random_range(0..20_000);
        if subscribed.is_empty() {
            break;
        }
        let pick = rng.random_range(0..subscribed.len());
        match &subscribed[pick] {
            (None, _) => {
                let mode =
                    if rng.random_range(0..2) == 0 { LocationMode::Office } else { LocationMode::Other };
                timeline.push(TimelineEvent { ts, actor: Actor::Env, action: TimelineAction::ModeChange { mode } });
            }
            (Some(device), attribute) => {
                let Some(device_type) = device_type_of(device, &topology) else { continue };
                let domain = device_type
                    .scriptable_attributes()
                    .into_iter()
                    .find(|(a, _)| a == attribute)
                    .map(|(_, d)| d);
                let value = match domain {
                    Some(ValueDomain::Binary(a, b)) => {
                        LogValue::Text(if rng.random_range(0..2) == 0 { a } else { b }.to_string())
                    }
                    Some(ValueDomain::Numeric(lo, hi)) => LogValue::Number(rng.random_range(lo..hi)),
                    None => continue,
                };
                timeline.push(TimelineEvent {
                    ts,
                    actor: Actor::Env,
                    action: TimelineAction::SensorChange {
                        device: device.clone(),
                        attribute: attribute.clone(),
                        value,
                    },
                });
            }
        }
    }
    timeline.sort_by_key(|e| e.ts);

    Ok(Scenario {
        name: format!("exercise-{app_id}-{seed}"),
        seed,
        duration_ms: (event_count as u64 + 10) * 60_000,
        topology,
        apps: vec![AppInstance { app_id: app_id.to_string(), source: source.to_string(), bindings }],
        users: Vec::new(),
        timeline,
        injections: Vec::new(),
        truth: Vec::new(),
        tampered: Vec::new(),
        inverted: Vec::new(),
    })
}
