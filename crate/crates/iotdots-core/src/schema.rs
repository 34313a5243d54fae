//! Feature schema, record labeling, binarization, and state-vector building.
//!
//! A schema fixes the order of up to 64 features drawn from the four source
//! classes (sensor, device, controller, location). Numeric features binarize
//! against user-configured thresholds; binary features map through a fixed
//! truthy set. States are sampled-and-held per time slot: a feature keeps its
//! last known bit until a newer record changes it, and unknown features
//! start at zero.

use crate::logstore::{LocationMode, LogRecord, LogValue};
use crate::scenario::Scenario;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    Sensor,
    Device,
    Controller,
    Location,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub id: String,
    pub source: FeatureSource,
    #[serde(default)]
    pub device: Option<String>,
    #[serde(default)]
    pub attribute: Option<String>,
    #[serde(default)]
    pub controller: Option<String>,
    #[serde(default)]
    pub numeric: bool,
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Driven by the world outside the home (sunlight); no companion device
    /// explains it, so device cooperation cannot judge it.
    #[serde(default)]
    pub exogenous: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
}

#[derive(Debug, Error, PartialEq)]
pub enum AnalyzerError {
    #[error("numeric feature {feature:?} has no binarizer threshold")]
    MissingThreshold { feature: String },
    #[error("schema mismatch: {message}")]
    SchemaMismatch { message: String },
    #[error("schema must define between 1 and 64 features, got {count}")]
    BadFeatureCount { count: usize },
}

impl FeatureSchema {
    pub fn n(&self) -> usize {
        self.features.len()
    }

    pub fn validate(&self) -> Result<(), AnalyzerError> {
        if self.features.is_empty() || self.features.len() > 64 {
            return Err(AnalyzerError::BadFeatureCount { count: self.features.len() });
        }
        for f in &self.features {
            if f.numeric && f.threshold.is_none() {
                return Err(AnalyzerError::MissingThreshold { feature: f.id.clone() });
            }
        }
        Ok(())
    }

    /// Feature bit positions belonging to each device.
    pub fn device_features(&self) -> BTreeMap<String, Vec<usize>> {
        let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, f) in self.features.iter().enumerate() {
            if let Some(device) = &f.device {
                out.entry(device.clone()).or_default().push(i);
            }
        }
        out
    }
}

/// Strict-greater binarization: readings over the threshold become 1.
pub fn binarize(value: f64, threshold: f64) -> u8 {
    (value > threshold) as u8
}

const TRUTHY: &[&str] = &[
    "active", "open", "on", "unlocked", "detected", "present", "recording", "cool", "heat",
    "siren", "Office", "true",
];

/// Bit for a feature given a record value.
pub fn feature_bit(spec: &FeatureSpec, value: &LogValue) -> Result<u8, AnalyzerError> {
    if spec.numeric {
        let threshold = spec
            .threshold
            .ok_or_else(|| AnalyzerError::MissingThreshold { feature: spec.id.clone() })?;
        let Some(v) = value.as_number() else {
            return Ok(0);
        };
        return Ok(binarize(v, threshold));
    }
    Ok(TRUTHY.contains(&value.as_text().as_str()) as u8)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecord {
    pub record: LogRecord,
    pub slot: u64,
    /// Zone of the originating device; "Unknown" for unregistered devices.
    pub zone: Option<String>,
    pub known_device: bool,
}

/// Annotate records with time slot and device zone. Unknown devices are
/// labeled, never dropped.
pub fn label_logs(records: &[LogRecord], zones: &BTreeMap<String, String>, dt_ms: u64) -> Vec<LabeledRecord> {
    records
        .iter()
        .map(|record| {
            let (zone, known) = match &record.device_id {
                None => (None, true),
                Some(d) => match zones.get(d) {
                    Some(z) => (Some(z.clone()), true),
                    None => (Some("Unknown".to_string()), false),
                },
            };
            LabeledRecord {
                record: record.clone(),
                slot: record.ts / dt_ms.max(1),
                zone,
                known_device: known,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub bits: u64,
    pub slot: u64,
    pub ts_range: (u64, u64),
}

/// Build one state vector per slot from the first to last record slot,
/// sample-and-hold per feature.
pub fn build_states(
    labeled: &[LabeledRecord],
    schema: &FeatureSchema,
    dt_ms: u64,
) -> Result<Vec<StateVector>, AnalyzerError> {
    schema.validate()?;
    if labeled.is_empty() {
        return Ok(Vec::new());
    }
    let first_slot = labeled.iter().map(|l| l.slot).min().unwrap();
    let last_slot = labeled.iter().map(|l| l.slot).max().unwrap();

    let mut bits: u64 = 0;
    let mut states = Vec::with_capacity((last_slot - first_slot + 1) as usize);
    let mut idx = 0usize;
    for slot in first_slot..=last_slot {
        while idx < labeled.len() && labeled[idx].slot <= slot {
            let l = &labeled[idx];
            idx += 1;
            if l.slot < slot {
                continue;
            }
            for (fi, spec) in schema.features.iter().enumerate() {
                if record_matches(spec, &l.record) {
                    let bit = feature_value(spec, &l.record)?;
                    if bit == 1 {
                        bits |= 1 << fi;
                    } else {
                        bits &= !(1 << fi);
                    }
                }
            }
        }
        states.push(StateVector { bits, slot, ts_range: (slot * dt_ms, (slot + 1) * dt_ms) });
    }
    Ok(states)
}

fn record_matches(spec: &FeatureSpec, record: &LogRecord) -> bool {
    match spec.source {
        FeatureSource::Sensor | FeatureSource::Device => {
            spec.device.as_deref() == record.device_id.as_deref()
                && spec.attribute.as_deref() == record.attribute.as_deref()
        }
        FeatureSource::Controller => {
            record.controller_id.is_some() && spec.controller.as_deref() == record.controller_id.as_deref()
        }
        FeatureSource::Location => true,
    }
}

fn feature_value(spec: &FeatureSpec, record: &LogRecord) -> Result<u8, AnalyzerError> {
    match spec.source {
        FeatureSource::Location => Ok((record.location_mode == LocationMode::Office) as u8),
        FeatureSource::Controller => Ok(1),
        _ => feature_bit(spec, &record.value),
    }
}

/// Schema for the office-baseline topology: sensor features, device features,
/// and the location mode bit. Numeric thresholds come from the apps'
/// user-configured inputs.
pub fn office_schema(scenario: &Scenario) -> FeatureSchema {
    let binding_num = |app: &str, input: &str| -> Option<f64> {
        scenario
            .apps
            .iter()
            .find(|a| a.app_id == app)
            .and_then(|a| a.bindings.get(input))
            .and_then(|v| v.as_number())
    };
    let mut features = Vec::new();
    let sensor = |device: &str, attribute: &str| FeatureSpec {
        id: format!("{device}.{attribute}"),
        source: FeatureSource::Sensor,
        device: Some(device.to_string()),
        attribute: Some(attribute.to_string()),
        controller: None,
        numeric: false,
        threshold: None,
        exogenous: false,
    };
    let device_feature = |device: &str, attribute: &str| FeatureSpec {
        source: FeatureSource::Device,
        ..sensor(device, attribute)
    };
    for d in &scenario.topology {
        use crate::device::DeviceType::*;
        match d.device_type {
            MotionSensor => features.push(sensor(&d.id, "motion")),
            DoorSensor => features.push(sensor(&d.id, "contact")),
            TemperatureSensor => {
                let threshold = match d.id.as_str() {
                    "temp-office-a" => binding_num("thermostat-comfort", "setpoint"),
                    "temp-server" => binding_num("climate-guard", "maxTemp"),
                    _ => None,
                }
                .unwrap_or(72.0);
                features.push(FeatureSpec {
                    numeric: true,
                    threshold: Some(threshold),
                    ..sensor(&d.id, "temperature")
                });
            }
            LightSensor => {
                let threshold = binding_num("activity-logger", "luxThreshold").unwrap_or(500.0);
                features.push(FeatureSpec {
                    numeric: true,
                    threshold: Some(threshold),
                    exogenous: true,
                    ..sensor(&d.id, "illuminance")
                });
            }
            FireAlarm => features.push(sensor(&d.id, "smoke")),
            Light => features.push(device_feature(&d.id, "switch")),
            Lock => features.push(device_feature(&d.id, "lock")),
            Thermostat => features.push(device_feature(&d.id, "thermostatMode")),
            Camera => features.push(device_feature(&d.id, "camera")),
            Hub => {}
        }
    }
    features.push(FeatureSpec {
        id: "location.mode".to_string(),
        source: FeatureSource::Location,
        device: None,
        attribute: None,
        controller: None,
        numeric: false,
        threshold: None,
        exogenous: false,
    });
    FeatureSchema { features }
}
