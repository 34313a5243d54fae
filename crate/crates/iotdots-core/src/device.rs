//! Smart device models: the ten supported device types, their attributes,
//! commands, and the capability strings apps use to request them.

use crate::logstore::LogValue;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviceType {
    Hub,
    Light,
    Lock,
    FireAlarm,
    Camera,
    Thermostat,
    MotionSensor,
    LightSensor,
    TemperatureSensor,
    DoorSensor,
}

impl DeviceType {
    pub const ALL: [DeviceType; 10] = [
        DeviceType::Hub,
        DeviceType::Light,
        DeviceType::Lock,
        DeviceType::FireAlarm,
        DeviceType::Camera,
        DeviceType::Thermostat,
        DeviceType::MotionSensor,
        DeviceType::LightSensor,
        DeviceType::TemperatureSensor,
        DeviceType::DoorSensor,
    ];

    /// Initial attribute values for a fresh device.
    pub fn default_attributes(&self) -> BTreeMap<String, LogValue> {
        let mut attrs = BTreeMap::new();
        let mut put = |k: &str, v: LogValue| {
            attrs.insert(k.to_string(), v);
        };
        match self {
            DeviceType::Hub => put("status", LogValue::Text("online".into())),
            DeviceType::Light => put("switch", LogValue::Text("off".into())),
            DeviceType::Lock => put("lock", LogValue::Text("locked".into())),
            DeviceType::FireAlarm => {
                put("smoke", LogValue::Text("clear".into()));
                put("alarm", LogValue::Text("off".into()));
            }
            DeviceType::Camera => put("camera", LogValue::Text("off".into())),
            DeviceType::Thermostat => {
                put("thermostatMode", LogValue::Text("off".into()));
                put("coolingSetpoint", LogValue::Number(72.0));
                put("heatingSetpoint", LogValue::Number(68.0));
            }
            DeviceType::MotionSensor => put("motion", LogValue::Text("inactive".into())),
            DeviceType::LightSensor => put("illuminance", LogValue::Number(0.0)),
            DeviceType::TemperatureSensor => put("temperature", LogValue::Number(65.0)),
            DeviceType::DoorSensor => put("contact", LogValue::Text("closed".into())),
        }
        attrs
    }

    /// State mutation performed by a command, or None for unknown commands.
    pub fn command_effect(&self, command: &str, args: &[LogValue]) -> Option<(String, LogValue)> {
        let text = |attr: &str, value: &str| Some((attr.to_string(), LogValue::Text(value.into())));
        match (self, command) {
            (DeviceType::Light, "on") => text("switch", "on"),
            (DeviceType::Light, "off") => text("switch", "off"),
            (DeviceType::Lock, "lock") => text("lock", "locked"),
            (DeviceType::Lock, "unlock") => text("lock", "unlocked"),
            (DeviceType::Camera, "record" | "on") => text("camera", "on"),
            (DeviceType::Camera, "stop" | "off") => text("camera", "off"),
            (DeviceType::Thermostat, "cool") => text("thermostatMode", "cool"),
            (DeviceType::Thermostat, "heat") => text("thermostatMode", "heat"),
            (DeviceType::Thermostat, "off") => text("thermostatMode", "off"),
            (DeviceType::Thermostat, "setCoolingSetpoint") => {
                Some(("coolingSetpoint".to_string(), args.first()?.clone()))
            }
            (DeviceType::Thermostat, "setHeatingSetpoint") => {
                Some(("heatingSetpoint".to_string(), args.first()?.clone()))
            }
            (DeviceType::FireAlarm, "siren") => text("alarm", "siren"),
            (DeviceType::FireAlarm, "off") => text("alarm", "off"),
            _ => None,
        }
    }

    /// Attributes a test event generator may script, with their domains.
    pub fn scriptable_attributes(&self) -> Vec<(&'static str, ValueDomain)> {
        match self {
            DeviceType::MotionSensor => {
                vec![("motion", ValueDomain::Binary("active", "inactive"))]
            }
            DeviceType::DoorSensor => vec![("contact", ValueDomain::Binary("open", "closed"))],
            DeviceType::TemperatureSensor => {
                vec![("temperature", ValueDomain::Numeric(40.0, 100.0))]
            }
            DeviceType::LightSensor => vec![("illuminance", ValueDomain::Numeric(0.0, 1000.0))],
            DeviceType::FireAlarm => vec![("smoke", ValueDomain::Binary("detected", "clear"))],
            DeviceType::Light => vec![("switch", ValueDomain::Binary("on", "off"))],
            DeviceType::Lock => vec![("lock", ValueDomain::Binary("unlocked", "locked"))],
            DeviceType::Camera => vec![("camera", ValueDomain::Binary("on", "off"))],
            DeviceType::Thermostat => vec![],
            DeviceType::Hub => vec![],
        }
    }

    pub fn for_capability(raw: &str) -> Option<DeviceType> {
        match raw {
            "capability.motionSensor" => Some(DeviceType::MotionSensor),
            "capability.switch" | "capability.switchLevel" => Some(DeviceType::Light),
            "capability.contactSensor" => Some(DeviceType::DoorSensor),
            "capability.lock" => Some(DeviceType::Lock),
            "capability.thermostat" => Some(DeviceType::Thermostat),
            "capability.temperatureMeasurement" => Some(DeviceType::TemperatureSensor),
            "capability.illuminanceMeasurement" => Some(DeviceType::LightSensor),
            "capability.videoCapture" | "capability.videoCamera" => Some(DeviceType::Camera),
            "capability.smokeDetector" => Some(DeviceType::FireAlarm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ValueDomain {
    Binary(&'static str, &'static str),
    Numeric(f64, f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceModel {
    pub id: String,
    pub device_type: DeviceType,
    pub zone: String,
    /// Initial attribute overrides; unset attributes take type defaults.
    #[serde(default)]
    pub attributes: BTreeMap<String, LogValue>,
}

impl DeviceModel {
    pub fn new(id: &str, device_type: DeviceType, zone: &str) -> Self {
        DeviceModel {
            id: id.to_string(),
            device_type,
            zone: zone.to_string(),
            attributes: BTreeMap::new(),
        }
    }

    pub fn initial_attributes(&self) -> BTreeMap<String, LogValue> {
        let mut attrs = self.device_type.default_attributes();
        for (k, v) in &self.attributes {
            attrs.insert(k.clone(), v.clone());
        }
        attrs
    }
}

/// Flip a binary state value; numeric and unknown values pass through.
pub fn invert_binary(value: &LogValue) -> LogValue {
    let LogValue::Text(s) = value else { return value.clone() };
    let flipped = match s.as_str() {
        "active" => "inactive",
        "inactive" => "active",
        "open" => "closed",
        "closed" => "open",
        "on" => "off",
        "off" => "on",
        "locked" => "unlocked",
        "unlocked" => "locked",
        "detected" => "clear",
        "clear" => "detected",
        "Office" => "Other",
        "Other" => "Office",
        other => other,
    };
    LogValue::Text(flipped.to_string())
}
