//! Shared fixture loading for integration tests.

use iotdots_core::source::SourceUnit;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::PathBuf;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn load_app(name: &str) -> SourceUnit {
    let path = fixture_dir().join("apps").join(name);
    SourceUnit::from_file(&path).unwrap_or_else(|e| panic!("reading {}: {}", path.display(), e))
}

#[derive(Debug, Deserialize)]
pub struct Manifest {
    pub apps: BTreeMap<String, AppExpectations>,
    pub markov_smoothing_fixture: MarkovFixture,
}

#[derive(Debug, Deserialize)]
pub struct AppExpectations {
    pub inputs: usize,
    pub device_inputs: usize,
    pub subscriptions: usize,
    pub device_commands: usize,
    pub points: BTreeMap<String, usize>,
    pub call_edges: usize,
    #[serde(default)]
    pub call_edges_into_helper: BTreeMap<String, usize>,
    #[serde(default)]
    pub entries: Vec<String>,
    pub lines_added: usize,
    #[serde(default)]
    pub point_names: Vec<(String, String)>,
}

#[derive(Debug, Deserialize)]
pub struct MarkovFixture {
    pub trace: Vec<u64>,
    pub epsilon: f64,
    pub expected: Vec<(u64, u64, f64)>,
}

pub fn load_manifest() -> Manifest {
    let path = fixture_dir().join("manifest.json");
    let text = std::fs::read_to_string(&path).expect("manifest readable");
    serde_json::from_str(&text).expect("manifest parses")
}
