//! Anomaly detection and threat classification.
//!
//! Transitions are anomalous when their smoothed probability falls below the
//! threshold, or when the model mispredicts and the observed transition was
//! never seen in training. Anomalous transitions merge into windows, and each
//! window is classified by an evidence cascade ordered from the most specific
//! signature to the residual class. Tampered devices are found separately by
//! device cooperation: a per-device leave-one-out model predicts the next
//! context, the context majority implies the device's bit, and sustained
//! contradiction flags the device.

use crate::logstore::LocationMode;
use crate::markov::TransitionModel;
use crate::scenario::{ThreatClass, DAY_MS, MIN_MS};
use crate::schema::{AnalyzerError, FeatureSchema, LabeledRecord, StateVector};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HoursWindow {
    /// Days of week, 0 = Monday.
    pub days: Vec<u8>,
    /// Inclusive start minute of day.
    pub start_min: u32,
    /// Exclusive end minute of day.
    pub end_min: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestrictedZone {
    pub zone: String,
    #[serde(default)]
    pub authorized_users: Vec<String>,
    #[serde(default)]
    pub authorized_controllers: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityPolicy {
    pub allowed_hours: Vec<HoursWindow>,
    #[serde(default)]
    pub restricted_zones: Vec<RestrictedZone>,
    #[serde(default)]
    pub authorized_controllers: BTreeSet<String>,
    #[serde(default)]
    pub authorized_apps: BTreeSet<String>,
}

impl SecurityPolicy {
    pub fn is_allowed_time(&self, ts: u64) -> bool {
        let day = ((ts / DAY_MS) % 7) as u8;
        let minute = ((ts % DAY_MS) / MIN_MS) as u32;
        self.allowed_hours
            .iter()
            .any(|w| w.days.contains(&day) && minute >= w.start_min && minute < w.end_min)
    }

    /// True if any part of the window falls outside allowed hours.
    pub fn intersects_disallowed(&self, start: u64, end: u64) -> bool {
        let mut ts = start;
        while ts < end {
            if !self.is_allowed_time(ts) {
                return true;
            }
            ts += MIN_MS;
        }
        !self.is_allowed_time(end)
    }

    pub fn restricted_zone(&self, zone: &str) -> Option<&RestrictedZone> {
        self.restricted_zones.iter().find(|z| z.zone == zone)
    }

    pub fn validate_zones(&self, known_zones: &BTreeSet<String>) -> Result<(), AnalyzerError> {
        for z in &self.restricted_zones {
            if !known_zones.contains(&z.zone) {
                return Err(AnalyzerError::SchemaMismatch {
                    message: format!("policy zone {:?} does not exist in the topology", z.zone),
                });
            }
        }
        Ok(())
    }
}

/// Policy used by the office evaluation: weekday office hours 07:00-20:00,
/// the server room restricted to the first user.
pub fn office_policy(controllers: impl IntoIterator<Item = String>, apps: impl IntoIterator<Item = String>) -> SecurityPolicy {
    SecurityPolicy {
        allowed_hours: vec![HoursWindow { days: vec![0, 1, 2, 3, 4], start_min: 7 * 60, end_min: 20 * 60 }],
        restricted_zones: vec![RestrictedZone {
            zone: "server-room".to_string(),
            authorized_users: vec!["user-01".to_string()],
            authorized_controllers: vec!["ctrl-01".to_string()],
        }],
        authorized_controllers: controllers.into_iter().collect(),
        authorized_apps: apps.into_iter().collect(),
    }
}

pub fn load_policy(path: &Path) -> Result<SecurityPolicy, std::io::Error> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(std::io::Error::other)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordRef {
    pub ts: u64,
    pub seq: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Detection {
    pub window: (u64, u64),
    pub class: ThreatClass,
    /// Anomaly score in [0, 1], derived from the least probable transition.
    pub score: f64,
    /// (app id, seq) references of the contributing records.
    pub evidence: Vec<(String, u64)>,
}

/// Detection and tamper parameters; defaults follow the documented values.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AnalyzerParams {
    pub dt_ms: u64,
    pub epsilon: f64,
    /// Anomaly threshold; None means half the minimum trained probability.
    pub tau: Option<f64>,
    /// Anomalous transitions closer than this many slots merge into one window.
    pub merge_gap_slots: u64,
    /// Records this far before an anomalous window still count as evidence;
    /// the access that lets an intruder in precedes the anomaly it causes.
    pub evidence_margin_ms: u64,
    /// Sliding window length (slots) for tamper detection.
    pub tamper_window: usize,
    /// Contradiction fraction above which a device is flagged.
    pub tamper_rho: f64,
    /// Side-channel pattern: minimum toggles inside the pattern window.
    pub toggle_count: usize,
    pub toggle_window_ms: u64,
}

impl Default for AnalyzerParams {
    fn default() -> Self {
        AnalyzerParams {
            dt_ms: 10_000,
            epsilon: 1e-3,
            tau: None,
            merge_gap_slots: 6,
            evidence_margin_ms: 5 * MIN_MS,
            tamper_window: 30,
            tamper_rho: 0.5,
            toggle_count: 4,
            toggle_window_ms: 5_000,
        }
    }
}

/// Detect anomalous windows and classify them against the policy.
pub fn detect_anomalies(
    model: &TransitionModel,
    schema: &FeatureSchema,
    states: &[StateVector],
    labeled: &[LabeledRecord],
    policy: &SecurityPolicy,
    params: &AnalyzerParams,
) -> Result<Vec<Detection>, AnalyzerError> {
    schema.validate()?;
    if schema.n() < 64 {
        let limit = 1u64 << schema.n();
        if let Some(bad) = states.iter().find(|s| s.bits >= limit) {
            return Err(AnalyzerError::SchemaMismatch {
                message: format!("state {:#x} does not fit the {}-feature schema", bad.bits, schema.n()),
            });
        }
    }
    if states.len() < 2 {
        return Ok(Vec::new());
    }
    let tau = params.tau.unwrap_or_else(|| model.min_trained_prob() / 2.0);

    // Anomalous transition t spans slots t..t+1.
    let mut anomalous: Vec<(usize, f64)> = Vec::new();
    for t in 0..states.len() - 1 {
        let i = states[t].bits;
        let j = states[t + 1].bits;
        let p = model.transition_prob(i, j);
        let flagged = p < tau || (model.predict_next(i) != j && !model.seen(i, j));
        if flagged {
            anomalous.push((t, p));
        }
    }
    if anomalous.is_empty() {
        return Ok(Vec::new());
    }

    // Merge nearby anomalous transitions into windows.
    let mut windows: Vec<(usize, usize, f64)> = Vec::new();
    for (t, p) in anomalous {
        match windows.last_mut() {
            Some((_, end, min_p)) if t <= *end + params.merge_gap_slots as usize => {
                *end = t + 1;
                *min_p = min_p.min(p);
            }
            _ => windows.push((t, t + 1, p)),
        }
    }

    let mut detections = Vec::new();
    for (start_slot, end_slot, min_p) in windows {
        let ts_start = states[start_slot].ts_range.0;
        let ts_end = states[end_slot].ts_range.1;
        let margin_start = ts_start.saturating_sub(params.evidence_margin_ms);
        let evidence: Vec<&LabeledRecord> = labeled
            .iter()
            .filter(|l| l.record.ts >= margin_start && l.record.ts < ts_end)
            .collect();
        if evidence.is_empty() {
            continue;
        }
        let class = classify_window(ts_start, ts_end, &evidence, policy, params);
        let refs: Vec<(String, u64)> =
            evidence.iter().map(|l| (l.record.app_id.clone(), l.record.seq)).collect();
        detections.push(Detection {
            window: (ts_start, ts_end),
            class,
            score: (1.0 - min_p).clamp(0.0, 1.0),
            evidence: refs,
        });
    }
    Ok(detections)
}

/// Evidence cascade, most specific signature first.
fn classify_window(
    start: u64,
    end: u64,
    evidence: &[&LabeledRecord],
    policy: &SecurityPolicy,
    params: &AnalyzerParams,
) -> ThreatClass {
    use crate::instrument::Category;

    let actions: Vec<&&LabeledRecord> =
        evidence.iter().filter(|l| l.record.kind == Category::Action).collect();

    // Behavior-5: a rapid on/off pattern on one device immediately followed
    // by a disable command on another.
    if behavior5_pattern(&actions, params) {
        return ThreatClass::Behavior5;
    }

    // Behavior-2: an access record from an unauthorized controller.
    let access = |l: &&&LabeledRecord| l.record.attribute.as_deref() == Some("lock");
    let unauthorized_controller = evidence.iter().any(|l| {
        l.record.attribute.as_deref() == Some("lock")
            && matches!(&l.record.controller_id, Some(c) if !policy.authorized_controllers.contains(c))
    });
    if unauthorized_controller {
        return ThreatClass::Behavior2;
    }

    // Behavior-4: actions issued by an app outside the authorized set.
    if !policy.authorized_apps.is_empty()
        && actions.iter().any(|l| !policy.authorized_apps.contains(&l.record.app_id))
    {
        return ThreatClass::Behavior4;
    }

    // Behavior-3: two apps report contradictory states for the same device
    // in the same slot (inverted-but-active reporting).
    if has_reporting_contradiction(evidence) {
        return ThreatClass::Behavior3;
    }

    let disallowed = policy.intersects_disallowed(start, end.saturating_sub(1));

    // Activity-5: lock access in regulated hours.
    if disallowed && evidence.iter().any(|l| access(&l)) {
        return ThreatClass::Activity5;
    }

    // Activity-4: motion in regulated hours.
    if disallowed && evidence.iter().any(|l| l.record.attribute.as_deref() == Some("motion")) {
        return ThreatClass::Activity4;
    }

    // Activity-2: controller-driven change reported from outside.
    if evidence.iter().any(|l| {
        l.record.controller_id.is_some()
            && l.record.location_mode == LocationMode::Other
            && l.record.attribute.as_deref() != Some("lock")
    }) {
        return ThreatClass::Activity2;
    }

    // Activity-3: presence evidence (motion or door contact) in a restricted
    // zone without an authorized controller. Routine sensor readings from
    // the zone (temperature samples) are not presence evidence.
    for l in evidence {
        let Some(zone) = &l.zone else { continue };
        let presence = matches!(l.record.attribute.as_deref(), Some("motion") | Some("contact"));
        if !presence {
            continue;
        }
        if let Some(restricted) = policy.restricted_zone(zone) {
            let authorized_present = evidence.iter().any(|e| {
                matches!(&e.record.controller_id, Some(c) if restricted.authorized_controllers.contains(c))
            });
            if !authorized_present {
                return ThreatClass::Activity3;
            }
        }
    }

    ThreatClass::Activity1
}

fn behavior5_pattern(actions: &[&&LabeledRecord], params: &AnalyzerParams) -> bool {
    // Group actions per device, in time order.
    let mut per_device: BTreeMap<&str, Vec<&&LabeledRecord>> = BTreeMap::new();
    for l in actions {
        if let Some(d) = &l.record.device_id {
            per_device.entry(d.as_str()).or_default().push(l);
        }
    }
    for (pattern_device, cmds) in &per_device {
        if cmds.len() < params.toggle_count {
            continue;
        }
        // Count alternations inside the pattern window.
        for i in 0..cmds.len() {
            let t0 = cmds[i].record.ts;
            let mut toggles = 0usize;
            let mut last_value: Option<String> = None;
            let mut last_ts = t0;
            for c in &cmds[i..] {
                if c.record.ts.saturating_sub(t0) > params.toggle_window_ms {
                    break;
                }
                let v = c.record.value.as_text();
                if let Some(prev) = &last_value {
                    if *prev != v {
                        toggles += 1;
                    }
                }
                last_value = Some(v);
                last_ts = c.record.ts;
            }
            if toggles + 1 >= params.toggle_count {
                // A disable on another device immediately after the pattern.
                let disabled = actions.iter().any(|l| {
                    l.record.device_id.as_deref() != Some(pattern_device)
                        && matches!(l.record.value.as_text().as_str(), "off" | "stop")
                        && l.record.ts >= last_ts
                        && l.record.ts.saturating_sub(last_ts) <= params.toggle_window_ms
                });
                if disabled {
                    return true;
                }
            }
        }
    }
    false
}

fn has_reporting_contradiction(evidence: &[&LabeledRecord]) -> bool {
    use crate::instrument::Category;
    // (device, attribute, slot) -> set of (app, value)
    let mut groups: BTreeMap<(String, String, u64), Vec<(String, String)>> = BTreeMap::new();
    for l in evidence {
        if l.record.kind != Category::Event {
            continue;
        }
        let (Some(device), Some(attribute)) = (&l.record.device_id, &l.record.attribute) else {
            continue;
        };
        groups
            .entry((device.clone(), attribute.clone(), l.slot))
            .or_default()
            .push((l.record.app_id.clone(), l.record.value.as_text()));
    }
    for reports in groups.values() {
        let values: BTreeSet<&str> = reports.iter().map(|(_, v)| v.as_str()).collect();
        let apps: BTreeSet<&str> = reports.iter().map(|(a, _)| a.as_str()).collect();
        if values.len() > 1 && apps.len() > 1 {
            return true;
        }
    }
    false
}

/// Benign training data and device layout for cooperation analysis. Models
/// are projected per device (and per exclusion set) on demand.
#[derive(Debug, Clone)]
pub struct TamperFamily {
    sequences: Vec<Vec<u64>>,
    pub device_masks: BTreeMap<String, (u64, Vec<usize>)>,
    pub device_count: usize,
    /// Mean feature transitions per slot in benign training, per device.
    pub expected_rate: BTreeMap<String, f64>,
    epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct DeviceModelSlot {
    /// Bits of this device's features, zeroed in the projected space along
    /// with every excluded feature.
    pub mask: u64,
    pub feature_bits: Vec<usize>,
    pub projected: TransitionModel,
    /// Projected state -> (ones, total) per feature of this device.
    pub context: Vec<HashMap<u64, (u64, u64)>>,
}

/// Record the benign sequences and device layout. Devices whose features are
/// all exogenous have no companion context to judge them by and are left out.
pub fn train_tamper_family(
    sequences: &[Vec<u64>],
    schema: &FeatureSchema,
    epsilon: f64,
) -> Result<TamperFamily, crate::markov::TrainError> {
    if sequences.iter().all(|s| s.len() < 2) {
        return Err(crate::markov::TrainError::InsufficientData);
    }
    let mut device_features = schema.device_features();
    device_features.retain(|_, bits| bits.iter().any(|b| !schema.features[*b].exogenous));
    let device_masks: BTreeMap<String, (u64, Vec<usize>)> = device_features
        .into_iter()
        .map(|(device, bits)| {
            let mask = bits.iter().fold(0u64, |m, b| m | (1 << b));
            (device, (mask, bits))
        })
        .collect();
    let device_count = device_masks.len();
    let total_slots: u64 = sequences.iter().map(|s| s.len() as u64).sum();
    let expected_rate = device_masks
        .iter()
        .map(|(device, (mask, _))| {
            let mut transitions = 0u64;
            for seq in sequences {
                for pair in seq.windows(2) {
                    if (pair[0] ^ pair[1]) & mask != 0 {
                        transitions += 1;
                    }
                }
            }
            (device.clone(), transitions as f64 / total_slots.max(1) as f64)
        })
        .collect();
    Ok(TamperFamily { sequences: sequences.to_vec(), device_masks, device_count, expected_rate, epsilon })
}

impl TamperFamily {
    /// Leave-one-out slot for one device, with extra features excluded.
    fn slot_for(&self, device: &str, excluded: u64) -> Option<DeviceModelSlot> {
        let (own_mask, bits) = self.device_masks.get(device)?;
        let mask = own_mask | excluded;
        let projected_seqs: Vec<Vec<u64>> =
            self.sequences.iter().map(|seq| seq.iter().map(|s| s & !mask).collect()).collect();
        let projected = crate::markov::train(&projected_seqs, self.epsilon).ok()?;
        let mut context: Vec<HashMap<u64, (u64, u64)>> = vec![HashMap::new(); bits.len()];
        for seq in &self.sequences {
            for s in seq {
                let p = s & !mask;
                for (k, bit) in bits.iter().enumerate() {
                    let entry = context[k].entry(p).or_insert((0, 0));
                    entry.0 += (s >> bit) & 1;
                    entry.1 += 1;
                }
            }
        }
        Some(DeviceModelSlot { mask, feature_bits: bits.clone(), projected, context })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TamperReport {
    pub flagged: BTreeSet<String>,
    /// Worst sliding-window contradiction fraction per device.
    pub ratios: BTreeMap<String, f64>,
    /// Majority limit: past half the devices flagged, the system as a whole
    /// cannot be trusted.
    pub untrusted: bool,
}

/// A device must average this many feature transitions per slot in training
/// before silence means anything (one change per day at 10 s slots).
const MIN_EXPECTED_RATE: f64 = 1.0 / 8640.0;
/// Observed activity below this fraction of the expected rate reads as the
/// device having gone silent or stuck. Clean devices track their training
/// rate closely; a device frozen partway into a run keeps only the share of
/// activity it produced before the freeze.
const CESSATION_FRACTION: f64 = 0.5;

/// Flag tampered devices.
///
/// Two signatures cover the threat's two shapes. A device that stops
/// reporting shows as activity cessation: its features stop transitioning
/// while training says they should, which no amount of context pollution can
/// mask. The remaining devices are judged by device cooperation: with the
/// silent devices' stale bits excluded from every context, a device whose
/// observed bits contradict the context-implied bits for more than `rho` of
/// some `window`-slot stretch is flagged.
pub fn detect_tampered(
    family: &TamperFamily,
    states: &[StateVector],
    params: &AnalyzerParams,
) -> TamperReport {
    let mut flagged = BTreeSet::new();
    let mut ratios: BTreeMap<String, f64> = BTreeMap::new();

    let observed_transitions = |mask: u64| -> u64 {
        states.windows(2).filter(|w| (w[0].bits ^ w[1].bits) & mask != 0).count() as u64
    };

    // Phase one: activity cessation.
    let mut suspect_mask: u64 = 0;
    for (device, (mask, _)) in &family.device_masks {
        let expected = family.expected_rate.get(device).copied().unwrap_or(0.0);
        if expected < MIN_EXPECTED_RATE || states.len() < 2 {
            continue;
        }
        let observed = observed_transitions(*mask) as f64;
        let expected_here = expected * (states.len() - 1) as f64;
        if observed < CESSATION_FRACTION * expected_here {
            flagged.insert(device.clone());
            ratios.insert(device.clone(), 1.0);
            suspect_mask |= mask;
        }
    }

    // Phase two: cooperation against suspect-masked contexts.
    for device in family.device_masks.keys() {
        if flagged.contains(device) {
            continue;
        }
        let Some(slot) = family.slot_for(device, suspect_mask) else { continue };
        let (ratio, _) = device_contradiction_ratio(&slot, states, params);
        ratios.insert(device.clone(), ratio);
        if ratio > params.tamper_rho {
            flagged.insert(device.clone());
        }
    }

    let untrusted = flagged.len() * 2 > family.device_count;
    TamperReport { flagged, ratios, untrusted }
}

/// Majority must be this lopsided before a context casts a vote.
const CONTEXT_CONFIDENCE: f64 = 0.95;
/// Minimum training observations for a context to vote at all.
const CONTEXT_MIN_SAMPLES: u64 = 20;

fn implied_bit(slot: &DeviceModelSlot, k: usize, context: u64) -> Option<u64> {
    let (ones, total) = slot.context[k].get(&context)?;
    if *total < CONTEXT_MIN_SAMPLES {
        return None;
    }
    let fraction = *ones as f64 / *total as f64;
    if fraction >= CONTEXT_CONFIDENCE {
        Some(1)
    } else if fraction <= 1.0 - CONTEXT_CONFIDENCE {
        Some(0)
    } else {
        None
    }
}

/// Slots where the device's observed bit contradicted the implied bit.
/// Diagnostic companion to `detect_tampered`.
#[doc(hidden)]
pub fn contradiction_slots(family: &TamperFamily, device: &str, states: &[StateVector], params: &AnalyzerParams) -> Vec<u64> {
    let Some(slot) = family.slot_for(device, 0) else { return Vec::new() };
    let (_, contradictions) = contradiction_series(&slot, states, params);
    contradictions
        .iter()
        .enumerate()
        .filter(|(_, c)| **c == 1)
        .map(|(t, _)| states[t].slot)
        .collect()
}

/// (worst sliding-window fraction, total contradiction count).
fn device_contradiction_ratio(slot: &DeviceModelSlot, states: &[StateVector], params: &AnalyzerParams) -> (f64, u64) {
    let (votes, contradictions) = contradiction_series(slot, states, params);
    let _ = votes;
    // Worst contradiction fraction over sliding windows. The denominator is
    // the whole window: slots without a confident vote count as agreement.
    let w = params.tamper_window.max(1).min(contradictions.len().max(1));
    let mut contra_prefix = vec![0u32; contradictions.len() + 1];
    for (i, c) in contradictions.iter().enumerate() {
        contra_prefix[i + 1] = contra_prefix[i] + *c as u32;
    }
    let mut worst = 0.0f64;
    if contradictions.len() >= w {
        for start in 0..=contradictions.len() - w {
            let contra = contra_prefix[start + w] - contra_prefix[start];
            worst = worst.max(contra as f64 / w as f64);
        }
    }
    (worst, contra_prefix[contradictions.len()] as u64)
}

fn contradiction_series(slot: &DeviceModelSlot, states: &[StateVector], params: &AnalyzerParams) -> (Vec<u8>, Vec<u8>) {
    let _ = params;
    if states.len() < 3 {
        return (Vec::new(), Vec::new());
    }
    let support: Vec<u64> = slot.projected.support.iter().copied().collect();
    let mut nearest_cache: HashMap<u64, u64> = HashMap::new();
    let mut predict_cache: HashMap<u64, u64> = HashMap::new();

    let anchored = |t: usize, nearest_cache: &mut HashMap<u64, u64>| -> u64 {
        let p = states[t].bits & !slot.mask;
        if slot.projected.row_totals.contains_key(&p) {
            p
        } else {
            *nearest_cache.entry(p).or_insert_with(|| nearest_state(&support, p))
        }
    };

    // A transition votes only in steady conditions: the current context and
    // the predicted next context must imply the same confident bit, the
    // implication must agree with the previous slot's, and the observed bit
    // must not be mid change. Prediction lag and regime boundaries then
    // abstain; a frozen device on a stable stretch keeps contradicting.
    let mut votes: Vec<u8> = vec![0; states.len() - 1];
    let mut contradictions: Vec<u8> = vec![0; states.len() - 1];
    for t in 1..states.len() - 1 {
        let anchor_prev = anchored(t - 1, &mut nearest_cache);
        let anchor = anchored(t, &mut nearest_cache);
        let predicted = *predict_cache
            .entry(anchor)
            .or_insert_with(|| slot.projected.predict_next(anchor));
        let mut voted = 0u8;
        let mut contradiction = 0u8;
        for (k, bit) in slot.feature_bits.iter().enumerate() {
            let Some(implied) = implied_bit(slot, k, predicted) else { continue };
            if implied_bit(slot, k, anchor) != Some(implied) {
                continue;
            }
            if implied_bit(slot, k, anchor_prev) != Some(implied) {
                continue;
            }
            let observed = (states[t + 1].bits >> bit) & 1;
            if (states[t].bits >> bit) & 1 != observed {
                continue;
            }
            voted = 1;
            if observed != implied {
                contradiction = 1;
                break;
            }
        }
        votes[t] = voted;
        contradictions[t] = contradiction;
    }
    (votes, contradictions)
}

fn nearest_state(support: &[u64], state: u64) -> u64 {
    let mut best = support.first().copied().unwrap_or(0);
    let mut best_distance = u32::MAX;
    for &s in support {
        let d = (s ^ state).count_ones();
        if d < best_distance {
            best_distance = d;
            best = s;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy() -> SecurityPolicy {
        office_policy(
            (1..=10).map(|i| format!("ctrl-{:02}", i)),
            ["app-a".to_string(), "app-b".to_string()],
        )
    }

    #[test]
    fn office_hours_are_allowed_weekdays_only() {
        let p = policy();
        // Monday 08:00 is allowed, Monday 20:45 is not.
        assert!(p.is_allowed_time(8 * 3_600_000));
        assert!(!p.is_allowed_time(20 * 3_600_000 + 45 * 60_000));
        // Saturday noon (day 5) is not allowed.
        assert!(!p.is_allowed_time(5 * DAY_MS + 12 * 3_600_000));
    }

    #[test]
    fn disallowed_intersection() {
        let p = policy();
        // 19:30-20:30 Monday crosses the boundary.
        assert!(p.intersects_disallowed(19 * 3_600_000 + 30 * 60_000, 20 * 3_600_000 + 30 * 60_000));
        assert!(!p.intersects_disallowed(9 * 3_600_000, 10 * 3_600_000));
    }

    #[test]
    fn tamper_report_on_frozen_feature() {
        // Four single-feature devices whose bits cycle together in training.
        // Freezing one contradicts the context implied by the other three.
        let feature = |device: &str| crate::schema::FeatureSpec {
            id: format!("{device}.state"),
            source: crate::schema::FeatureSource::Sensor,
            device: Some(device.to_string()),
            attribute: Some("state".into()),
            controller: None,
            numeric: false,
            threshold: None,
            exogenous: false,
        };
        let schema = FeatureSchema {
            features: vec![feature("m"), feature("l"), feature("x"), feature("y")],
        };
        let mut train_seq = Vec::new();
        for _ in 0..20 {
            train_seq.extend(std::iter::repeat_n(0b0000u64, 50));
            train_seq.extend(std::iter::repeat_n(0b1111u64, 50));
        }
        let family = train_tamper_family(&[train_seq.clone()], &schema, 1e-3).unwrap();

        let params = AnalyzerParams::default();
        let make_states = |bits: &[u64]| -> Vec<StateVector> {
            bits.iter()
                .enumerate()
                .map(|(i, b)| StateVector {
                    bits: *b,
                    slot: i as u64,
                    ts_range: (i as u64 * 10_000, (i as u64 + 1) * 10_000),
                })
                .collect()
        };

        // Clean test data: no device flagged, system trusted.
        let clean = detect_tampered(&family, &make_states(&train_seq), &params);
        assert!(clean.flagged.is_empty(), "clean run flagged {:?}", clean.flagged);
        assert!(!clean.untrusted);

        // Device m (bit 0) frozen at 0 while the rest keep cycling.
        let mut frozen = Vec::new();
        for _ in 0..20 {
            frozen.extend(std::iter::repeat_n(0b0000u64, 50));
            frozen.extend(std::iter::repeat_n(0b1110u64, 50));
        }
        let report = detect_tampered(&family, &make_states(&frozen), &params);
        assert!(report.flagged.contains("m"), "ratios {:?}", report.ratios);
        assert!(!report.flagged.contains("l"), "ratios {:?}", report.ratios);
        assert!(!report.untrusted, "1 of 4 devices flagged is not a majority");
    }
}
