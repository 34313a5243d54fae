//! Confusion-derived metrics over evaluation windows and the train/test
//! split.
//!
//! Each ground-truth window gets one predicted class: the highest-scoring
//! detection overlapping it, or Benign. Per-class one-vs-rest counts then
//! yield TPR/TNR/ACC/F-score; the complementary rates are derived (FNR =
//! 1 - TPR) so the rate identities hold exactly.

use crate::detect::Detection;
use crate::scenario::{ThreatClass, TruthWindow};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub tpr: f64,
    pub fnr: f64,
    pub tnr: f64,
    pub fpr: f64,
    pub acc: f64,
    pub f_score: f64,
    pub counts: ConfusionCounts,
}

impl ClassMetrics {
    pub fn from_counts(counts: ConfusionCounts) -> ClassMetrics {
        let tpr = if counts.tp + counts.fn_ > 0 {
            counts.tp as f64 / (counts.tp + counts.fn_) as f64
        } else {
            1.0
        };
        let tnr = if counts.tn + counts.fp > 0 {
            counts.tn as f64 / (counts.tn + counts.fp) as f64
        } else {
            1.0
        };
        let total = counts.total();
        let acc = if total > 0 { (counts.tp + counts.tn) as f64 / total as f64 } else { 1.0 };
        let f_denominator = 2 * counts.tp + counts.fp + counts.fn_;
        let f_score =
            if f_denominator > 0 { 2.0 * counts.tp as f64 / f_denominator as f64 } else { 1.0 };
        ClassMetrics { tpr, fnr: 1.0 - tpr, tnr, fpr: 1.0 - tnr, acc, f_score, counts }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub windows_evaluated: u64,
}

impl MetricsReport {
    pub fn class(&self, class: ThreatClass) -> Option<&ClassMetrics> {
        self.per_class.get(class.name())
    }

    /// Fixed-width table for terminal output.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:>7} {:>7} {:>7} {:>7} {:>7} {:>8}\n",
            "Class", "TPR", "FNR", "TNR", "FPR", "ACC", "F-Score"
        ));
        for (class, m) in &self.per_class {
            out.push_str(&format!(
                "{:<12} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>8.4}\n",
                class, m.tpr, m.fnr, m.tnr, m.fpr, m.acc, m.f_score
            ));
        }
        out
    }
}

/// Predicted class per truth window: the best-scoring overlapping detection.
pub fn window_predictions(detections: &[Detection], truth: &[TruthWindow]) -> Vec<(TruthWindow, ThreatClass)> {
    truth
        .iter()
        .map(|w| {
            let best = detections
                .iter()
                .filter(|d| d.window.0 < w.end && d.window.1 > w.start)
                .max_by(|a, b| {
                    a.score
                        .partial_cmp(&b.score)
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then_with(|| b.window.0.cmp(&a.window.0))
                });
            (*w, best.map(|d| d.class).unwrap_or(ThreatClass::Benign))
        })
        .collect()
}

/// One-vs-rest confusion counts per class over the evaluation windows.
pub fn confusion_counts(detections: &[Detection], truth: &[TruthWindow]) -> BTreeMap<ThreatClass, ConfusionCounts> {
    let predictions = window_predictions(detections, truth);
    let mut classes: Vec<ThreatClass> = Vec::new();
    for (w, predicted) in &predictions {
        for c in [w.class, *predicted] {
            if c != ThreatClass::Benign && !classes.contains(&c) {
                classes.push(c);
            }
        }
    }
    let mut out = BTreeMap::new();
    for class in classes {
        let mut counts = ConfusionCounts::default();
        for (w, predicted) in &predictions {
            match (w.class == class, *predicted == class) {
                (true, true) => counts.tp += 1,
                (true, false) => counts.fn_ += 1,
                (false, true) => counts.fp += 1,
                (false, false) => counts.tn += 1,
            }
        }
        out.insert(class, counts);
    }
    out
}

/// Metrics over one detection run.
pub fn evaluate(detections: &[Detection], truth: &[TruthWindow]) -> MetricsReport {
    metrics_from_counts(&confusion_counts(detections, truth), truth.len() as u64)
}

/// Metrics from (possibly merged) per-class counts.
pub fn metrics_from_counts(
    counts: &BTreeMap<ThreatClass, ConfusionCounts>,
    windows: u64,
) -> MetricsReport {
    let per_class = counts
        .iter()
        .map(|(class, c)| (class.name().to_string(), ClassMetrics::from_counts(*c)))
        .collect();
    MetricsReport { per_class, windows_evaluated: windows }
}

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("train fraction must be strictly between 0 and 1, got {0}")]
    BadFraction(f64),
}

/// Deterministic seeded split by run: benign runs split `fraction` to train,
/// runs with injections always go to test.
pub fn split_train_test<T>(
    runs: Vec<T>,
    fraction: f64,
    seed: u64,
    is_malicious: impl Fn(&T) -> bool,
) -> Result<(Vec<T>, Vec<T>), SplitError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SplitError::BadFraction(fraction));
    }
    let mut benign = Vec::new();
    let mut test = Vec::new();
    for run in runs {
        if is_malicious(&run) {
            test.push(run);
        } else {
            benign.push(run);
        }
    }
    let mut order: Vec<usize> = (0..benign.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let train_count = (benign.len() as f64 * fraction).floor() as usize;
    let train_set: std::collections::BTreeSet<usize> =
        order.into_iter().take(train_count).collect();
    let mut train = Vec::new();
    for (i, run) in benign.into_iter().enumerate() {
        if train_set.contains(&i) {
            train.push(run);
        } else {
            test.push(run);
        }
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(start: u64, class: ThreatClass) -> TruthWindow {
        TruthWindow { start, end: start + 100, class }
    }

    fn detection(start: u64, class: ThreatClass, score: f64) -> Detection {
        Detection {
            window: (start, start + 100),
            class,
            score,
            evidence: vec![("app".into(), 1)],
        }
    }

    #[test]
    fn perfect_detection_metrics() {
        let truth = vec![
            window(0, ThreatClass::Activity1),
            window(200, ThreatClass::Benign),
            window(400, ThreatClass::Activity1),
        ];
        let detections =
            vec![detection(0, ThreatClass::Activity1, 0.9), detection(400, ThreatClass::Activity1, 0.8)];
        let report = evaluate(&detections, &truth);
        let m = report.class(ThreatClass::Activity1).unwrap();
        assert_eq!(m.tpr, 1.0);
        assert_eq!(m.fpr, 0.0);
        assert_eq!(m.acc, 1.0);
        assert_eq!(m.f_score, 1.0);
    }

    #[test]
    fn all_benign_detector_has_zero_tpr() {
        let truth = vec![window(0, ThreatClass::Activity2), window(200, ThreatClass::Benign)];
        let report = evaluate(&[], &truth);
        let m = report.class(ThreatClass::Activity2).unwrap();
        assert_eq!(m.tpr, 0.0);
        assert_eq!(m.tnr, 1.0);
        assert_eq!(m.fnr, 1.0);
    }

    #[test]
    fn identities_hold_exactly_on_randomized_reports() {
        let classes = [
            ThreatClass::Activity1,
            ThreatClass::Activity4,
            ThreatClass::Behavior2,
            ThreatClass::Benign,
        ];
        let mut x: u64 = 99;
        let mut step = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            x >> 33
        };
        for _ in 0..200 {
            let mut truth: Vec<TruthWindow> = Vec::new();
            for i in 0..20 {
                truth.push(window(i * 1000, classes[(step() % 4) as usize]));
            }
            let mut detections: Vec<Detection> = Vec::new();
            for i in 0..20 {
                if step() % 3 == 0 {
                    continue;
                }
                let class = classes[(step() % 3) as usize];
                let score = (step() % 100) as f64 / 100.0;
                detections.push(detection(i * 1000, class, score));
            }
            let report = evaluate(&detections, &truth);
            for m in report.per_class.values() {
                assert_eq!(m.tpr + m.fnr, 1.0);
                assert_eq!(m.tnr + m.fpr, 1.0);
                let c = m.counts;
                let acc = (c.tp + c.tn) as f64 / c.total() as f64;
                assert!((m.acc - acc).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn randomized_metrics_match_counting_oracle() {
        // Independent recount of the confusion cells.
        let truth = vec![
            window(0, ThreatClass::Activity1),
            window(1000, ThreatClass::Activity2),
            window(2000, ThreatClass::Activity1),
            window(3000, ThreatClass::Benign),
            window(4000, ThreatClass::Benign),
        ];
        let detections = vec![
            detection(0, ThreatClass::Activity1, 0.9),
            detection(1000, ThreatClass::Activity1, 0.7),
            detection(4000, ThreatClass::Activity2, 0.6),
        ];
        let predictions = window_predictions(&detections, &truth);
        let counts = confusion_counts(&detections, &truth);
        for (class, c) in &counts {
            let mut oracle = ConfusionCounts::default();
            for (w, p) in &predictions {
                let truthy = w.class == *class;
                let predicted = *p == *class;
                match (truthy, predicted) {
                    (true, true) => oracle.tp += 1,
                    (true, false) => oracle.fn_ += 1,
                    (false, true) => oracle.fp += 1,
                    (false, false) => oracle.tn += 1,
                }
            }
            assert_eq!(c, &oracle);
        }
        // Activity-1: window 0 correct, window 1000 FP, window 2000 miss.
        let a1 = counts[&ThreatClass::Activity1];
        assert_eq!((a1.tp, a1.fp, a1.fn_, a1.tn), (1, 1, 1, 2));
    }

    #[test]
    fn split_respects_fraction_and_sends_malicious_to_test() {
        let runs: Vec<(usize, bool)> =
            (0..40).map(|i| (i, false)).chain((40..50).map(|i| (i, true))).collect();
        let (train, test) = split_train_test(runs.clone(), 0.75, 7, |(_, m)| *m).unwrap();
        assert_eq!(train.len(), 30);
        assert_eq!(test.len(), 20);
        assert!(train.iter().all(|(_, m)| !*m));
        // deterministic per seed
        let (train2, _) = split_train_test(runs.clone(), 0.75, 7, |(_, m)| *m).unwrap();
        assert_eq!(train, train2);
        let (train3, _) = split_train_test(runs, 0.75, 8, |(_, m)| *m).unwrap();
        assert_ne!(train, train3);
    }

    #[test]
    fn fraction_one_is_rejected() {
        let runs: Vec<u32> = (0..10).collect();
        assert_eq!(
            split_train_test(runs, 1.0, 1, |_| false).unwrap_err(),
            SplitError::BadFraction(1.0)
        );
    }
}
