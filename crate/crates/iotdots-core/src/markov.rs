//! Sparse Markov transition model over environment states.
//!
//! Counts are kept as a sparse map over observed state pairs; a dense matrix
//! over all 2^n states is infeasible for realistic feature counts. Smoothed
//! transition probabilities are (N_ij + eps) / (N_i + eps * |support|), which
//! sum to one over the observed support for every seen source state; an
//! unseen source state falls back to the uniform distribution over support.

use crate::schema::FeatureSchema;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct TransitionModel {
    pub counts: BTreeMap<(u64, u64), u64>,
    pub row_totals: BTreeMap<u64, u64>,
    pub initial_counts: BTreeMap<u64, u64>,
    /// Number of training sequences, the denominator of the initial
    /// distribution.
    pub sequences: u64,
    pub support: BTreeSet<u64>,
    pub epsilon: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("training needs at least one sequence with two states")]
    InsufficientData,
}

/// Count transitions and sequence-start states over training sequences.
pub fn train(sequences: &[Vec<u64>], epsilon: f64) -> Result<TransitionModel, TrainError> {
    let mut counts: BTreeMap<(u64, u64), u64> = BTreeMap::new();
    let mut row_totals: BTreeMap<u64, u64> = BTreeMap::new();
    let mut initial_counts: BTreeMap<u64, u64> = BTreeMap::new();
    let mut support: BTreeSet<u64> = BTreeSet::new();
    let mut seq_count = 0u64;
    let mut transitions = 0u64;
    for seq in sequences {
        let Some(first) = seq.first() else { continue };
        seq_count += 1;
        *initial_counts.entry(*first).or_default() += 1;
        support.extend(seq.iter().copied());
        for pair in seq.windows(2) {
            *counts.entry((pair[0], pair[1])).or_default() += 1;
            *row_totals.entry(pair[0]).or_default() += 1;
            transitions += 1;
        }
    }
    if transitions == 0 {
        return Err(TrainError::InsufficientData);
    }
    Ok(TransitionModel { counts, row_totals, initial_counts, sequences: seq_count, support, epsilon })
}

impl TransitionModel {
    /// Smoothed transition probability from state `i` to state `j`.
    pub fn transition_prob(&self, i: u64, j: u64) -> f64 {
        let s = self.support.len() as f64;
        if s == 0.0 {
            return 0.0;
        }
        let Some(row_total) = self.row_totals.get(&i) else {
            // Unseen source state: uniform over the support.
            return if self.support.contains(&j) { 1.0 / s } else { 0.0 };
        };
        let n_ij = self.counts.get(&(i, j)).copied().unwrap_or(0) as f64;
        (n_ij + self.epsilon) / (*row_total as f64 + self.epsilon * s)
    }

    /// Smoothed initial probability of a sequence starting in `state`.
    pub fn initial_prob(&self, state: u64) -> f64 {
        let s = self.support.len() as f64;
        if self.sequences == 0 || s == 0.0 {
            return 0.0;
        }
        let count = self.initial_counts.get(&state).copied().unwrap_or(0) as f64;
        (count + self.epsilon) / (self.sequences as f64 + self.epsilon * s)
    }

    /// Probability of observing a whole sequence, computed in log space.
    /// Exactly zero when an unsmoothed factor is zero and epsilon is zero.
    pub fn sequence_probability(&self, states: &[u64]) -> f64 {
        let Some(first) = states.first() else { return 1.0 };
        let q = self.initial_prob(*first);
        if q == 0.0 {
            return 0.0;
        }
        let mut log_p = q.ln();
        for pair in states.windows(2) {
            let p = self.transition_prob(pair[0], pair[1]);
            if p == 0.0 {
                return 0.0;
            }
            log_p += p.ln();
        }
        log_p.exp()
    }

    /// Most likely next state; ties break toward the numerically lowest.
    pub fn predict_next(&self, state: u64) -> u64 {
        let mut best: Option<(u64, f64)> = None;
        for &j in &self.support {
            let p = self.transition_prob(state, j);
            let better = match best {
                None => true,
                Some((_, bp)) => p > bp,
            };
            if better {
                best = Some((j, p));
            }
        }
        best.map(|(j, _)| j).unwrap_or(state)
    }

    /// True when the exact transition was observed in training.
    pub fn seen(&self, i: u64, j: u64) -> bool {
        self.counts.contains_key(&(i, j))
    }

    /// Smallest smoothed probability among transitions seen in training.
    pub fn min_trained_prob(&self) -> f64 {
        self.counts
            .keys()
            .map(|(i, j)| self.transition_prob(*i, *j))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Versioned on-disk model document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub version: u32,
    pub epsilon: f64,
    pub dt_ms: u64,
    pub sequences: u64,
    pub support: Vec<u64>,
    pub counts: Vec<(u64, u64, u64)>,
    pub initial: Vec<(u64, u64)>,
    pub schema: FeatureSchema,
}

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("cannot read model: {0}")]
    Io(#[from] std::io::Error),
    #[error("model does not parse: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model version {0}")]
    Version(u32),
}

pub fn to_document(model: &TransitionModel, schema: &FeatureSchema, dt_ms: u64) -> ModelDocument {
    ModelDocument {
        version: MODEL_VERSION,
        epsilon: model.epsilon,
        dt_ms,
        sequences: model.sequences,
        support: model.support.iter().copied().collect(),
        counts: model.counts.iter().map(|((i, j), n)| (*i, *j, *n)).collect(),
        initial: model.initial_counts.iter().map(|(s, n)| (*s, *n)).collect(),
        schema: schema.clone(),
    }
}

pub fn from_document(doc: &ModelDocument) -> Result<(TransitionModel, FeatureSchema, u64), ModelIoError> {
    if doc.version != MODEL_VERSION {
        return Err(ModelIoError::Version(doc.version));
    }
    let mut row_totals: BTreeMap<u64, u64> = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for (i, j, n) in &doc.counts {
        counts.insert((*i, *j), *n);
        *row_totals.entry(*i).or_default() += *n;
    }
    let model = TransitionModel {
        counts,
        row_totals,
        initial_counts: doc.initial.iter().copied().collect(),
        sequences: doc.sequences,
        support: doc.support.iter().copied().collect(),
        epsilon: doc.epsilon,
    };
    Ok((model, doc.schema.clone(), doc.dt_ms))
}

pub fn save_model(path: &Path, model: &TransitionModel, schema: &FeatureSchema, dt_ms: u64) -> Result<(), ModelIoError> {
    let doc = to_document(model, schema, dt_ms);
    std::fs::write(path, serde_json::to_string_pretty(&doc).expect("model serializes"))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(TransitionModel, FeatureSchema, u64), ModelIoError> {
    let text = std::fs::read_to_string(path)?;
    let doc: ModelDocument = serde_json::from_str(&text)?;
    from_document(&doc)
}
