//! The forensic log store: record model, batching transport policy, and an
//! append-only newline-delimited file store with a rebuilt-on-open index.
//!
//! On disk each record is one JSON object per line with a fixed field order
//! (ts, app_id, seq, kind, device_id, attribute, value, location_mode,
//! controller_id, batch_id). A sidecar `index.json` summarizes the store and
//! is rebuilt from the record file on open, so the record file alone is the
//! source of truth after a crash.

use crate::instrument::Category;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const RECORDS_FILE: &str = "records.ndjson";
pub const INDEX_FILE: &str = "index.json";

/// Default batch size N.
pub const DEFAULT_BATCH_SIZE: usize = 10;
/// Default maximum queue age T in simulated milliseconds.
pub const DEFAULT_BATCH_AGE_MS: u64 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LocationMode {
    Office,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogValue {
    Number(f64),
    Text(String),
}

impl LogValue {
    pub fn as_text(&self) -> String {
        match self {
            LogValue::Text(s) => s.clone(),
            LogValue::Number(n) => {
                if n.fract() == 0.0 && n.abs() < 9e15 {
                    format!("{}", *n as i64)
                } else {
                    format!("{}", n)
                }
            }
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            LogValue::Number(n) => Some(*n),
            LogValue::Text(s) => s.parse().ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub ts: u64,
    pub app_id: String,
    pub seq: u64,
    pub kind: Category,
    pub device_id: Option<String>,
    pub attribute: Option<String>,
    pub value: LogValue,
    pub location_mode: LocationMode,
    pub controller_id: Option<String>,
    pub batch_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlushReason {
    Size,
    Interval,
    Shutdown,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Batch {
    pub batch_id: String,
    pub records: Vec<LogRecord>,
    pub flush_reason: FlushReason,
}

/// Document shape accepted by the ingestion endpoint and file-mode ingest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchDocument {
    pub batch_id: String,
    pub records: Vec<LogRecord>,
}

/// Per-app transport queue implementing the batching policy: flush when the
/// queue holds `max_batch` records or the oldest entry is `max_age_ms` old.
#[derive(Debug, Clone)]
pub struct BatchQueue {
    pub app_id: String,
    pub max_batch: usize,
    pub max_age_ms: u64,
    pending: VecDeque<(u64, LogRecord)>,
    next_batch: u64,
}

impl BatchQueue {
    pub fn new(app_id: impl Into<String>) -> Self {
        BatchQueue {
            app_id: app_id.into(),
            max_batch: DEFAULT_BATCH_SIZE,
            max_age_ms: DEFAULT_BATCH_AGE_MS,
            pending: VecDeque::new(),
            next_batch: 0,
        }
    }

    pub fn with_policy(app_id: impl Into<String>, max_batch: usize, max_age_ms: u64) -> Self {
        let mut q = BatchQueue::new(app_id);
        q.max_batch = max_batch.max(1);
        q.max_age_ms = max_age_ms;
        q
    }

    pub fn enqueue(&mut self, record: LogRecord, now: u64) {
        self.pending.push_back((now, record));
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    fn drain(&mut self, reason: FlushReason) -> Batch {
        let take = self.pending.len().min(self.max_batch);
        let batch_id = format!("{}-b{:06}", self.app_id, self.next_batch);
        self.next_batch += 1;
        let mut records = Vec::with_capacity(take);
        for _ in 0..take {
            let (_, mut rec) = self.pending.pop_front().expect("drain within len");
            rec.batch_id = batch_id.clone();
            records.push(rec);
        }
        Batch { batch_id, records, flush_reason: reason }
    }

    /// Flush everything on shutdown regardless of policy.
    pub fn flush_all(&mut self) -> Vec<Batch> {
        let mut out = Vec::new();
        while !self.pending.is_empty() {
            out.push(self.drain(FlushReason::Shutdown));
        }
        out
    }
}

/// Emit a batch iff the queue length reached N or the oldest enqueued record
/// is at least T old. Call repeatedly to drain a long queue.
pub fn flush_policy(queue: &mut BatchQueue, now: u64) -> Option<Batch> {
    if queue.pending.len() >= queue.max_batch {
        return Some(queue.drain(FlushReason::Size));
    }
    if let Some((enqueued, _)) = queue.pending.front() {
        if now.saturating_sub(*enqueued) >= queue.max_age_ms {
            return Some(queue.drain(FlushReason::Interval));
        }
    }
    None
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("duplicate sequence {seq} for app {app_id:?}")]
    DuplicateSeq { app_id: String, seq: u64 },
    #[error("store write failed: {0}")]
    StoreFull(#[from] std::io::Error),
    #[error("batch {batch_id:?} replayed with different content")]
    BatchConflict { batch_id: String },
    #[error("corrupt record at {file}:{line}: {message}")]
    Corrupt { file: String, line: usize, message: String },
}

/// Query filter; unset fields match everything.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct QueryFilter {
    pub from: Option<u64>,
    pub to: Option<u64>,
    pub kinds: Option<BTreeSet<Category>>,
    pub devices: Option<BTreeSet<String>>,
    pub apps: Option<BTreeSet<String>>,
    pub location_mode: Option<LocationMode>,
}

impl QueryFilter {
    pub fn matches(&self, r: &LogRecord) -> bool {
        if let Some(from) = self.from {
            if r.ts < from {
                return false;
            }
        }
        if let Some(to) = self.to {
            if r.ts > to {
                return false;
            }
        }
        if let Some(kinds) = &self.kinds {
            if !kinds.contains(&r.kind) {
                return false;
            }
        }
        if let Some(devices) = &self.devices {
            match &r.device_id {
                Some(d) if devices.contains(d) => {}
                _ => return false,
            }
        }
        if let Some(apps) = &self.apps {
            if !apps.contains(&r.app_id) {
                return false;
            }
        }
        if let Some(mode) = self.location_mode {
            if r.location_mode != mode {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SidecarIndex {
    record_count: usize,
    apps: BTreeMap<String, u64>,
    batch_count: usize,
}

/// Append-only file-backed store; one writer, snapshot queries.
pub struct Store {
    dir: PathBuf,
    writer: BufWriter<File>,
    records: Vec<LogRecord>,
    seqs: HashMap<String, HashSet<u64>>,
    batch_hashes: HashMap<String, u64>,
}

impl Store {
    /// Open a store directory, rebuilding the index by scanning the record
    /// file.
    pub fn open(dir: &Path) -> Result<Store, StoreError> {
        std::fs::create_dir_all(dir)?;
        let records_path = dir.join(RECORDS_FILE);
        let mut records = Vec::new();
        let mut seqs: HashMap<String, HashSet<u64>> = HashMap::new();
        let mut batch_records: HashMap<String, Vec<LogRecord>> = HashMap::new();
        if records_path.exists() {
            let reader = BufReader::new(File::open(&records_path)?);
            for (lineno, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: LogRecord =
                    serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                        file: records_path.display().to_string(),
                        line: lineno + 1,
                        message: e.to_string(),
                    })?;
                seqs.entry(record.app_id.clone()).or_default().insert(record.seq);
                batch_records.entry(record.batch_id.clone()).or_default().push(record.clone());
                records.push(record);
            }
        }
        let batch_hashes =
            batch_records.into_iter().map(|(id, recs)| (id, hash_records(&recs))).collect();
        let writer =
            BufWriter::new(OpenOptions::new().create(true).append(true).open(&records_path)?);
        let mut store = Store { dir: dir.to_path_buf(), writer, records, seqs, batch_hashes };
        store.write_sidecar()?;
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Append one record. Duplicate (app, seq) pairs are rejected.
    pub fn append(&mut self, record: LogRecord) -> Result<(), StoreError> {
        let seen = self.seqs.entry(record.app_id.clone()).or_default();
        if !seen.insert(record.seq) {
            return Err(StoreError::DuplicateSeq { app_id: record.app_id.clone(), seq: record.seq });
        }
        let line = serde_json::to_string(&record).expect("record serializes");
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.records.push(record);
        Ok(())
    }

    /// Ingest a batch document idempotently: replaying the same batch id with
    /// the same content is a no-op, different content is a conflict.
    pub fn ingest_batch(&mut self, doc: &BatchDocument) -> Result<usize, StoreError> {
        let mut stamped: Vec<LogRecord> = doc.records.clone();
        for r in &mut stamped {
            r.batch_id = doc.batch_id.clone();
        }
        let hash = hash_records(&stamped);
        if let Some(existing) = self.batch_hashes.get(&doc.batch_id) {
            if *existing == hash {
                return Ok(0);
            }
            return Err(StoreError::BatchConflict { batch_id: doc.batch_id.clone() });
        }
        for record in &stamped {
            self.append(record.clone())?;
        }
        self.batch_hashes.insert(doc.batch_id.clone(), hash);
        self.flush()?;
        Ok(stamped.len())
    }

    /// Force buffered records to disk and refresh the sidecar index.
    pub fn flush(&mut self) -> Result<(), StoreError> {
        self.writer.flush()?;
        self.writer.get_ref().sync_all()?;
        self.write_sidecar()?;
        Ok(())
    }

    fn write_sidecar(&mut self) -> Result<(), StoreError> {
        let apps: BTreeMap<String, u64> = self
            .seqs
            .iter()
            .map(|(app, seqs)| (app.clone(), seqs.iter().copied().max().unwrap_or(0)))
            .collect();
        let index = SidecarIndex {
            record_count: self.records.len(),
            apps,
            batch_count: self.batch_hashes.len(),
        };
        let text = serde_json::to_string_pretty(&index).expect("index serializes");
        std::fs::write(self.dir.join(INDEX_FILE), text)?;
        Ok(())
    }

    /// All matching records sorted by (ts, app, seq).
    pub fn query(&self, filter: &QueryFilter) -> Vec<LogRecord> {
        let mut out: Vec<LogRecord> =
            self.records.iter().filter(|r| filter.matches(r)).cloned().collect();
        out.sort_by(|a, b| (a.ts, &a.app_id, a.seq).cmp(&(b.ts, &b.app_id, b.seq)));
        out
    }
}

fn hash_records(records: &[LogRecord]) -> u64 {
    // FNV-1a over the serialized records; stability matters, speed does not.
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for record in records {
        let line = serde_json::to_string(record).expect("record serializes");
        for byte in line.as_bytes() {
            hash ^= *byte as u64;
            hash = hash.wrapping_mul(0x1000_0000_01b3);
        }
        hash ^= 0x0a;
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(app: &str, seq: u64, ts: u64) -> LogRecord {
        LogRecord {
            ts,
            app_id: app.to_string(),
            seq,
            kind: Category::Event,
            device_id: Some("motion-lobby".into()),
            attribute: Some("motion".into()),
            value: LogValue::Text("active".into()),
            location_mode: LocationMode::Office,
            controller_id: None,
            batch_id: String::new(),
        }
    }

    #[test]
    fn size_flush_after_n_enqueues() {
        let mut q = BatchQueue::new("app");
        for i in 0..10 {
            q.enqueue(record("app", i, i), i);
            if i < 9 {
                assert!(flush_policy(&mut q, i).is_none());
            }
        }
        let batch = flush_policy(&mut q, 9).expect("size flush");
        assert_eq!(batch.records.len(), 10);
        assert_eq!(batch.flush_reason, FlushReason::Size);
        assert!(q.is_empty());
    }

    #[test]
    fn interval_flush_after_age() {
        let mut q = BatchQueue::new("app");
        q.enqueue(record("app", 0, 0), 0);
        assert!(flush_policy(&mut q, 499).is_none());
        let batch = flush_policy(&mut q, 500).expect("interval flush");
        assert_eq!(batch.records.len(), 1);
        assert_eq!(batch.flush_reason, FlushReason::Interval);
    }

    #[test]
    fn batch_ids_are_unique_and_stamped() {
        let mut q = BatchQueue::new("app");
        for i in 0..20 {
            q.enqueue(record("app", i, 0), 0);
        }
        let a = flush_policy(&mut q, 0).unwrap();
        let b = flush_policy(&mut q, 0).unwrap();
        assert_ne!(a.batch_id, b.batch_id);
        assert!(a.records.iter().all(|r| r.batch_id == a.batch_id));
    }

    // Step-through oracle: replay the documented policy with explicit
    // counters and compare flush totals.
    #[test]
    fn flush_count_matches_step_oracle() {
        let arrivals: Vec<u64> = (0..137u64)
            .map(|i| i * 37 % 2000)
            .scan(0u64, |acc, d| {
                *acc += d / 10;
                Some(*acc)
            })
            .collect();

        let mut q = BatchQueue::new("app");
        let mut flushes = 0usize;
        for (i, t) in arrivals.iter().enumerate() {
            while flush_policy(&mut q, *t).is_some() {
                flushes += 1;
            }
            q.enqueue(record("app", i as u64, *t), *t);
            while flush_policy(&mut q, *t).is_some() {
                flushes += 1;
            }
        }
        flushes += q.flush_all().len();

        let mut oracle_flushes = 0usize;
        let mut queue: Vec<u64> = Vec::new();
        for t in &arrivals {
            while !queue.is_empty() && t.saturating_sub(queue[0]) >= DEFAULT_BATCH_AGE_MS {
                let take = queue.len().min(DEFAULT_BATCH_SIZE);
                queue.drain(..take);
                oracle_flushes += 1;
            }
            queue.push(*t);
            while queue.len() >= DEFAULT_BATCH_SIZE {
                queue.drain(..DEFAULT_BATCH_SIZE);
                oracle_flushes += 1;
            }
        }
        while !queue.is_empty() {
            let take = queue.len().min(DEFAULT_BATCH_SIZE);
            queue.drain(..take);
            oracle_flushes += 1;
        }
        assert_eq!(flushes, oracle_flushes);
        assert!(flushes >= arrivals.len().div_ceil(DEFAULT_BATCH_SIZE));
    }

    #[test]
    fn append_preserves_order_and_rejects_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        store.append(record("a", 1, 5)).unwrap();
        store.append(record("a", 2, 6)).unwrap();
        let err = store.append(record("a", 1, 7)).unwrap_err();
        assert!(matches!(err, StoreError::DuplicateSeq { seq: 1, .. }));
        let all = store.query(&QueryFilter::default());
        assert_eq!(all.iter().map(|r| r.seq).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn query_filters_match_linear_scan_oracle() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        let mut all = Vec::new();
        for i in 0..1000u64 {
            let mut r = record(if i % 3 == 0 { "a" } else { "b" }, i, (i * 7919) % 5000);
            r.kind = match i % 4 {
                0 => Category::Event,
                1 => Category::Action,
                2 => Category::SinkMessage,
                _ => Category::UserInput,
            };
            r.device_id = Some(format!("dev-{}", i % 5));
            r.location_mode = if i % 2 == 0 { LocationMode::Office } else { LocationMode::Other };
            all.push(r.clone());
            store.append(r).unwrap();
        }
        let filters = vec![
            QueryFilter::default(),
            QueryFilter { from: Some(1000), to: Some(3000), ..Default::default() },
            QueryFilter { kinds: Some([Category::Action].into_iter().collect()), ..Default::default() },
            QueryFilter {
                devices: Some(["dev-1".to_string(), "dev-3".to_string()].into_iter().collect()),
                location_mode: Some(LocationMode::Office),
                ..Default::default()
            },
            QueryFilter {
                apps: Some(["a".to_string()].into_iter().collect()),
                from: Some(500),
                ..Default::default()
            },
        ];
        for filter in filters {
            let got = store.query(&filter);
            let mut want: Vec<LogRecord> =
                all.iter().filter(|r| filter.matches(r)).cloned().collect();
            want.sort_by(|a, b| (a.ts, &a.app_id, a.seq).cmp(&(b.ts, &b.app_id, b.seq)));
            assert_eq!(got, want);
        }
    }

    #[test]
    fn records_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut store = Store::open(dir.path()).unwrap();
            for i in 0..50 {
                store.append(record("a", i, i)).unwrap();
            }
            store.flush().unwrap();
        }
        let store = Store::open(dir.path()).unwrap();
        assert_eq!(store.len(), 50);
        assert!(dir.path().join(INDEX_FILE).exists());
    }

    #[test]
    fn batch_replay_is_idempotent_and_conflicts_are_detected() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        let doc = BatchDocument {
            batch_id: "app-b000001".into(),
            records: (0..3).map(|i| record("app", i, i)).collect(),
        };
        assert_eq!(store.ingest_batch(&doc).unwrap(), 3);
        assert_eq!(store.ingest_batch(&doc).unwrap(), 0);
        assert_eq!(store.len(), 3);
        let altered = BatchDocument {
            batch_id: "app-b000001".into(),
            records: (0..3).map(|i| record("app", i + 100, i)).collect(),
        };
        assert!(matches!(store.ingest_batch(&altered), Err(StoreError::BatchConflict { .. })));
    }

    #[test]
    fn counting_oracle_10k() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        for app in ["a", "b"] {
            for i in 0..5000u64 {
                store.append(record(app, i, i)).unwrap();
            }
        }
        store.flush().unwrap();
        let all = store.query(&QueryFilter::default());
        assert_eq!(all.len(), 10_000);
        for app in ["a", "b"] {
            let seqs: Vec<u64> = all.iter().filter(|r| r.app_id == app).map(|r| r.seq).collect();
            let mut expected = seqs.clone();
            expected.sort();
            assert_eq!(seqs, expected, "per-app order preserved");
        }
    }
}
