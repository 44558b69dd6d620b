use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::model::{AuditEntry, EvalRecord, EvalSeed, KeyTerm, VerdictPatch};
use super::EvalError;
use crate::pipeline::{Outcome, Rating};

pub const DEFAULT_SEGMENT_LINES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
enum Event {
    Ingest {
        record: Box<EvalRecord>,
    },
    Annotate {
        record_id: String,
        entry: AuditEntry,
    },
    Feedback {
        record_id: String,
        rating: Rating,
        at: DateTime<Utc>,
    },
}

/// Evaluation records kept as an append-only event log in JSONL segment
/// files, replayed into memory on open.
///
/// Mutating methods take `&mut self`; share the store behind a lock.
#[derive(Debug, Default)]
pub struct EvalStore {
    dir: Option<PathBuf>,
    records: BTreeMap<String, EvalRecord>,
    segment: usize,
    segment_lines: usize,
    segment_max: usize,
}

fn segment_name(n: usize) -> String {
    format!("segment-{n:05}.jsonl")
}

impl EvalStore {
    pub fn in_memory() -> Self {
        EvalStore {
            segment_max: DEFAULT_SEGMENT_LINES,
            ..EvalStore::default()
        }
    }

    /// Open (creating if needed) a store directory and replay its segments.
    pub fn open(dir: &Path) -> Result<Self, EvalError> {
        Self::open_with_segment_size(dir, DEFAULT_SEGMENT_LINES)
    }

    pub fn open_with_segment_size(dir: &Path, segment_max: usize) -> Result<Self, EvalError> {
        fs::create_dir_all(dir)?;
        let mut segments: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("segment-") && n.ends_with(".jsonl"))
            })
            .collect();
        segments.sort();
        let mut store = EvalStore {
            dir: Some(dir.to_path_buf()),
            records: BTreeMap::new(),
            segment: segments.len().max(1),
            segment_lines: 0,
            segment_max: segment_max.max(1),
        };
        for path in &segments {
            let reader = BufReader::new(File::open(path)?);
            let mut lines = 0;
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let event: Event = serde_json::from_str(&line).map_err(|e| EvalError::Corrupt {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                store.replay(event);
                lines += 1;
            }
            store.segment_lines = lines;
        }
        Ok(store)
    }

    fn replay(&mut self, event: Event) {
        match event {
            Event::Ingest { record } => {
                self.records.entry(record.record_id.clone()).or_insert(*record);
            }
            Event::Annotate { record_id, entry } => {
                if let Some(r) = self.records.get_mut(&record_id) {
                    apply_annotation(r, entry);
                }
            }
            Event::Feedback { record_id, rating, .. } => {
                if let Some(r) = self.records.get_mut(&record_id) {
                    r.feedback = Some(rating);
                }
            }
        }
    }

    fn persist(&mut self, event: &Event) -> Result<(), EvalError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        if self.segment_lines >= self.segment_max {
            self.segment += 1;
            self.segment_lines = 0;
        }
        let path = dir.join(segment_name(self.segment));
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        writeln!(file, "{}", serde_json::to_string(event).expect("events serialize"))?;
        self.segment_lines += 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&EvalRecord> {
        self.records.get(id)
    }

    /// Records in (created_at, record_id) order.
    pub fn records(&self) -> Vec<&EvalRecord> {
        let mut out: Vec<&EvalRecord> = self.records.values().collect();
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.record_id.cmp(&b.record_id)));
        out
    }

    /// Store a pipeline seed with every verdict unset. Rejected and failed
    /// requests are not evaluated; a repeated id leaves the store unchanged.
    pub fn ingest(&mut self, seed: EvalSeed) -> Result<&EvalRecord, EvalError> {
        if matches!(seed.outcome, Outcome::Rejected | Outcome::Error) {
            return Err(EvalError::NotIngestible(seed.outcome));
        }
        if self.records.contains_key(&seed.record_id) {
            return Err(EvalError::DuplicateRecordId(seed.record_id));
        }
        let record = EvalRecord::from_seed(seed);
        let id = record.record_id.clone();
        self.persist(&Event::Ingest {
            record: Box::new(record.clone()),
        })?;
        self.records.insert(id.clone(), record);
        Ok(&self.records[&id])
    }

    /// Apply a verdict patch plus key terms and tags. The patch is rejected
    /// as a whole when the result would break the workflow rule.
    pub fn annotate(
        &mut self,
        record_id: &str,
        patch: VerdictPatch,
        key_terms: Vec<KeyTerm>,
        tags: Vec<String>,
        annotator: &str,
    ) -> Result<EvalRecord, EvalError> {
        let record = self
            .records
            .get(record_id)
            .ok_or_else(|| EvalError::UnknownRecord(record_id.to_string()))?;
        let mut verdicts = record.verdicts;
        patch.apply(&mut verdicts);
        if let Some(reason) = verdicts.workflow_violation() {
            return Err(EvalError::WorkflowViolation(reason));
        }
        for kt in &key_terms {
            let ok = kt.start < kt.end
                && record.question.get(kt.start..kt.end).is_some_and(|s| s.eq_ignore_ascii_case(&kt.term));
            if !ok {
                return Err(EvalError::BadKeyTerm {
                    term: kt.term.clone(),
                    start: kt.start,
                    end: kt.end,
                });
            }
        }
        let entry = AuditEntry {
            annotator: annotator.to_string(),
            at: Utc::now(),
            patch,
            key_terms,
            tags,
        };
        self.persist(&Event::Annotate {
            record_id: record_id.to_string(),
            entry: entry.clone(),
        })?;
        let record = self.records.get_mut(record_id).expect("checked above");
        apply_annotation(record, entry);
        Ok(record.clone())
    }

    /// Attach a user rating; the latest rating wins.
    pub fn record_feedback(&mut self, record_id: &str, rating: Rating, at: DateTime<Utc>) -> Result<(), EvalError> {
        if !self.records.contains_key(record_id) {
            return Err(EvalError::UnknownRecord(record_id.to_string()));
        }
        self.persist(&Event::Feedback {
            record_id: record_id.to_string(),
            rating,
            at,
        })?;
        self.records.get_mut(record_id).expect("checked above").feedback = Some(rating);
        Ok(())
    }
}

fn apply_annotation(record: &mut EvalRecord, entry: AuditEntry) {
    entry.patch.apply(&mut record.verdicts);
    for kt in &entry.key_terms {
        if !record.key_terms.contains(kt) {
            record.key_terms.push(kt.clone());
        }
    }
    for t in &entry.tags {
        if !record.tags.contains(t) {
            record.tags.push(t.clone());
        }
    }
    record.audit.push(entry);
}
