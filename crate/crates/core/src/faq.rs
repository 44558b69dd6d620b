//! Hard-coded and curated answers, matched by question similarity and
//! invalidated when their grounding topics change.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ContentHash, Corpus};
use crate::evalstore::{EvalRecord, VerdictValue};
use crate::text::question_similarity;

pub const DEFAULT_FAQ_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaqKind {
    HardCoded,
    Curated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingSnapshot {
    pub topic_id: String,
    pub content_hash: ContentHash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaqEntry {
    pub id: String,
    pub canonical_question: String,
    #[serde(default)]
    pub variants: Vec<String>,
    pub kind: FaqKind,
    pub answer_text: String,
    #[serde(default)]
    pub grounding: Vec<GroundingSnapshot>,
    #[serde(default)]
    pub sensitive: bool,
    pub created_at: DateTime<Utc>,
}

impl FaqEntry {
    pub fn validate(&self) -> Result<(), FaqError> {
        let bad = |reason: &str| {
            Err(FaqError::InvalidEntry {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.id.trim().is_empty() {
            return bad("empty id");
        }
        if self.kind == FaqKind::Curated && self.grounding.is_empty() {
            return bad("curated entries need at least one grounding topic");
        }
        if self.sensitive && self.kind != FaqKind::HardCoded {
            return bad("sensitive entries must be hard-coded");
        }
        Ok(())
    }

    fn questions(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.canonical_question.as_str()).chain(self.variants.iter().map(String::as_str))
    }
}

#[derive(Debug, Error)]
pub enum FaqError {
    #[error("invalid FAQ entry {id:?}: {reason}")]
    InvalidEntry { id: String, reason: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("record {record_id} has no usable grounding topic{}", .topic_id.as_ref().map(|t| format!(" ({t} is not in the corpus)")).unwrap_or_default())]
    MissingGrounding { record_id: String, topic_id: Option<String> },
    #[error("record {0} is not evaluated as a good answer")]
    NotEvaluatedGood(String),
}

/// One line of the registry file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RegistryLine {
    Tombstone { tombstone: String, at: DateTime<Utc> },
    Entry(Box<FaqEntry>),
}

/// Append-only JSON Lines registry. Later lines win for the same id; a
/// tombstone line removes the entry.
///
/// Reads go through `&self`; mutations take `&mut self`, so callers that
/// share a registry put it behind a lock.
#[derive(Debug, Clone, Default)]
pub struct FaqRegistry {
    entries: BTreeMap<String, FaqEntry>,
    path: Option<PathBuf>,
}

impl FaqRegistry {
    /// Registry with no backing file.
    pub fn in_memory() -> Self {
        FaqRegistry::default()
    }

    /// Replay a registry file. A missing file is an empty registry that
    /// will be created on first append.
    pub fn load(path: &Path) -> Result<Self, FaqError> {
        let mut registry = FaqRegistry {
            entries: BTreeMap::new(),
            path: Some(path.to_path_buf()),
        };
        if !path.exists() {
            return Ok(registry);
        }
        let raw = std::fs::read_to_string(path)?;
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: RegistryLine = serde_json::from_str(line).map_err(|e| FaqError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
            match parsed {
                RegistryLine::Tombstone { tombstone, .. } => {
                    registry.entries.remove(&tombstone);
                }
                RegistryLine::Entry(entry) => {
                    entry.validate().map_err(|e| FaqError::Parse {
                        path: path.display().to_string(),
                        line: i + 1,
                        message: e.to_string(),
                    })?;
                    registry.entries.insert(entry.id.clone(), *entry);
                }
            }
        }
        Ok(registry)
    }

    pub fn from_entries(entries: impl IntoIterator<Item = FaqEntry>) -> Result<Self, FaqError> {
        let mut registry = FaqRegistry::in_memory();
        for e in entries {
            registry.append(e)?;
        }
        Ok(registry)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, id: &str) -> Option<&FaqEntry> {
        self.entries.get(id)
    }

    /// Live entries in id order.
    pub fn entries(&self) -> impl Iterator<Item = &FaqEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn write_line(&self, line: &RegistryLine) -> Result<(), FaqError> {
        if let Some(path) = &self.path {
            let mut file = OpenOptions::new().create(true).append(true).open(path)?;
            let json = serde_json::to_string(line).expect("registry lines serialize");
            writeln!(file, "{json}")?;
        }
        Ok(())
    }

    /// Add or replace an entry.
    pub fn append(&mut self, entry: FaqEntry) -> Result<(), FaqError> {
        entry.validate()?;
        let line = RegistryLine::Entry(Box::new(entry));
        self.write_line(&line)?;
        if let RegistryLine::Entry(entry) = line {
            self.entries.insert(entry.id.clone(), *entry);
        }
        Ok(())
    }

    /// Remove an entry; returns whether it was live.
    pub fn tombstone(&mut self, id: &str) -> Result<bool, FaqError> {
        self.write_line(&RegistryLine::Tombstone {
            tombstone: id.to_string(),
            at: Utc::now(),
        })?;
        Ok(self.entries.remove(id).is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaqMatch {
    pub entry: FaqEntry,
    pub score: f64,
}

/// Best entry whose canonical question or any variant scores at least
/// `threshold`. Equal scores go to the smaller id.
pub fn match_faq(question: &str, registry: &FaqRegistry, threshold: f64) -> Option<FaqMatch> {
    let mut best: Option<(&FaqEntry, f64)> = None;
    for entry in registry.entries() {
        let score = entry
            .questions()
            .map(|q| question_similarity(question, q))
            .fold(0.0, f64::max);
        if score >= threshold && best.is_none_or(|(_, s)| score > s) {
            best = Some((entry, score));
        }
    }
    best.map(|(entry, score)| FaqMatch {
        entry: entry.clone(),
        score,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Freshness {
    Fresh,
    Stale { changed: Vec<String>, deleted: Vec<String> },
}

impl Freshness {
    pub fn is_fresh(&self) -> bool {
        matches!(self, Freshness::Fresh)
    }
}

/// Compare an entry's grounding snapshots with the current corpus.
pub fn check_freshness(entry: &FaqEntry, corpus: &Corpus) -> Freshness {
    if entry.kind == FaqKind::HardCoded {
        return Freshness::Fresh;
    }
    let mut changed = Vec::new();
    let mut deleted = Vec::new();
    for snap in &entry.grounding {
        match corpus.get(&snap.topic_id) {
            None => deleted.push(snap.topic_id.clone()),
            Some(t) if t.content_hash != snap.content_hash => changed.push(snap.topic_id.clone()),
            Some(_) => {}
        }
    }
    if changed.is_empty() && deleted.is_empty() {
        Freshness::Fresh
    } else {
        Freshness::Stale { changed, deleted }
    }
}

/// Turn a record judged as a good answer into a curated entry, snapshotting
/// the current hash of each grounding topic.
pub fn curate_entry(record: &EvalRecord, corpus: &Corpus, registry: &mut FaqRegistry) -> Result<FaqEntry, FaqError> {
    if record.verdicts.good_answer != VerdictValue::Yes {
        return Err(FaqError::NotEvaluatedGood(record.record_id.clone()));
    }
    let topic_ids = record.grounding_topic_ids();
    if topic_ids.is_empty() {
        return Err(FaqError::MissingGrounding {
            record_id: record.record_id.clone(),
            topic_id: None,
        });
    }
    let mut grounding = Vec::with_capacity(topic_ids.len());
    for id in topic_ids {
        let topic = corpus.get(&id).ok_or_else(|| FaqError::MissingGrounding {
            record_id: record.record_id.clone(),
            topic_id: Some(id.clone()),
        })?;
        grounding.push(GroundingSnapshot {
            topic_id: id,
            content_hash: topic.content_hash.clone(),
        });
    }
    let entry = FaqEntry {
        id: format!("curated-{}", record.record_id),
        canonical_question: record.question.clone(),
        variants: Vec::new(),
        kind: FaqKind::Curated,
        answer_text: record.answer_text.clone(),
        grounding,
        sensitive: false,
        created_at: Utc::now(),
    };
    registry.append(entry.clone())?;
    Ok(entry)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hard(id: &str, q: &str, variants: &[&str]) -> FaqEntry {
        FaqEntry {
            id: id.into(),
            canonical_question: q.into(),
            variants: variants.iter().map(|s| s.to_string()).collect(),
            kind: FaqKind::HardCoded,
            answer_text: "answer".into(),
            grounding: vec![],
            sensitive: true,
            created_at: DateTime::UNIX_EPOCH,
        }
    }

    #[test]
    fn self_match_scores_one() {
        let reg = FaqRegistry::from_entries([hard("legal", "What are the terms of service?", &[])]).unwrap();
        let m = match_faq("What are the terms of service?", &reg, DEFAULT_FAQ_THRESHOLD).unwrap();
        assert_eq!(m.entry.id, "legal");
        assert_eq!(m.score, 1.0);
    }

    #[test]
    fn no_match_below_threshold() {
        let reg = FaqRegistry::from_entries([hard("creds", "where do I find my credentials?", &[])]).unwrap();
        assert!(match_faq("what are the legal terms?", &reg, DEFAULT_FAQ_THRESHOLD).is_none());
    }

    #[test]
    fn variant_match() {
        let reg =
            FaqRegistry::from_entries([hard("creds", "credentials location", &["where do I find my credentials?"])])
                .unwrap();
        let m = match_faq("how do i find my credentials", &reg, DEFAULT_FAQ_THRESHOLD).unwrap();
        assert!(m.score >= 0.85);
    }

    #[test]
    fn ties_go_to_smaller_id() {
        let reg = FaqRegistry::from_entries([hard("b", "reset password", &[]), hard("a", "reset password", &[])])
            .unwrap();
        assert_eq!(match_faq("reset password", &reg, 0.5).unwrap().entry.id, "a");
    }

    #[test]
    fn invalid_entries_rejected() {
        let mut e = hard("x", "q", &[]);
        e.kind = FaqKind::Curated;
        assert!(matches!(e.validate(), Err(FaqError::InvalidEntry { .. })));
    }

    #[test]
    fn file_replay_with_tombstone() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("faq.jsonl");
        let mut reg = FaqRegistry::load(&path).unwrap();
        reg.append(hard("a", "first", &[])).unwrap();
        reg.append(hard("b", "second", &[])).unwrap();
        let mut replaced = hard("a", "first again", &[]);
        replaced.answer_text = "new".into();
        reg.append(replaced).unwrap();
        assert!(reg.tombstone("b").unwrap());
        let again = FaqRegistry::load(&path).unwrap();
        assert_eq!(again.len(), 1);
        assert_eq!(again.get("a").unwrap().answer_text, "new");
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 4);
    }
}
