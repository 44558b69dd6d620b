//! Where finished requests and feedback go. Every sink sees only screened
//! text; a failing sink is logged and otherwise ignored.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde_json::json;

use super::types::{FeedbackEvent, LogLine, ResponseSummary};
use crate::client::JsonSink;
use crate::evalstore::{EvalError, EvalSeed, EvalStore};

pub trait LogSink: Send + Sync {
    fn name(&self) -> &str;
    fn response(&self, summary: &ResponseSummary, seed: &EvalSeed) -> Result<(), String>;
    fn feedback(&self, _event: &FeedbackEvent) -> Result<(), String> {
        Ok(())
    }
}

/// JSONL file with one [`LogLine`] per response or feedback event.
pub struct FileSink {
    path: PathBuf,
    file: Mutex<File>,
}

impl FileSink {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(FileSink {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn write(&self, line: &LogLine) -> Result<(), String> {
        let mut text = serde_json::to_string(line).map_err(|e| e.to_string())?;
        text.push('\n');
        let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
        file.write_all(text.as_bytes()).map_err(|e| e.to_string())
    }
}

impl LogSink for FileSink {
    fn name(&self) -> &str {
        "file"
    }

    fn response(&self, summary: &ResponseSummary, _seed: &EvalSeed) -> Result<(), String> {
        self.write(&LogLine::Response(summary.clone()))
    }

    fn feedback(&self, event: &FeedbackEvent) -> Result<(), String> {
        self.write(&LogLine::Feedback(event.clone()))
    }
}

/// Read a file sink back. Unparseable lines are skipped with a warning.
pub fn read_log(path: &Path) -> std::io::Result<Vec<LogLine>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(l) => out.push(l),
            Err(e) => log::warn!("{}:{}: {e}", path.display(), i + 1),
        }
    }
    Ok(out)
}

/// Posts a short summary of each response to a webhook.
pub struct WebhookSink {
    target: Arc<dyn JsonSink>,
    lock: Mutex<()>,
}

impl WebhookSink {
    pub fn new(target: Arc<dyn JsonSink>) -> Self {
        WebhookSink {
            target,
            lock: Mutex::new(()),
        }
    }
}

pub fn webhook_payload(summary: &ResponseSummary) -> serde_json::Value {
    let links: Vec<_> = summary
        .links
        .iter()
        .map(|l| json!({"topic_id": l.topic_id, "title": l.title}))
        .collect();
    json!({
        "request_id": summary.request_id,
        "ts": summary.ts,
        "question": summary.question,
        "outcome": summary.outcome,
        "links": links,
        "duration_ms": summary.duration_ms,
    })
}

impl LogSink for WebhookSink {
    fn name(&self) -> &str {
        "webhook"
    }

    fn response(&self, summary: &ResponseSummary, _seed: &EvalSeed) -> Result<(), String> {
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        self.target.post(&webhook_payload(summary)).map_err(|e| e.to_string())
    }
}

/// Hands answered requests to the evaluation store and attaches ratings.
pub struct EvalSink {
    store: Arc<Mutex<EvalStore>>,
}

impl EvalSink {
    pub fn new(store: Arc<Mutex<EvalStore>>) -> Self {
        EvalSink { store }
    }
}

impl LogSink for EvalSink {
    fn name(&self) -> &str {
        "eval"
    }

    fn response(&self, _summary: &ResponseSummary, seed: &EvalSeed) -> Result<(), String> {
        let mut store = self.store.lock().unwrap_or_else(|p| p.into_inner());
        match store.ingest(seed.clone()) {
            Ok(_) | Err(EvalError::NotIngestible(_)) => Ok(()),
            Err(e) => Err(e.to_string()),
        }
    }

    fn feedback(&self, event: &FeedbackEvent) -> Result<(), String> {
        let mut store = self.store.lock().unwrap_or_else(|p| p.into_inner());
        match store.record_feedback(&event.request_id, event.rating, event.at) {
            Ok(()) | Err(EvalError::UnknownRecord(_)) => Ok(()),
            Err(e) => Err(e.to_string()),
        }
    }
}
