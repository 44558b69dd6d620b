use std::sync::{Mutex, OnceLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::guard::FindingCategory;
use crate::retrieve::TopicHit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Answered,
    FaqAnswered,
    Rejected,
    NotAQuestion,
    NoGrounding,
    Error,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Answered => "answered",
            Outcome::FaqAnswered => "faq-answered",
            Outcome::Rejected => "rejected",
            Outcome::NotAQuestion => "not-a-question",
            Outcome::NoGrounding => "no-grounding",
            Outcome::Error => "error",
        }
    }

    /// Whether the user received a generated or curated answer.
    pub fn is_answer(self) -> bool {
        matches!(self, Outcome::Answered | Outcome::FaqAnswered)
    }
}

impl std::str::FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown outcome {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub topic_id: String,
    pub title: String,
    pub url: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rating {
    Helpful,
    SomewhatHelpful,
    Unhelpful,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub request_id: String,
    pub rating: Rating,
    pub at: DateTime<Utc>,
}

fn ulid_generator() -> &'static Mutex<ulid::Generator> {
    static GEN: OnceLock<Mutex<ulid::Generator>> = OnceLock::new();
    GEN.get_or_init(|| Mutex::new(ulid::Generator::new()))
}

/// A fresh request id. Monotonic within the process, so never repeated.
pub fn new_request_id() -> String {
    let mut generator = ulid_generator().lock().unwrap_or_else(|p| p.into_inner());
    match generator.generate() {
        Ok(id) => id.to_string(),
        // Only reachable after 2^80 ids in one millisecond.
        Err(_) => ulid::Ulid::new().to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AskRequest {
    pub text: String,
    pub request_id: String,
    pub received_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_locale: Option<String>,
}

impl AskRequest {
    pub fn new(text: impl Into<String>) -> Self {
        AskRequest {
            text: text.into(),
            request_id: new_request_id(),
            received_at: Utc::now(),
            client_locale: None,
        }
    }

    pub fn with_locale(mut self, locale: impl Into<String>) -> Self {
        self.client_locale = Some(locale.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Screen,
    Language,
    TranslateIn,
    Classify,
    Faq,
    Rewrite,
    Retrieve,
    Extract,
    Generate,
    Postprocess,
    Log,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Screen => "screen",
            Stage::Language => "language",
            Stage::TranslateIn => "translate-in",
            Stage::Classify => "classify",
            Stage::Faq => "faq",
            Stage::Rewrite => "rewrite",
            Stage::Retrieve => "retrieve",
            Stage::Extract => "extract",
            Stage::Generate => "generate",
            Stage::Postprocess => "postprocess",
            Stage::Log => "log",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageVerdict {
    Pass,
    Changed,
    Skip,
    Stop,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub duration_us: u64,
    pub verdict: StageVerdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerResponse {
    pub request_id: String,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_html: Option<String>,
    /// The answer as plain text in the asker's language.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_text: Option<String>,
    pub links: Vec<Link>,
    pub highlighted_terms: Vec<String>,
    /// Ordinary ranked search results; returned for every outcome that got
    /// as far as retrieval, including non-questions.
    pub hits: Vec<TopicHit>,
    /// Guard categories behind a rejection or redaction.
    pub findings: Vec<FindingCategory>,
    pub language: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<StageRecord>,
}

impl AnswerResponse {
    /// Trace as (stage, verdict, detail), without timings.
    pub fn trace_shape(&self) -> Vec<(Stage, StageVerdict, String)> {
        self.trace.iter().map(|s| (s.stage, s.verdict, s.detail.clone())).collect()
    }
}

/// Privacy-safe summary written to log sinks. `question` is always the
/// screened text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSummary {
    pub request_id: String,
    pub ts: DateTime<Utc>,
    pub question: String,
    pub outcome: Outcome,
    #[serde(default)]
    pub is_question: Option<bool>,
    pub links: Vec<Link>,
    pub findings: Vec<FindingCategory>,
    pub duration_ms: u64,
}

/// One line of the file log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LogLine {
    Response(ResponseSummary),
    Feedback(FeedbackEvent),
}
