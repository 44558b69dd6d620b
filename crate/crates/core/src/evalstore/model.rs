use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::classify::QuestionClass;
use crate::pipeline::{Link, Outcome, Rating};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictValue {
    Yes,
    No,
    #[default]
    Unset,
}

impl VerdictValue {
    /// Parse a verdict, accepting the spreadsheet vocabulary evaluators use.
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" | "y" | "pass" | "true" => Some(VerdictValue::Yes),
            "no" | "n" | "fail" | "false" => Some(VerdictValue::No),
            "unset" | "" => Some(VerdictValue::Unset),
            _ => None,
        }
    }
}

/// The five review criteria, in funnel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    ValidQuestion,
    CorrectClass,
    ArticleExists,
    SearchSuccess,
    GoodAnswer,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::ValidQuestion,
        Criterion::CorrectClass,
        Criterion::ArticleExists,
        Criterion::SearchSuccess,
        Criterion::GoodAnswer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::ValidQuestion => "valid_question",
            Criterion::CorrectClass => "correct_class",
            Criterion::ArticleExists => "article_exists",
            Criterion::SearchSuccess => "search_success",
            Criterion::GoodAnswer => "good_answer",
        }
    }

    /// Accepts `article_exists`, `Article exists`, `article-exists`, and
    /// `valid` as a short form of `valid_question`.
    pub fn parse(s: &str) -> Option<Self> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c })
            .collect();
        match key.as_str() {
            "valid_question" | "valid" => Some(Criterion::ValidQuestion),
            "correct_class" => Some(Criterion::CorrectClass),
            "article_exists" => Some(Criterion::ArticleExists),
            "search_success" => Some(Criterion::SearchSuccess),
            "good_answer" => Some(Criterion::GoodAnswer),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Verdicts {
    #[serde(default)]
    pub valid_question: VerdictValue,
    #[serde(default)]
    pub correct_class: VerdictValue,
    #[serde(default)]
    pub article_exists: VerdictValue,
    #[serde(default)]
    pub search_success: VerdictValue,
    #[serde(default)]
    pub good_answer: VerdictValue,
}

impl Verdicts {
    pub fn get(&self, c: Criterion) -> VerdictValue {
        match c {
            Criterion::ValidQuestion => self.valid_question,
            Criterion::CorrectClass => self.correct_class,
            Criterion::ArticleExists => self.article_exists,
            Criterion::SearchSuccess => self.search_success,
            Criterion::GoodAnswer => self.good_answer,
        }
    }

    pub fn set(&mut self, c: Criterion, v: VerdictValue) {
        match c {
            Criterion::ValidQuestion => self.valid_question = v,
            Criterion::CorrectClass => self.correct_class = v,
            Criterion::ArticleExists => self.article_exists = v,
            Criterion::SearchSuccess => self.search_success = v,
            Criterion::GoodAnswer => self.good_answer = v,
        }
    }

    pub fn all(v: VerdictValue) -> Self {
        Verdicts {
            valid_question: v,
            correct_class: v,
            article_exists: v,
            search_success: v,
            good_answer: v,
        }
    }

    /// A good answer must have had an article to find and must have found it.
    pub fn workflow_violation(&self) -> Option<String> {
        if self.good_answer == VerdictValue::Yes {
            for c in [Criterion::ArticleExists, Criterion::SearchSuccess] {
                if self.get(c) != VerdictValue::Yes {
                    return Some(format!("good_answer=yes requires {}=yes", c.as_str()));
                }
            }
        }
        None
    }
}

/// Partial verdict update; `None` leaves a criterion untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VerdictPatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_question: Option<VerdictValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct_class: Option<VerdictValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub article_exists: Option<VerdictValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_success: Option<VerdictValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub good_answer: Option<VerdictValue>,
}

impl VerdictPatch {
    pub fn with(mut self, c: Criterion, v: VerdictValue) -> Self {
        let slot = match c {
            Criterion::ValidQuestion => &mut self.valid_question,
            Criterion::CorrectClass => &mut self.correct_class,
            Criterion::ArticleExists => &mut self.article_exists,
            Criterion::SearchSuccess => &mut self.search_success,
            Criterion::GoodAnswer => &mut self.good_answer,
        };
        *slot = Some(v);
        self
    }

    pub fn apply(&self, v: &mut Verdicts) {
        let pairs = [
            (Criterion::ValidQuestion, self.valid_question),
            (Criterion::CorrectClass, self.correct_class),
            (Criterion::ArticleExists, self.article_exists),
            (Criterion::SearchSuccess, self.search_success),
            (Criterion::GoodAnswer, self.good_answer),
        ];
        for (c, value) in pairs {
            if let Some(value) = value {
                v.set(c, value);
            }
        }
    }
}

/// A key term marked by an evaluator: byte offsets into the question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyTerm {
    pub term: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub annotator: String,
    pub at: DateTime<Utc>,
    pub patch: VerdictPatch,
    #[serde(default)]
    pub key_terms: Vec<KeyTerm>,
    #[serde(default)]
    pub tags: Vec<String>,
}

/// What the pipeline hands over for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSeed {
    pub record_id: String,
    /// Screened question text.
    pub question: String,
    pub language: String,
    pub qclass: Option<QuestionClass>,
    pub answer_html: Option<String>,
    pub answer_text: String,
    pub links: Vec<Link>,
    pub outcome: Outcome,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub record_id: String,
    pub question: String,
    pub language: String,
    pub qclass: Option<QuestionClass>,
    pub answer_html: Option<String>,
    #[serde(default)]
    pub answer_text: String,
    pub links: Vec<Link>,
    pub outcome: Outcome,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub verdicts: Verdicts,
    #[serde(default)]
    pub key_terms: Vec<KeyTerm>,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub feedback: Option<Rating>,
    #[serde(default)]
    pub audit: Vec<AuditEntry>,
}

impl EvalRecord {
    pub fn from_seed(seed: EvalSeed) -> Self {
        EvalRecord {
            record_id: seed.record_id,
            question: seed.question,
            language: seed.language,
            qclass: seed.qclass,
            answer_html: seed.answer_html,
            answer_text: seed.answer_text,
            links: seed.links,
            outcome: seed.outcome,
            created_at: seed.created_at,
            verdicts: Verdicts::default(),
            key_terms: Vec::new(),
            tags: Vec::new(),
            feedback: None,
            audit: Vec::new(),
        }
    }

    /// Topic ids the answer was grounded in, in link order.
    pub fn grounding_topic_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for l in &self.links {
            if !ids.contains(&l.topic_id) {
                ids.push(l.topic_id.clone());
            }
        }
        ids
    }
}
