//! Rule-based question detection and question typing.

use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuestionType {
    WhatIs,
    HowTo,
    Troubleshooting,
    Other,
}

impl QuestionType {
    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::WhatIs => "what-is",
            QuestionType::HowTo => "how-to",
            QuestionType::Troubleshooting => "troubleshooting",
            QuestionType::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionClass {
    pub is_question: bool,
    pub qtype: QuestionType,
    /// Names of the rules that fired.
    pub signals: Vec<String>,
}

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("{0}")]
    Read(String),
    #[error("rule {name:?}: {message}")]
    Pattern { name: String, message: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedPattern {
    pub name: String,
    pub pattern: String,
}

/// Rule file layout. Each list is tried in order; type lists are consulted
/// troubleshooting first, then how-to, then what-is.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleFile {
    pub question: Vec<NamedPattern>,
    pub troubleshooting: Vec<NamedPattern>,
    pub how_to: Vec<NamedPattern>,
    pub what_is: Vec<NamedPattern>,
}

fn np(name: &str, pattern: &str) -> NamedPattern {
    NamedPattern {
        name: name.into(),
        pattern: pattern.into(),
    }
}

impl Default for RuleFile {
    fn default() -> Self {
        RuleFile {
            question: vec![
                np("terminal-question-mark", r"\?\s*$"),
                np(
                    "interrogative-lead",
                    r"(?i)^\s*(?:what|why|how|where|when|which|who|can|does|is|are|do)\b",
                ),
                np("help-imperative", r"(?i)^\s*(?:please\s+)?(?:tell me|explain|show me how)\b"),
            ],
            troubleshooting: vec![
                np("error-word", r"(?i)\b(?:error|errors|exception|crash(?:es|ed|ing)?)\b"),
                np("fails", r"(?i)\bfail(?:s|ed|ing|ure|ures)?\b"),
                np("not-working", r"(?i)\b(?:not working|doesn't work|does not work|won't|isn't working|broken|stuck)\b"),
                np("why-failing", r"(?i)\bwhy (?:is|does|do|did|can't|cannot)\b.*\b(?:fail\w*|error\w*|slow|down|timeout|timing out)\b"),
            ],
            how_to: vec![
                np("how-do-i", r"(?i)\bhow (?:do|can|should|would|to) (?:i|we|you|one)?\b"),
                np("how-to", r"(?i)\bhow to\b"),
                np("steps-to", r"(?i)\bsteps? (?:to|for)\b"),
                np(
                    "task-verb-question",
                    r"(?i)^\s*(?:create|configure|install|set up|setup|add|delete|remove|enable|disable|connect|deploy|rotate|reset|update|upgrade)\b.*\?\s*$",
                ),
            ],
            what_is: vec![
                np("what-is", r"(?i)\bwhat (?:is|are)\b"),
                np("define", r"(?i)\b(?:define|definition of|meaning of)\b"),
                np("what-does-mean", r"(?i)\bwhat does .+ mean\b"),
                np("explain", r"(?i)^\s*(?:please\s+)?(?:explain|describe)\b"),
            ],
        }
    }
}

#[derive(Debug, Clone)]
struct Rule {
    name: String,
    re: Regex,
}

/// Compiled, immutable rule tables.
#[derive(Debug, Clone)]
pub struct QuestionRules {
    question: Vec<Rule>,
    cascade: Vec<(QuestionType, Vec<Rule>)>,
}

fn compile(list: &[NamedPattern]) -> Result<Vec<Rule>, RuleError> {
    list.iter()
        .map(|p| {
            Regex::new(&p.pattern)
                .map(|re| Rule {
                    name: p.name.clone(),
                    re,
                })
                .map_err(|e| RuleError::Pattern {
                    name: p.name.clone(),
                    message: e.to_string(),
                })
        })
        .collect()
}

impl Default for QuestionRules {
    fn default() -> Self {
        QuestionRules::from_file(&RuleFile::default()).expect("built-in rules compile")
    }
}

impl QuestionRules {
    pub fn from_file(file: &RuleFile) -> Result<Self, RuleError> {
        Ok(QuestionRules {
            question: compile(&file.question)?,
            cascade: vec![
                (QuestionType::Troubleshooting, compile(&file.troubleshooting)?),
                (QuestionType::HowTo, compile(&file.how_to)?),
                (QuestionType::WhatIs, compile(&file.what_is)?),
            ],
        })
    }

    pub fn load(path: &Path) -> Result<Self, RuleError> {
        let raw = std::fs::read_to_string(path).map_err(|e| RuleError::Read(format!("{}: {e}", path.display())))?;
        let file: RuleFile =
            serde_json::from_str(&raw).map_err(|e| RuleError::Read(format!("{}: {e}", path.display())))?;
        QuestionRules::from_file(&file)
    }

    /// Whether the text is a question, and which detection rules fired.
    pub fn is_question(&self, text: &str) -> (bool, Vec<String>) {
        let signals: Vec<String> = self
            .question
            .iter()
            .filter(|r| r.re.is_match(text))
            .map(|r| r.name.clone())
            .collect();
        (!signals.is_empty(), signals)
    }

    /// Classify with the first matching type in cascade order.
    pub fn classify(&self, text: &str) -> QuestionClass {
        let (is_question, mut signals) = self.is_question(text);
        if !is_question {
            return QuestionClass {
                is_question,
                qtype: QuestionType::Other,
                signals,
            };
        }
        for (qtype, rules) in &self.cascade {
            if let Some(rule) = rules.iter().find(|r| r.re.is_match(text)) {
                signals.push(rule.name.clone());
                return QuestionClass {
                    is_question,
                    qtype: *qtype,
                    signals,
                };
            }
        }
        QuestionClass {
            is_question,
            qtype: QuestionType::Other,
            signals,
        }
    }
}

/// [`QuestionRules::is_question`] with the built-in rules.
pub fn is_question(text: &str) -> (bool, Vec<String>) {
    builtin().is_question(text)
}

/// [`QuestionRules::classify`] with the built-in rules.
pub fn classify_type(text: &str) -> QuestionClass {
    builtin().classify(text)
}

fn builtin() -> &'static QuestionRules {
    static RULES: std::sync::OnceLock<QuestionRules> = std::sync::OnceLock::new();
    RULES.get_or_init(QuestionRules::default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lead_word_and_mark() {
        let (q, signals) = is_question("how do I create a deployment?");
        assert!(q);
        assert_eq!(signals, vec!["terminal-question-mark", "interrogative-lead"]);
    }

    #[test]
    fn keyword_query_is_not_a_question() {
        let c = classify_type("pricing");
        assert!(!c.is_question);
        assert_eq!(c.qtype, QuestionType::Other);
    }

    #[test]
    fn labelled_fixture() {
        // Hand-labelled by walking the rule table.
        let fixture: &[(&str, bool)] = &[
            ("explain service credentials", true),
            ("how do I create a deployment?", true),
            ("pricing", false),
            ("what is a service instance", true),
            ("api key rotation", false),
            ("Can I use my own domain", true),
            ("does the free plan expire", true),
            ("tell me about regions", true),
            ("error 500 on login", false),
            ("login?", true),
            ("where are logs stored", true),
            ("Which regions are available", true),
            ("kubernetes cluster sizing", false),
            ("Is backup automatic", true),
            ("who owns the billing account?", true),
            ("reset password", false),
            ("are there rate limits", true),
            ("do i need a credit card", true),
            ("show me how to deploy", true),
            ("credentials", false),
        ];
        for (text, expected) in fixture {
            assert_eq!(is_question(text).0, *expected, "{text}");
        }
    }

    #[test]
    fn types() {
        assert_eq!(classify_type("what is the pre-industrial level of co2 on earth?").qtype, QuestionType::WhatIs);
        assert_eq!(classify_type("how do I rotate credentials?").qtype, QuestionType::HowTo);
        let c = classify_type("why is my job failing with error 500?");
        assert_eq!(c.qtype, QuestionType::Troubleshooting);
        assert!(c.signals.contains(&"error-word".to_string()));
        assert_eq!(classify_type("when was the service launched?").qtype, QuestionType::Other);
    }

    #[test]
    fn signals_nonempty_for_questions() {
        for t in ["why?", "how", "explain it", "what is x"] {
            let c = classify_type(t);
            assert!(c.is_question && !c.signals.is_empty());
        }
    }
}
