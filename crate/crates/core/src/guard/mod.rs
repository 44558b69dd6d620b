//! Entry and exit screening: injection and adversarial prompt rejection,
//! personal-information redaction, HAP and bias paraphrasing, language
//! detection, and pluggable translation.

mod lang;
mod policy;
mod translate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lang::{detect_language, LanguageTag};
pub use policy::{GuardPolicy, PolicyError};
pub use translate::{translate, DictionaryTranslator, IdentityTranslator, Translated, TranslatorClient};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingCategory {
    Injection,
    Adversarial,
    PiiName,
    PiiUserid,
    PiiIp,
    PiiEmail,
    PiiUrl,
    HapHate,
    HapAbuse,
    HapProfanity,
    Bias,
}

impl FindingCategory {
    pub fn is_rejecting(self) -> bool {
        matches!(self, FindingCategory::Injection | FindingCategory::Adversarial)
    }

    pub fn placeholder(self) -> Option<&'static str> {
        Some(match self {
            FindingCategory::PiiName => "[NAME]",
            FindingCategory::PiiUserid => "[USERID]",
            FindingCategory::PiiIp => "[IP]",
            FindingCategory::PiiEmail => "[EMAIL]",
            FindingCategory::PiiUrl => "[URL]",
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FindingCategory::Injection => "injection",
            FindingCategory::Adversarial => "adversarial",
            FindingCategory::PiiName => "pii-name",
            FindingCategory::PiiUserid => "pii-userid",
            FindingCategory::PiiIp => "pii-ip",
            FindingCategory::PiiEmail => "pii-email",
            FindingCategory::PiiUrl => "pii-url",
            FindingCategory::HapHate => "hap-hate",
            FindingCategory::HapAbuse => "hap-abuse",
            FindingCategory::HapProfanity => "hap-profanity",
            FindingCategory::Bias => "bias",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingAction {
    Rejected,
    Removed,
    Paraphrased,
}

/// Byte span into the screened input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub category: FindingCategory,
    pub span: Span,
    pub action: FindingAction,
    /// Optional tone label attached by an external sentiment analyzer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tone: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Rejected,
    Sanitized,
    Clean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenResult {
    pub verdict: Verdict,
    pub text: String,
    pub findings: Vec<Finding>,
}

impl ScreenResult {
    pub fn categories(&self) -> Vec<FindingCategory> {
        let mut cats: Vec<_> = self.findings.iter().map(|f| f.category).collect();
        cats.sort();
        cats.dedup();
        cats
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GuardError {
    #[error("input is {len} characters, limit is {max}")]
    InputTooLong { len: usize, max: usize },
    #[error("cannot detect the language of empty text")]
    EmptyText,
    #[error("translator {client} unavailable: {cause}")]
    TranslatorUnavailable { client: String, cause: String },
}

/// Screen user input at pipeline entry.
pub fn screen_input(raw: &str, policy: &GuardPolicy) -> Result<ScreenResult, GuardError> {
    let len = raw.chars().count();
    if len > policy.max_input_len {
        return Err(GuardError::InputTooLong {
            len,
            max: policy.max_input_len,
        });
    }
    Ok(screen_text(raw, policy))
}

/// Screen text with no length limit (used on generated output).
pub fn screen_text(raw: &str, policy: &GuardPolicy) -> ScreenResult {
    let rejecting = policy.rejecting_matches(raw);
    if !rejecting.is_empty() {
        return ScreenResult {
            verdict: Verdict::Rejected,
            text: String::new(),
            findings: rejecting
                .into_iter()
                .map(|(category, start, end)| Finding {
                    category,
                    span: Span { start, end },
                    action: FindingAction::Rejected,
                    tone: None,
                })
                .collect(),
        };
    }

    // Each byte of `current` remembers the input range it came from, so
    // findings from later passes still point into the original input.
    let mut current = raw.to_string();
    let mut origin: Vec<(usize, usize)> = (0..raw.len()).map(|i| (i, i + 1)).collect();
    let mut findings = Vec::new();
    for _ in 0..4 {
        let edits = policy.sanitizing_matches(&current);
        if edits.is_empty() {
            break;
        }
        let mut next = String::with_capacity(current.len());
        let mut next_origin = Vec::with_capacity(origin.len());
        let mut cursor = 0;
        for edit in &edits {
            let (mut start, mut end) = (edit.start, edit.end);
            if edit.replacement.is_empty() {
                // Removing a word also removes one neighbouring space.
                if current[end..].starts_with(' ') {
                    end += 1;
                } else if start > cursor && current[..start].ends_with(' ') {
                    start -= 1;
                }
            }
            next.push_str(&current[cursor..start]);
            next_origin.extend_from_slice(&origin[cursor..start]);
            let source = (origin[edit.start].0, origin[edit.end - 1].1);
            next.push_str(&edit.replacement);
            next_origin.extend(std::iter::repeat_n(source, edit.replacement.len()));
            findings.push(Finding {
                category: edit.category,
                span: Span {
                    start: source.0,
                    end: source.1,
                },
                action: edit.action,
                tone: None,
            });
            cursor = end;
        }
        next.push_str(&current[cursor..]);
        next_origin.extend_from_slice(&origin[cursor..]);
        current = next;
        origin = next_origin;
    }

    if findings.is_empty() {
        ScreenResult {
            verdict: Verdict::Clean,
            text: raw.to_string(),
            findings,
        }
    } else {
        findings.sort_by_key(|f| (f.span.start, f.span.end));
        ScreenResult {
            verdict: Verdict::Sanitized,
            text: current,
            findings,
        }
    }
}

/// One planned replacement inside the text being sanitized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Edit {
    pub category: FindingCategory,
    pub start: usize,
    pub end: usize,
    pub replacement: String,
    pub action: FindingAction,
}
