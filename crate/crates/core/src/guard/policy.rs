use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::Deserialize;
use thiserror::Error;

use super::{Edit, FindingAction, FindingCategory};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("bad pattern {pattern:?}: {message}")]
    Pattern { pattern: String, message: String },
    #[error("invalid policy: {0}")]
    Invalid(String),
}

const DEFAULT_INJECTION: &[&str] = &[
    r"(?i)<\s*/?\s*script\b",
    r"(?i)javascript\s*:",
    r"(?i)<\s*iframe\b",
    r"(?i)\bon(?:load|error|click|mouseover|focus)\s*=",
    r"(?i)\b(?:union\s+select|drop\s+table|insert\s+into|delete\s+from)\b",
    r"(?i);\s*(?:rm|curl|wget|sh|bash)\s",
    r"\$\([^)]*\)",
    r"\{\{[^}]*\}\}",
];

const DEFAULT_ADVERSARIAL: &[&str] = &[
    r"(?i)\b(?:ignore|disregard|forget)\s+(?:all\s+|any\s+)?(?:of\s+)?(?:the\s+|your\s+)?(?:previous|prior|above|earlier)\s+(?:instructions|prompts|rules|messages)",
    r"(?i)\b(?:reveal|print|show|repeat|output)\s+(?:me\s+)?(?:the\s+|your\s+)?system\s+prompt",
    r"(?i)\byou\s+are\s+now\s+(?:a|an|in|the)\b",
    r"(?i)\bpretend\s+(?:you\s+are|to\s+be)\b",
    r"(?i)\bjailbreak",
    r"(?i)\bdo\s+anything\s+now\b",
];

fn default_pii() -> Vec<(FindingCategory, &'static str)> {
    vec![
        (FindingCategory::PiiUrl, r"(?i)\b(?:https?://|www\.)[^\s<>]+"),
        (FindingCategory::PiiEmail, r"\b[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}\b"),
        (
            FindingCategory::PiiIp,
            r"\b(?:(?:25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d)\.){3}(?:25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d)\b",
        ),
        (
            FindingCategory::PiiIp,
            r"\b(?:[0-9A-Fa-f]{1,4}:){7}[0-9A-Fa-f]{1,4}\b|\b(?:[0-9A-Fa-f]{1,4}:)+:(?:[0-9A-Fa-f]{1,4}(?::[0-9A-Fa-f]{1,4})*)?",
        ),
        (
            FindingCategory::PiiUserid,
            r"(?i)\b(?:user\s?(?:id|name)|userid|login\s?id|account\s?id)\s*[:=]\s*([A-Za-z0-9._@-]+)",
        ),
        (
            FindingCategory::PiiName,
            r"\b(?:[Mm]y name is|[Nn]ame\s*:)\s+(\p{Lu}[\p{Ll}'-]+(?:\s+\p{Lu}[\p{Ll}'-]+)?)",
        ),
    ]
}

const DEFAULT_HAP: &[(FindingCategory, &str, Option<&str>)] = &[
    (FindingCategory::HapProfanity, "damn", None),
    (FindingCategory::HapProfanity, "crap", None),
    (FindingCategory::HapProfanity, "wtf", None),
    (FindingCategory::HapProfanity, "shit", None),
    (FindingCategory::HapProfanity, "fucking", None),
    (FindingCategory::HapProfanity, "fuck", None),
    (FindingCategory::HapAbuse, "idiot", None),
    (FindingCategory::HapAbuse, "stupid", None),
    (FindingCategory::HapAbuse, "moron", None),
    (FindingCategory::HapAbuse, "shut up", None),
    (FindingCategory::HapHate, "subhuman", None),
    (FindingCategory::HapHate, "vermin", None),
];

const DEFAULT_BIAS: &[(&str, &str)] = &[
    ("whitelist", "allowlist"),
    ("blacklist", "blocklist"),
    ("whitelisted", "allowlisted"),
    ("blacklisted", "blocklisted"),
    ("manpower", "workforce"),
    ("man-hours", "person-hours"),
    ("sanity check", "confidence check"),
    ("dummy value", "placeholder value"),
];

#[derive(Debug, Clone)]
struct LexiconRule {
    category: FindingCategory,
    re: Regex,
    replacement: Option<String>,
}

#[derive(Debug, Clone)]
struct PiiRule {
    category: FindingCategory,
    re: Regex,
}

/// Immutable rule set used by the screening functions.
#[derive(Debug, Clone)]
pub struct GuardPolicy {
    injection: Vec<Regex>,
    adversarial: Vec<Regex>,
    pii: Vec<PiiRule>,
    lexicon: Vec<LexiconRule>,
    pub max_input_len: usize,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    injection_patterns: Option<Vec<String>>,
    adversarial_patterns: Option<Vec<String>>,
    pii_patterns: Option<BTreeMap<FindingCategory, OneOrMany>>,
    hap_lexicon: Option<PathBuf>,
    bias_map: Option<PathBuf>,
    max_input_len: Option<usize>,
}

/// `{"hap-profanity": {"term": null | "replacement"}, ...}`
type HapFile = BTreeMap<FindingCategory, BTreeMap<String, Option<String>>>;

fn compile(pattern: &str) -> Result<Regex, PolicyError> {
    Regex::new(pattern).map_err(|e| PolicyError::Pattern {
        pattern: pattern.to_string(),
        message: e.to_string(),
    })
}

fn term_regex(term: &str) -> Result<Regex, PolicyError> {
    let words: Vec<String> = term.split_whitespace().map(regex::escape).collect();
    compile(&format!(r"(?i)\b{}\b", words.join(r"\s+")))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PolicyError> {
    let err = |message: String| PolicyError::Read {
        path: path.display().to_string(),
        message,
    };
    let raw = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    serde_json::from_str(&raw).map_err(|e| err(e.to_string()))
}

impl Default for GuardPolicy {
    fn default() -> Self {
        let lexicon = DEFAULT_HAP
            .iter()
            .map(|(c, t, r)| (*c, t.to_string(), r.map(str::to_string)))
            .chain(
                DEFAULT_BIAS
                    .iter()
                    .map(|(t, r)| (FindingCategory::Bias, t.to_string(), Some(r.to_string()))),
            )
            .collect();
        GuardPolicy::build(
            DEFAULT_INJECTION.iter().map(|s| s.to_string()).collect(),
            DEFAULT_ADVERSARIAL.iter().map(|s| s.to_string()).collect(),
            default_pii().into_iter().map(|(c, p)| (c, p.to_string())).collect(),
            lexicon,
            1000,
        )
        .expect("built-in guard policy is valid")
    }
}

impl GuardPolicy {
    fn build(
        injection: Vec<String>,
        adversarial: Vec<String>,
        pii: Vec<(FindingCategory, String)>,
        lexicon: Vec<(FindingCategory, String, Option<String>)>,
        max_input_len: usize,
    ) -> Result<Self, PolicyError> {
        if max_input_len == 0 {
            return Err(PolicyError::Invalid("max_input_len must be positive".into()));
        }
        for (category, _) in &pii {
            if category.placeholder().is_none() {
                return Err(PolicyError::Invalid(format!(
                    "{} is not a personal-information category",
                    category.as_str()
                )));
            }
        }
        let terms: Vec<String> = lexicon.iter().map(|(_, t, _)| t.to_lowercase()).collect();
        for (_, term, replacement) in &lexicon {
            if let Some(r) = replacement {
                let lower = crate::text::words(r);
                if let Some(bad) = terms.iter().find(|t| lower.iter().any(|w| w == *t)) {
                    return Err(PolicyError::Invalid(format!(
                        "replacement for {term:?} contains listed term {bad:?}"
                    )));
                }
            }
        }
        Ok(GuardPolicy {
            injection: injection.iter().map(|p| compile(p)).collect::<Result<_, _>>()?,
            adversarial: adversarial.iter().map(|p| compile(p)).collect::<Result<_, _>>()?,
            pii: pii
                .iter()
                .map(|(c, p)| Ok(PiiRule { category: *c, re: compile(p)? }))
                .collect::<Result<_, PolicyError>>()?,
            lexicon: lexicon
                .iter()
                .map(|(c, t, r)| {
                    Ok(LexiconRule {
                        category: *c,
                        re: term_regex(t)?,
                        replacement: r.clone(),
                    })
                })
                .collect::<Result<_, PolicyError>>()?,
            max_input_len,
        })
    }

    /// Load a policy file. Omitted fields fall back to the built-in rules;
    /// lexicon paths are resolved relative to the policy file.
    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let file: PolicyFile = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let defaults = GuardPolicy::default();

        let injection = file
            .injection_patterns
            .unwrap_or_else(|| DEFAULT_INJECTION.iter().map(|s| s.to_string()).collect());
        let adversarial = file
            .adversarial_patterns
            .unwrap_or_else(|| DEFAULT_ADVERSARIAL.iter().map(|s| s.to_string()).collect());
        let pii = match file.pii_patterns {
            Some(map) => map
                .into_iter()
                .flat_map(|(c, p)| match p {
                    OneOrMany::One(s) => vec![(c, s)],
                    OneOrMany::Many(v) => v.into_iter().map(|s| (c, s)).collect(),
                })
                .collect(),
            None => default_pii().into_iter().map(|(c, p)| (c, p.to_string())).collect(),
        };

        let mut lexicon = Vec::new();
        match file.hap_lexicon {
            Some(p) => {
                let hap: HapFile = read_json(&base.join(p))?;
                for (category, terms) in hap {
                    if !matches!(
                        category,
                        FindingCategory::HapHate | FindingCategory::HapAbuse | FindingCategory::HapProfanity
                    ) {
                        return Err(PolicyError::Invalid(format!("{} is not a HAP category", category.as_str())));
                    }
                    lexicon.extend(terms.into_iter().map(|(t, r)| (category, t, r)));
                }
            }
            None => lexicon.extend(DEFAULT_HAP.iter().map(|(c, t, r)| (*c, t.to_string(), r.map(str::to_string)))),
        }
        match file.bias_map {
            Some(p) => {
                let bias: BTreeMap<String, String> = read_json(&base.join(p))?;
                lexicon.extend(bias.into_iter().map(|(t, r)| (FindingCategory::Bias, t, Some(r))));
            }
            None => lexicon.extend(
                DEFAULT_BIAS
                    .iter()
                    .map(|(t, r)| (FindingCategory::Bias, t.to_string(), Some(r.to_string()))),
            ),
        }
        GuardPolicy::build(
            injection,
            adversarial,
            pii,
            lexicon,
            file.max_input_len.unwrap_or(defaults.max_input_len),
        )
    }

    pub(crate) fn rejecting_matches(&self, text: &str) -> Vec<(FindingCategory, usize, usize)> {
        let mut out = Vec::new();
        for (category, rules) in [
            (FindingCategory::Injection, &self.injection),
            (FindingCategory::Adversarial, &self.adversarial),
        ] {
            for re in rules {
                out.extend(re.find_iter(text).map(|m| (category, m.start(), m.end())));
            }
        }
        out.sort_by_key(|&(c, s, e)| (s, e, c));
        out.dedup();
        out
    }

    /// Non-overlapping edits in text order: earliest first, longer wins ties.
    pub(crate) fn sanitizing_matches(&self, text: &str) -> Vec<Edit> {
        let mut candidates: Vec<Edit> = Vec::new();
        for rule in &self.pii {
            for caps in rule.re.captures_iter(text) {
                let m = caps.get(1).or_else(|| caps.get(0)).unwrap();
                let trimmed = m.as_str().trim_end_matches(['.', ',', ';', ':', '!', '?', ')', '\'', '"']);
                if trimmed.is_empty() {
                    continue;
                }
                if rule.category == FindingCategory::PiiIp && !trimmed.contains(|c: char| c.is_ascii_digit()) {
                    continue;
                }
                candidates.push(Edit {
                    category: rule.category,
                    start: m.start(),
                    end: m.start() + trimmed.len(),
                    replacement: rule.category.placeholder().unwrap().to_string(),
                    action: FindingAction::Removed,
                });
            }
        }
        for rule in &self.lexicon {
            for m in rule.re.find_iter(text) {
                let (replacement, action) = match &rule.replacement {
                    Some(r) => (match_case(m.as_str(), r), FindingAction::Paraphrased),
                    None => (String::new(), FindingAction::Removed),
                };
                candidates.push(Edit {
                    category: rule.category,
                    start: m.start(),
                    end: m.end(),
                    replacement,
                    action,
                });
            }
        }
        candidates.sort_by(|a, b| {
            a.start
                .cmp(&b.start)
                .then((b.end - b.start).cmp(&(a.end - a.start)))
                .then(a.category.cmp(&b.category))
        });
        let mut chosen: Vec<Edit> = Vec::new();
        for c in candidates {
            if chosen.last().is_none_or(|last| c.start >= last.end) {
                chosen.push(c);
            }
        }
        chosen
    }
}

fn match_case(original: &str, replacement: &str) -> String {
    if original.chars().next().is_some_and(char::is_uppercase) {
        let mut chars = replacement.chars();
        match chars.next() {
            Some(first) => first.to_uppercase().chain(chars).collect(),
            None => String::new(),
        }
    } else {
        replacement.to_string()
    }
}
