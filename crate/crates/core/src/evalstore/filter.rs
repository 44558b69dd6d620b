//! Record filters: equality clauses joined by `AND`.
//!
//! ```text
//! article_exists=yes AND search_success=no
//! "Article exists" == "Yes" AND "Search success" == "Fail"
//! outcome=answered AND tag=pricing
//! ```

use super::model::{Criterion, EvalRecord, VerdictValue};
use super::EvalError;
use crate::classify::QuestionType;
use crate::pipeline::{Outcome, Rating};

#[derive(Debug, Clone, PartialEq)]
pub enum Clause {
    Verdict(Criterion, VerdictValue),
    Outcome(Outcome),
    Language(String),
    QType(QuestionType),
    Tag(String),
    Feedback(Option<Rating>),
    RecordId(String),
}

impl Clause {
    pub fn matches(&self, r: &EvalRecord) -> bool {
        match self {
            Clause::Verdict(c, v) => r.verdicts.get(*c) == *v,
            Clause::Outcome(o) => r.outcome == *o,
            Clause::Language(l) => r.language.eq_ignore_ascii_case(l),
            Clause::QType(t) => r.qclass.as_ref().is_some_and(|q| q.qtype == *t),
            Clause::Tag(t) => r.tags.iter().any(|x| x == t),
            Clause::Feedback(f) => r.feedback == *f,
            Clause::RecordId(id) => &r.record_id == id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecordFilter {
    pub clauses: Vec<Clause>,
}

impl RecordFilter {
    pub fn matches(&self, r: &EvalRecord) -> bool {
        self.clauses.iter().all(|c| c.matches(r))
    }
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    for q in ['"', '\''] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

/// Split on the word AND outside quotes, case-insensitively.
fn split_and(expr: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    let chars: Vec<char> = expr.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if let Some(q) = quote {
            if c == q {
                quote = None;
            }
            current.push(c);
            i += 1;
            continue;
        }
        if c == '"' || c == '\'' {
            quote = Some(c);
            current.push(c);
            i += 1;
            continue;
        }
        let at_boundary = i == 0 || chars[i - 1].is_whitespace();
        if at_boundary && i + 3 <= chars.len() {
            let word: String = chars[i..i + 3].iter().collect();
            let after_ok = i + 3 == chars.len() || chars[i + 3].is_whitespace();
            if word.eq_ignore_ascii_case("and") && after_ok {
                parts.push(std::mem::take(&mut current));
                i += 3;
                continue;
            }
        }
        current.push(c);
        i += 1;
    }
    parts.push(current);
    parts
}

pub fn parse_filter(expr: &str) -> Result<RecordFilter, EvalError> {
    let bad = |why: &str| EvalError::BadFilter(format!("{expr:?}: {why}"));
    if expr.trim().is_empty() {
        return Ok(RecordFilter::default());
    }
    let mut clauses = Vec::new();
    for part in split_and(expr) {
        let part = part.trim();
        if part.is_empty() {
            return Err(bad("empty clause"));
        }
        let (field, value) = match part.split_once("==") {
            Some(pair) => pair,
            None => part.split_once('=').ok_or_else(|| bad("expected field=value"))?,
        };
        let field = unquote(field);
        let value = unquote(value);
        let clause = if let Some(c) = Criterion::parse(field) {
            let v = VerdictValue::parse(value).ok_or_else(|| bad(&format!("bad verdict {value:?}")))?;
            Clause::Verdict(c, v)
        } else {
            match field.trim().to_ascii_lowercase().as_str() {
                "outcome" => Clause::Outcome(value.parse().map_err(|e: String| bad(&e))?),
                "language" | "lang" => Clause::Language(value.to_string()),
                "qtype" | "class" => Clause::QType(
                    serde_json::from_value(serde_json::Value::String(value.to_ascii_lowercase()))
                        .map_err(|_| bad(&format!("bad question type {value:?}")))?,
                ),
                "tag" => Clause::Tag(value.to_string()),
                "feedback" => Clause::Feedback(if value.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(
                        serde_json::from_value(serde_json::Value::String(value.to_ascii_lowercase()))
                            .map_err(|_| bad(&format!("bad rating {value:?}")))?,
                    )
                }),
                "record_id" | "id" => Clause::RecordId(value.to_string()),
                _ => return Err(bad(&format!("unknown field {field:?}"))),
            }
        };
        clauses.push(clause);
    }
    Ok(RecordFilter { clauses })
}

/// Records matching `expr`, ordered by (created_at, record_id).
pub fn query_records<'a>(
    records: impl IntoIterator<Item = &'a EvalRecord>,
    expr: &str,
) -> Result<Vec<EvalRecord>, EvalError> {
    let filter = parse_filter(expr)?;
    let mut out: Vec<EvalRecord> = records.into_iter().filter(|r| filter.matches(r)).cloned().collect();
    out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.record_id.cmp(&b.record_id)));
    Ok(out)
}
