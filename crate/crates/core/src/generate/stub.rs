//! Deterministic offline clients.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Finish, Generation, GenerativeClient, Prompt, TemplateId};
use crate::client::ClientError;
use crate::text::{content_set, content_words, is_numeric, sentences, words};

const MAX_SENTENCES: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubSentence {
    pub topic_id: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
    /// Distinct question content words in the sentence.
    pub overlap: usize,
}

/// The number closest to the focus term of the question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueExtraction {
    pub value: Option<String>,
    /// Rarest question content word across the grounding.
    pub focus_term: Option<String>,
    /// The focus term is missing from the selected sentences, so the value
    /// was read next to a weaker term.
    pub ambiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubAnswer {
    pub text: String,
    /// Selected sentences in document order.
    pub sentences: Vec<StubSentence>,
    pub extraction: ValueExtraction,
}

/// Extractive stand-in for a language model: answers with the grounding
/// sentences that share the most content words with the question, and
/// turns "X is/are ..." sentences into "What is/are X?" questions.
#[derive(Debug, Clone)]
pub struct ExtractiveStub {
    id: String,
}

impl Default for ExtractiveStub {
    fn default() -> Self {
        ExtractiveStub { id: "extractive-stub".into() }
    }
}

impl ExtractiveStub {
    pub fn named(id: impl Into<String>) -> Self {
        ExtractiveStub { id: id.into() }
    }

    fn candidates(prompt: &Prompt) -> Vec<StubSentence> {
        let wanted = content_set(&prompt.question);
        let mut out = Vec::new();
        for g in &prompt.grounding {
            for s in sentences(&g.text) {
                if s.text.starts_with('#') {
                    continue;
                }
                let have = content_set(&s.text);
                out.push(StubSentence {
                    topic_id: g.topic_id.clone(),
                    start: s.start,
                    end: s.end,
                    overlap: wanted.intersection(&have).count(),
                    text: s.text,
                });
            }
        }
        out
    }

    pub fn answer(&self, prompt: &Prompt) -> StubAnswer {
        let all = Self::candidates(prompt);
        let mut order: Vec<usize> = (0..all.len()).filter(|&i| all[i].overlap > 0).collect();
        order.sort_by(|&a, &b| {
            all[b]
                .overlap
                .cmp(&all[a].overlap)
                .then_with(|| all[a].text.len().cmp(&all[b].text.len()))
                .then_with(|| a.cmp(&b))
        });
        order.truncate(MAX_SENTENCES);
        if order.is_empty() && !all.is_empty() {
            order.push(0);
        }
        order.sort_unstable();
        let picked: Vec<StubSentence> = order.into_iter().map(|i| all[i].clone()).collect();

        let mut text = String::new();
        for s in &picked {
            if !text.is_empty() {
                let ends_sentence = text.ends_with(['.', '?', '!']);
                text.push(if ends_sentence { ' ' } else { '\n' });
            }
            text.push_str(&s.text);
        }
        let extraction = extract_value(prompt, &picked);
        StubAnswer {
            text,
            sentences: picked,
            extraction,
        }
    }

    pub fn questions(&self, prompt: &Prompt) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for g in &prompt.grounding {
            for s in sentences(&g.text) {
                let ws = words(&s.text);
                let Some(verb) = ws.iter().position(|w| w == "is" || w == "are") else { continue };
                if verb == 0 || verb > 4 || s.text.starts_with('#') {
                    continue;
                }
                let subject = ws[..verb].join(" ");
                let q = format!("What {} {}?", ws[verb], subject);
                if seen.insert(q.to_lowercase()) {
                    out.push(q);
                }
            }
        }
        out
    }
}

/// Token positions whose words include `term`.
fn positions(tokens: &[&str], term: &str) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| words(t).iter().any(|w| w == term))
        .map(|(i, _)| i)
        .collect()
}

/// Strip surrounding punctuation; `CO2` stays a word, `(280,` becomes `280`.
fn trim_number(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

fn nearest_number(sentences: &[StubSentence], term: &str) -> Option<String> {
    let mut best: Option<(usize, String)> = None;
    for s in sentences {
        let tokens: Vec<&str> = s.text.split_whitespace().collect();
        let anchors = positions(&tokens, term);
        for (i, tok) in tokens.iter().enumerate() {
            let n = trim_number(tok);
            if !is_numeric(n) {
                continue;
            }
            if let Some(d) = anchors.iter().map(|&a| a.abs_diff(i)).min() {
                if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                    best = Some((d, n.to_string()));
                }
            }
        }
    }
    best.map(|(_, v)| v)
}

fn extract_value(prompt: &Prompt, picked: &[StubSentence]) -> ValueExtraction {
    let question_terms: Vec<String> = {
        let mut seen = BTreeSet::new();
        content_words(&prompt.question).into_iter().filter(|w| seen.insert(w.clone())).collect()
    };
    let mut freq: BTreeMap<&str, usize> = question_terms.iter().map(|t| (t.as_str(), 0)).collect();
    for g in &prompt.grounding {
        for w in content_words(&g.text) {
            if let Some(n) = freq.get_mut(w.as_str()) {
                *n += 1;
            }
        }
    }
    // Rarest first; longer terms are more specific; then question order.
    let mut ranked: Vec<(usize, &String)> = question_terms.iter().enumerate().collect();
    ranked.sort_by(|(ia, a), (ib, b)| {
        freq[a.as_str()]
            .cmp(&freq[b.as_str()])
            .then_with(|| b.chars().count().cmp(&a.chars().count()))
            .then_with(|| ia.cmp(ib))
    });
    let Some(&(_, focus)) = ranked.first() else {
        return ValueExtraction {
            value: None,
            focus_term: None,
            ambiguous: false,
        };
    };
    let selected: BTreeSet<String> = picked.iter().flat_map(|s| content_set(&s.text)).collect();
    let ambiguous = !selected.contains(focus);
    let anchor = if ambiguous {
        ranked.iter().map(|(_, t)| *t).find(|t| selected.contains(*t))
    } else {
        Some(focus)
    };
    ValueExtraction {
        value: anchor.and_then(|t| nearest_number(picked, t)),
        focus_term: Some(focus.clone()),
        ambiguous,
    }
}

impl GenerativeClient for ExtractiveStub {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, prompt: &Prompt) -> Result<Generation, ClientError> {
        let text = match prompt.template {
            TemplateId::GroundedAnswer => self.answer(prompt).text,
            TemplateId::GenerateQuestions => self.questions(prompt).join("\n"),
        };
        Ok(Generation {
            text,
            finish: Finish::Complete,
        })
    }
}

/// Returns the same text for every prompt.
#[derive(Debug, Clone)]
pub struct ScriptedClient {
    pub id: String,
    pub text: String,
}

impl ScriptedClient {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        ScriptedClient {
            id: id.into(),
            text: text.into(),
        }
    }
}

impl GenerativeClient for ScriptedClient {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, _prompt: &Prompt) -> Result<Generation, ClientError> {
        Ok(Generation {
            text: self.text.clone(),
            finish: Finish::Complete,
        })
    }
}
