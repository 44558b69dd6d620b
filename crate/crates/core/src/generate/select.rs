use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Candidate, Finish, GenerateError, Prompt};
use crate::text::{content_set, content_words, sentences};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionWeights {
    pub groundedness: f64,
    pub coverage: f64,
    pub brevity: f64,
    /// Answer length in characters at which brevity reaches zero.
    pub brevity_knee: usize,
}

impl Default for SelectionWeights {
    fn default() -> Self {
        SelectionWeights {
            groundedness: 0.5,
            coverage: 0.35,
            brevity: 0.15,
            brevity_knee: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScores {
    pub model_id: String,
    pub groundedness: f64,
    pub coverage: f64,
    pub brevity: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSentence {
    pub topic_id: String,
    /// Byte span in that topic's grounding text.
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSelection {
    pub chosen: Candidate,
    /// One entry per non-error candidate, in candidate order.
    pub scores: Vec<CandidateScores>,
    pub evidence_sentences: Vec<EvidenceSentence>,
}

/// Adjacent content-word pairs, never crossing a sentence boundary.
pub fn content_bigrams(text: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for s in sentences(text) {
        let words = content_words(&s.text);
        for pair in words.windows(2) {
            out.push((pair[0].clone(), pair[1].clone()));
        }
    }
    out
}

fn grounding_bigrams(prompt: &Prompt) -> BTreeSet<(String, String)> {
    prompt.grounding.iter().flat_map(|g| content_bigrams(&g.text)).collect()
}

fn grounding_words(prompt: &Prompt) -> BTreeSet<String> {
    prompt.grounding.iter().flat_map(|g| content_set(&g.text)).collect()
}

/// Share of the candidate's content bigrams found in the grounding. Text
/// too short for bigrams falls back to content words.
pub fn groundedness(text: &str, prompt: &Prompt) -> f64 {
    let bigrams = content_bigrams(text);
    if !bigrams.is_empty() {
        let known = grounding_bigrams(prompt);
        let hits = bigrams.iter().filter(|b| known.contains(*b)).count();
        return hits as f64 / bigrams.len() as f64;
    }
    let words = content_words(text);
    if words.is_empty() {
        return 0.0;
    }
    let known = grounding_words(prompt);
    words.iter().filter(|w| known.contains(*w)).count() as f64 / words.len() as f64
}

/// Share of the question's content words that the candidate uses. A
/// question with no content words is fully covered.
pub fn coverage(text: &str, question: &str) -> f64 {
    let wanted = content_set(question);
    if wanted.is_empty() {
        return 1.0;
    }
    let have = content_set(text);
    wanted.iter().filter(|w| have.contains(*w)).count() as f64 / wanted.len() as f64
}

fn brevity(text: &str, knee: usize) -> f64 {
    let len = text.chars().count() as f64;
    (1.0 - len / knee.max(1) as f64).clamp(0.0, 1.0)
}

pub fn score_candidate(c: &Candidate, prompt: &Prompt, w: &SelectionWeights) -> CandidateScores {
    let groundedness = groundedness(&c.text, prompt);
    let coverage = coverage(&c.text, &prompt.question);
    let brevity = brevity(&c.text, w.brevity_knee);
    CandidateScores {
        model_id: c.model_id.clone(),
        groundedness,
        coverage,
        brevity,
        total: w.groundedness * groundedness + w.coverage * coverage + w.brevity * brevity,
    }
}

/// Grounding sentences sharing a content bigram with `text`, or a content
/// word when `text` has no bigrams.
fn evidence_for(text: &str, prompt: &Prompt) -> Vec<EvidenceSentence> {
    let bigrams: BTreeSet<(String, String)> = content_bigrams(text).into_iter().collect();
    let words = content_set(text);
    let mut out = Vec::new();
    for g in &prompt.grounding {
        for s in sentences(&g.text) {
            let hit = if bigrams.is_empty() {
                content_set(&s.text).iter().any(|w| words.contains(w))
            } else {
                content_bigrams(&s.text).iter().any(|b| bigrams.contains(b))
            };
            if hit {
                out.push(EvidenceSentence {
                    topic_id: g.topic_id.clone(),
                    start: s.start,
                    end: s.end,
                    text: s.text,
                });
            }
        }
    }
    out
}

const EPSILON: f64 = 1e-12;

/// Pick the highest-scoring candidate. Equal totals go to the lower
/// priority number, then to the faster response.
pub fn select_best(
    candidates: &[Candidate],
    prompt: &Prompt,
    weights: &SelectionWeights,
) -> Result<AnswerSelection, GenerateError> {
    let viable: Vec<&Candidate> = candidates
        .iter()
        .filter(|c| c.finish != Finish::Error && !c.text.trim().is_empty())
        .collect();
    if viable.is_empty() {
        return Err(GenerateError::NoViableCandidate);
    }
    let scores: Vec<CandidateScores> = viable.iter().map(|c| score_candidate(c, prompt, weights)).collect();
    let mut best = 0;
    for i in 1..viable.len() {
        let (a, b) = (&scores[i], &scores[best]);
        let better = if (a.total - b.total).abs() > EPSILON {
            a.total > b.total
        } else {
            (viable[i].priority, viable[i].latency_ms) < (viable[best].priority, viable[best].latency_ms)
        };
        if better {
            best = i;
        }
    }
    let chosen = viable[best].clone();
    let evidence_sentences = evidence_for(&chosen.text, prompt);
    Ok(AnswerSelection {
        chosen,
        scores,
        evidence_sentences,
    })
}
