//! Grounded prompts, multi-model fan-out and answer selection.

mod http;
mod select;
mod stub;

use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::ClientError;

pub use http::HttpGenerativeClient;
pub use select::{
    content_bigrams, coverage, groundedness, select_best, AnswerSelection, CandidateScores, EvidenceSentence,
    SelectionWeights,
};
pub use stub::{ExtractiveStub, ScriptedClient, StubAnswer, StubSentence, ValueExtraction};

#[derive(Debug, Error, PartialEq)]
pub enum GenerateError {
    #[error("a prompt needs at least one grounding topic")]
    EmptyGrounding,
    #[error("prompt needs about {estimate} tokens, budget is {budget}")]
    ContextBudgetExceeded { estimate: usize, budget: usize },
    #[error("no generative client was configured")]
    NoClients,
    #[error("every model failed: {0}")]
    AllModelsFailed(String),
    #[error("no candidate has text to choose from")]
    NoViableCandidate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingDoc {
    pub topic_id: String,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateId {
    /// Answer the question from the topics.
    GroundedAnswer,
    /// List questions the topics answer.
    GenerateQuestions,
}

pub const ANSWER_INSTRUCTION: &str = "Answer only from the provided topics, concisely.";
pub const QUESTIONS_INSTRUCTION: &str =
    "List questions that the provided topics answer, one per line. Use only information in the topics.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub question: String,
    pub grounding: Vec<GroundingDoc>,
    pub template: TemplateId,
    pub rendered: String,
    pub token_estimate: usize,
}

/// Whitespace tokens times 1.3, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    let n = text.split_whitespace().count();
    (n * 13).div_ceil(10)
}

fn render(question: &str, grounding: &[GroundingDoc], template: TemplateId) -> String {
    let mut out = String::new();
    out.push_str(match template {
        TemplateId::GroundedAnswer => ANSWER_INSTRUCTION,
        TemplateId::GenerateQuestions => QUESTIONS_INSTRUCTION,
    });
    out.push_str("\n\n");
    for (i, g) in grounding.iter().enumerate() {
        out.push_str(&format!("<topic n=\"{}\" id=\"{}\" title=\"{}\">\n", i + 1, g.topic_id, g.title));
        out.push_str(&g.text);
        out.push_str("\n</topic>\n\n");
    }
    if template == TemplateId::GroundedAnswer {
        out.push_str("Question: ");
        out.push_str(question);
        out.push_str("\nAnswer:");
    } else {
        out.push_str("Questions:");
    }
    out
}

/// Render a prompt. Grounding that does not fit `budget` tokens is an
/// error; dropping topics is left to the caller.
pub fn build_prompt(
    question: &str,
    grounding: Vec<GroundingDoc>,
    template: TemplateId,
    budget: usize,
) -> Result<Prompt, GenerateError> {
    if grounding.is_empty() {
        return Err(GenerateError::EmptyGrounding);
    }
    let rendered = render(question, &grounding, template);
    let token_estimate = estimate_tokens(&rendered);
    if token_estimate > budget {
        return Err(GenerateError::ContextBudgetExceeded {
            estimate: token_estimate,
            budget,
        });
    }
    Ok(Prompt {
        question: question.to_string(),
        grounding,
        template,
        rendered,
        token_estimate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Finish {
    Complete,
    Truncated,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub text: String,
    pub finish: Finish,
}

/// A text generator behind some API.
pub trait GenerativeClient: Send + Sync {
    fn id(&self) -> &str;
    fn generate(&self, prompt: &Prompt) -> Result<Generation, ClientError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub model_id: String,
    pub text: String,
    pub latency_ms: u64,
    pub finish: Finish,
    /// Registration position; lower wins ties.
    pub priority: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Candidate {
    fn failed(model_id: &str, priority: usize, latency_ms: u64, error: String) -> Self {
        Candidate {
            model_id: model_id.to_string(),
            text: String::new(),
            latency_ms,
            finish: Finish::Error,
            priority,
            error: Some(error),
        }
    }
}

/// Call every client in parallel and wait at most `deadline`. Clients that
/// fail or miss the deadline produce error candidates; the result is in
/// registration order.
pub fn generate_candidates(
    prompt: &Prompt,
    clients: &[Arc<dyn GenerativeClient>],
    deadline: Duration,
) -> Result<Vec<Candidate>, GenerateError> {
    if clients.is_empty() {
        return Err(GenerateError::NoClients);
    }
    let started = Instant::now();
    let prompt = Arc::new(prompt.clone());
    let (tx, rx) = mpsc::channel();
    for (i, client) in clients.iter().enumerate() {
        let tx = tx.clone();
        let client = Arc::clone(client);
        let prompt = Arc::clone(&prompt);
        thread::spawn(move || {
            let t0 = Instant::now();
            let result = client.generate(&prompt);
            // The receiver may be gone after the deadline.
            let _ = tx.send((i, result, t0.elapsed()));
        });
    }
    drop(tx);

    let mut slots: Vec<Option<Candidate>> = vec![None; clients.len()];
    let mut pending = clients.len();
    while pending > 0 {
        let left = deadline.saturating_sub(started.elapsed());
        match rx.recv_timeout(left) {
            Ok((i, result, elapsed)) => {
                let id = clients[i].id();
                let latency_ms = elapsed.as_millis() as u64;
                slots[i] = Some(match result {
                    Ok(g) if g.finish == Finish::Error => {
                        Candidate::failed(id, i, latency_ms, "client reported an error".into())
                    }
                    Ok(g) => Candidate {
                        model_id: id.to_string(),
                        text: g.text,
                        latency_ms,
                        finish: g.finish,
                        priority: i,
                        error: None,
                    },
                    Err(e) => Candidate::failed(id, i, latency_ms, e.to_string()),
                });
                pending -= 1;
            }
            Err(_) => break,
        }
    }
    let waited = started.elapsed().as_millis() as u64;
    let candidates: Vec<Candidate> = slots
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.unwrap_or_else(|| Candidate::failed(clients[i].id(), i, waited, "deadline exceeded".into())))
        .collect();
    if candidates.iter().all(|c| c.finish == Finish::Error) {
        let reasons = candidates
            .iter()
            .map(|c| format!("{}: {}", c.model_id, c.error.as_deref().unwrap_or("error")))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(GenerateError::AllModelsFailed(reasons));
    }
    Ok(candidates)
}
