//! Batch regression over question-topic-answer triplets.

mod metrics;

use std::path::Path;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::pipeline::{AskRequest, Outcome, Pipeline};

pub use metrics::{bleu, exact_match, normalize_answer, rouge_l, token_f1, BLEU_MAX_ORDER};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressionCase {
    pub question: String,
    pub expected_topic_ids: Vec<String>,
    pub expected_answer: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("{file}:{line}: {message}")]
    CaseParse { file: String, line: usize, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("no regression cases")]
    NoCases,
}

/// Read a JSONL file of cases. Blank lines are skipped.
pub fn load_cases(path: &Path) -> Result<Vec<RegressionCase>, RegressionError> {
    parse_cases(&std::fs::read_to_string(path)?, &path.display().to_string())
}

pub fn parse_cases(text: &str, file: &str) -> Result<Vec<RegressionCase>, RegressionError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| RegressionError::CaseParse {
            file: file.to_string(),
            line: i + 1,
            message,
        };
        let case: RegressionCase = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if case.expected_topic_ids.is_empty() {
            return Err(err("expected_topic_ids is empty".into()));
        }
        out.push(case);
    }
    if out.is_empty() {
        return Err(RegressionError::NoCases);
    }
    Ok(out)
}

/// Optional minimum scores; a case below any of them fails.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Gates {
    pub token_f1: Option<f64>,
    pub bleu: Option<f64>,
    pub rouge_l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionOptions {
    pub parallelism: usize,
    pub gates: Gates,
}

impl Default for RegressionOptions {
    fn default() -> Self {
        RegressionOptions {
            parallelism: 4,
            gates: Gates::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub index: usize,
    pub question: String,
    pub tags: Vec<String>,
    pub outcome: Outcome,
    /// Any expected topic among the final hits (or FAQ links).
    pub retrieval_hit: bool,
    pub hit_ids: Vec<String>,
    pub answer_text: String,
    pub exact_match: f64,
    pub token_f1: f64,
    pub bleu: f64,
    pub rouge_l: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub cases: usize,
    pub failed: usize,
    pub hit_rate: f64,
    pub exact_match: f64,
    pub token_f1: f64,
    pub bleu: f64,
    pub rouge_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub generated_at: DateTime<Utc>,
    /// Hash of the pipeline configuration, corpus content and client ids.
    pub config_hash: String,
    pub aggregates: Aggregates,
    pub cases: Vec<CaseResult>,
}

impl RegressionReport {
    pub fn all_passed(&self) -> bool {
        self.aggregates.failed == 0
    }
}

fn run_case(index: usize, case: &RegressionCase, pipeline: &Pipeline, gates: &Gates) -> CaseResult {
    let resp = pipeline.answer_question(&AskRequest::new(case.question.clone()));
    let mut hit_ids: Vec<String> = resp.hits.iter().map(|h| h.topic_id.clone()).collect();
    if resp.outcome == Outcome::FaqAnswered {
        hit_ids.extend(resp.links.iter().map(|l| l.topic_id.clone()));
    }
    let retrieval_hit = case.expected_topic_ids.iter().any(|id| hit_ids.contains(id));
    let answer_text = resp.answer_text.unwrap_or_default();
    let expected = &case.expected_answer;
    let token_f1 = token_f1(&answer_text, expected);
    let bleu = bleu(&answer_text, expected);
    let rouge_l = rouge_l(&answer_text, expected);
    let gate = |value: f64, min: Option<f64>| min.is_none_or(|m| value >= m);
    let passed = retrieval_hit
        && resp.outcome.is_answer()
        && gate(token_f1, gates.token_f1)
        && gate(bleu, gates.bleu)
        && gate(rouge_l, gates.rouge_l);
    CaseResult {
        index,
        question: case.question.clone(),
        tags: case.tags.clone(),
        outcome: resp.outcome,
        retrieval_hit,
        hit_ids,
        exact_match: exact_match(&answer_text, expected),
        answer_text,
        token_f1,
        bleu,
        rouge_l,
        passed,
    }
}

fn mean(results: &[CaseResult], f: impl Fn(&CaseResult) -> f64) -> f64 {
    if results.is_empty() {
        0.0
    } else {
        results.iter().map(f).sum::<f64>() / results.len() as f64
    }
}

pub fn aggregate(results: &[CaseResult]) -> Aggregates {
    Aggregates {
        cases: results.len(),
        failed: results.iter().filter(|r| !r.passed).count(),
        hit_rate: mean(results, |r| if r.retrieval_hit { 1.0 } else { 0.0 }),
        exact_match: mean(results, |r| r.exact_match),
        token_f1: mean(results, |r| r.token_f1),
        bleu: mean(results, |r| r.bleu),
        rouge_l: mean(results, |r| r.rouge_l),
    }
}

/// Fingerprint of what a regression run depends on.
pub fn config_hash(pipeline: &Pipeline) -> String {
    let snap = pipeline.snapshot();
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(pipeline.config()).unwrap_or_default());
    let mut topics: Vec<(&str, &str)> = snap
        .corpus
        .topics()
        .iter()
        .map(|t| (t.id.as_str(), t.content_hash.as_str()))
        .collect();
    topics.sort();
    for (id, hash) in topics {
        h.update(id.as_bytes());
        h.update(hash.as_bytes());
    }
    for id in pipeline.generator_ids() {
        h.update(id.as_bytes());
    }
    hex::encode(h.finalize())
}

/// Run every case end to end with bounded parallelism. Results keep case
/// order.
pub fn run_regression(
    cases: &[RegressionCase],
    pipeline: &Pipeline,
    options: &RegressionOptions,
) -> Result<RegressionReport, RegressionError> {
    if cases.is_empty() {
        return Err(RegressionError::NoCases);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism.max(1))
        .build()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    let results: Vec<CaseResult> = pool.install(|| {
        cases
            .par_iter()
            .enumerate()
            .map(|(i, c)| run_case(i, c, pipeline, &options.gates))
            .collect()
    });
    Ok(RegressionReport {
        generated_at: Utc::now(),
        config_hash: config_hash(pipeline),
        aggregates: aggregate(&results),
        cases: results,
    })
}
