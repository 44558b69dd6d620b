//! Writer-facing checks: lint topics against the RAG content guidelines and
//! test whether a draft topic answers real user questions.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{extract_grounding_text, BlockKind, Topic};
use crate::generate::{
    build_prompt, coverage, generate_candidates, groundedness, GenerateError, GenerativeClient, GroundingDoc,
    TemplateId,
};
use crate::text::question_similarity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Guideline {
    ComplexTable,
    UnexplainedGraphic,
    MissingSummary,
    ListLeadIn,
    DeepNesting,
}

impl Guideline {
    pub fn as_str(self) -> &'static str {
        match self {
            Guideline::ComplexTable => "complex-table",
            Guideline::UnexplainedGraphic => "unexplained-graphic",
            Guideline::MissingSummary => "missing-summary",
            Guideline::ListLeadIn => "list-lead-in",
            Guideline::DeepNesting => "deep-nesting",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintFinding {
    pub guideline: Guideline,
    /// Index into `topic.blocks`.
    pub block: usize,
    pub line: usize,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LintThresholds {
    /// Ordered lists longer than this need a nearby summary.
    pub max_steps: usize,
    pub max_depth: usize,
    /// Alt text this long explains an image on its own.
    pub min_alt_words: usize,
    /// How many blocks around a long procedure are searched for a summary.
    pub summary_window: usize,
    pub summary_markers: Vec<String>,
    /// Phrases by which a paragraph points at the list after it.
    pub list_references: Vec<String>,
}

impl Default for LintThresholds {
    fn default() -> Self {
        LintThresholds {
            max_steps: 8,
            max_depth: 2,
            min_alt_words: 5,
            summary_window: 2,
            summary_markers: ["in summary", "to summarize", "this procedure"].map(String::from).to_vec(),
            list_references: ["following", "these steps", "the steps below", "listed below", "as follows"]
                .map(String::from)
                .to_vec(),
        }
    }
}

fn contains_any(text: &str, phrases: &[String]) -> bool {
    let lower = text.to_lowercase();
    phrases.iter().any(|p| lower.contains(&p.to_lowercase()))
}

/// Check a topic against the five content guidelines. Findings come out in
/// block order.
pub fn lint_topic(topic: &Topic, t: &LintThresholds) -> Vec<LintFinding> {
    let blocks = &topic.blocks;
    let mut out = Vec::new();
    let mut add = |block: usize, guideline, severity, message: String| {
        out.push(LintFinding {
            guideline,
            block,
            line: blocks[block].line,
            severity,
            message,
        })
    };
    for (i, b) in blocks.iter().enumerate() {
        match &b.kind {
            BlockKind::Table(table) => {
                if table.has_spans {
                    add(i, Guideline::ComplexTable, Severity::Error, "table has merged cells".into());
                } else if table.headers.is_empty() || table.headers.iter().any(|h| h.trim().is_empty()) {
                    add(i, Guideline::ComplexTable, Severity::Error, "table has empty column headers".into());
                }
            }
            BlockKind::Image {
                alt_text,
                adjacent_explanation: None,
            } if alt_text.split_whitespace().count() < t.min_alt_words => {
                add(
                    i,
                    Guideline::UnexplainedGraphic,
                    Severity::Warning,
                    "graphic is not explained in the surrounding text".into(),
                );
            }
            BlockKind::List { ordered, items, lead_in } => {
                if *ordered && items.len() > t.max_steps {
                    let lo = i.saturating_sub(t.summary_window);
                    let hi = (i + t.summary_window).min(blocks.len() - 1);
                    let summarized = (lo..=hi).any(|j| match &blocks[j].kind {
                        BlockKind::Paragraph { text } => contains_any(text, &t.summary_markers),
                        _ => false,
                    });
                    if !summarized {
                        add(
                            i,
                            Guideline::MissingSummary,
                            Severity::Warning,
                            format!("{} steps with no summary", items.len()),
                        );
                    }
                }
                if b.nesting_depth <= 1 {
                    let introduced = lead_in.and_then(|p| match &blocks[p].kind {
                        BlockKind::Paragraph { text } => {
                            Some(text.trim_end().ends_with(':') || contains_any(text, &t.list_references))
                        }
                        _ => None,
                    });
                    if introduced != Some(true) {
                        add(i, Guideline::ListLeadIn, Severity::Error, "list has no introducing sentence".into());
                    }
                }
                if b.nesting_depth > t.max_depth {
                    add(
                        i,
                        Guideline::DeepNesting,
                        Severity::Error,
                        format!("list nested {} levels deep", b.nesting_depth),
                    );
                }
            }
            _ => {}
        }
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum ContentError {
    #[error("at least one real question is required")]
    NoQuestions,
    #[error(transparent)]
    Generate(#[from] GenerateError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionMatch {
    pub real_question: String,
    pub best_generated: Option<String>,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub generated_questions: Vec<String>,
    /// Real questions whose best generated question reaches the threshold.
    pub matches: Vec<QuestionMatch>,
    pub unmatched_real: Vec<String>,
    /// Best pairing for every real question, matched or not.
    pub best_pairs: Vec<QuestionMatch>,
    pub threshold: f64,
    pub coverage: f64,
}

pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.6;
const CLIENT_DEADLINE: Duration = Duration::from_secs(60);

fn draft_doc(draft: &Topic) -> GroundingDoc {
    GroundingDoc {
        topic_id: draft.id.clone(),
        title: draft.title.clone(),
        text: extract_grounding_text(draft).text,
    }
}

fn run_one(prompt: &crate::generate::Prompt, client: &Arc<dyn GenerativeClient>) -> Result<String, GenerateError> {
    let candidates = generate_candidates(prompt, std::slice::from_ref(client), CLIENT_DEADLINE)?;
    Ok(candidates.into_iter().next().map(|c| c.text).unwrap_or_default())
}

/// Strip list markers such as `1.`, `-` or `*` from a generated line.
fn clean_question(line: &str) -> &str {
    let s = line.trim();
    let s = s.trim_start_matches(['-', '*', '•']).trim_start();
    let digits = s.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        if let Some(rest) = s[digits..].strip_prefix(['.', ')']) {
            return rest.trim();
        }
    }
    s
}

/// Ask `client` which questions the draft answers and compare them with
/// real user questions.
pub fn coverage_test(
    draft: &Topic,
    real_questions: &[String],
    client: &Arc<dyn GenerativeClient>,
    threshold: f64,
) -> Result<CoverageReport, ContentError> {
    if real_questions.is_empty() {
        return Err(ContentError::NoQuestions);
    }
    let prompt = build_prompt("", vec![draft_doc(draft)], TemplateId::GenerateQuestions, usize::MAX)?;
    let raw = run_one(&prompt, client)?;
    let generated: Vec<String> = raw
        .lines()
        .map(clean_question)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    Ok(compare_questions(generated, real_questions, threshold))
}

/// Pair each real question with its most similar generated question.
pub fn compare_questions(generated: Vec<String>, real_questions: &[String], threshold: f64) -> CoverageReport {
    let mut best_pairs = Vec::new();
    let mut matches = Vec::new();
    let mut unmatched_real = Vec::new();
    for real in real_questions {
        let mut best: Option<(&String, f64)> = None;
        for g in &generated {
            let s = question_similarity(real, g);
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((g, s));
            }
        }
        let pair = QuestionMatch {
            real_question: real.clone(),
            best_generated: best.map(|(g, _)| g.clone()),
            similarity: best.map_or(0.0, |(_, s)| s),
        };
        if best.is_some() && pair.similarity >= threshold {
            matches.push(pair.clone());
        } else {
            unmatched_real.push(real.clone());
        }
        best_pairs.push(pair);
    }
    let coverage = if real_questions.is_empty() {
        0.0
    } else {
        matches.len() as f64 / real_questions.len() as f64
    };
    CoverageReport {
        generated_questions: generated,
        matches,
        unmatched_real,
        best_pairs,
        threshold,
        coverage,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerCheck {
    pub question: String,
    pub answer: String,
    pub groundedness: f64,
    pub coverage: f64,
    pub answerable: bool,
}

pub const ANSWERABLE_MIN: f64 = 0.5;

/// Answer each real question from the draft alone and score the answer
/// with the same groundedness and coverage used for candidate selection.
pub fn grounded_answer_check(
    draft: &Topic,
    real_questions: &[String],
    client: &Arc<dyn GenerativeClient>,
) -> Result<Vec<AnswerCheck>, ContentError> {
    if real_questions.is_empty() {
        return Err(ContentError::NoQuestions);
    }
    let doc = draft_doc(draft);
    let mut out = Vec::with_capacity(real_questions.len());
    for q in real_questions {
        let prompt = build_prompt(q, vec![doc.clone()], TemplateId::GroundedAnswer, usize::MAX)?;
        let answer = run_one(&prompt, client)?;
        let g = groundedness(&answer, &prompt);
        let c = coverage(&answer, q);
        out.push(AnswerCheck {
            question: q.clone(),
            answerable: g >= ANSWERABLE_MIN && c >= ANSWERABLE_MIN,
            answer,
            groundedness: g,
            coverage: c,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_topic, MarkupFormat};
    use crate::generate::{ExtractiveStub, ScriptedClient};

    fn md(body: &str) -> Topic {
        parse_topic(body, MarkupFormat::Markdown, "t").unwrap()
    }

    fn guidelines(topic: &Topic) -> Vec<Guideline> {
        lint_topic(topic, &LintThresholds::default()).into_iter().map(|f| f.guideline).collect()
    }

    const DRAFT: &str = "# Credentials\n\nCredentials are the user ID and password for authenticating with the \
                         service.  Credentials are important, they prevent others using your service instance.\n";

    #[test]
    fn clean_topic_has_no_findings() {
        let t = md("# Create a project\n\nA project groups your assets.\n\nTo create a project:\n\n\
                    1. Click New project.\n2. Enter a name.\n3. Click Create.\n");
        assert_eq!(guidelines(&t), vec![]);
    }

    #[test]
    fn long_procedure_without_summary() {
        let steps: String = (1..=12).map(|i| format!("{i}. Do step {i}.\n")).collect();
        let t = md(&format!("# Setup\n\nFollow these steps:\n\n{steps}"));
        let f = lint_topic(&t, &LintThresholds::default());
        assert_eq!(f.len(), 1);
        assert_eq!((f[0].guideline, f[0].severity), (Guideline::MissingSummary, Severity::Warning));
        let t = md(&format!("# Setup\n\nIn summary, this procedure installs the agent. Follow these steps:\n\n{steps}"));
        assert_eq!(guidelines(&t), vec![]);
    }

    #[test]
    fn list_without_lead_in() {
        let t = md("# Notes\n\nSome text.\n\n- one\n- two\n");
        assert_eq!(guidelines(&t), vec![Guideline::ListLeadIn]);
        let t = md("# Notes\n\nThe following options exist.\n\n- one\n- two\n");
        assert_eq!(guidelines(&t), vec![]);
    }

    #[test]
    fn deep_nesting() {
        let t = md("# Notes\n\nOptions:\n\n- one\n  - two\n    - three\n");
        assert_eq!(guidelines(&t), vec![Guideline::DeepNesting]);
    }

    #[test]
    fn spanned_and_headerless_tables() {
        let t = parse_topic(
            "<h1>T</h1><table><tr><th>A</th><th>B</th></tr><tr><td colspan=\"2\">x</td></tr></table>",
            MarkupFormat::Html,
            "t",
        )
        .unwrap();
        assert_eq!(guidelines(&t), vec![Guideline::ComplexTable]);
        let t = parse_topic(
            "<h1>T</h1><table><tr><th>A</th><th></th></tr><tr><td>1</td><td>2</td></tr></table>",
            MarkupFormat::Html,
            "t",
        )
        .unwrap();
        assert_eq!(guidelines(&t), vec![Guideline::ComplexTable]);
    }

    #[test]
    fn unexplained_image() {
        let t = md("# T\n\n![chart](c.png)\n\nUnrelated words.\n");
        assert_eq!(guidelines(&t), vec![Guideline::UnexplainedGraphic]);
        let t = md("# T\n\n![Bar chart of monthly request volume by region](c.png)\n");
        assert_eq!(guidelines(&t), vec![]);
    }

    #[test]
    fn findings_reference_blocks() {
        let t = md("# T\n\nText.\n\n- a\n  - b\n    - c\n\n![x](y.png)\n");
        for f in lint_topic(&t, &LintThresholds::default()) {
            assert!(f.block < t.blocks.len());
            assert_eq!(f.line, t.blocks[f.block].line);
        }
    }

    #[test]
    fn identical_question_scores_one() {
        let r = compare_questions(vec!["What are credentials?".into()], &["What are credentials?".into()], 0.6);
        assert_eq!(r.matches[0].similarity, 1.0);
        assert_eq!(r.coverage, 1.0);
    }

    #[test]
    fn zero_threshold_covers_everything() {
        let r = compare_questions(vec!["What is x?".into()], &["Where is my bill?".into()], 0.0);
        assert_eq!(r.coverage, 1.0);
        let r = compare_questions(vec![], &["Where is my bill?".into()], 0.0);
        assert_eq!(r.coverage, 0.0);
    }

    #[test]
    fn generated_lines_are_cleaned() {
        let client: Arc<dyn GenerativeClient> = Arc::new(ScriptedClient::new("s", "1. What is A?\n- What is B?\n\n"));
        let r = coverage_test(&md(DRAFT), &["What is A?".into()], &client, 0.6).unwrap();
        assert_eq!(r.generated_questions, vec!["What is A?", "What is B?"]);
    }

    #[test]
    fn draft_answers_what_is_but_not_where() {
        let client: Arc<dyn GenerativeClient> = Arc::new(ExtractiveStub::default());
        let checks = grounded_answer_check(
            &md(DRAFT),
            &["What are credentials?".into(), "Where do I find my credentials?".into()],
            &client,
        )
        .unwrap();
        assert!(checks[0].answerable, "{:?}", checks[0]);
        assert!(!checks[1].answerable, "{:?}", checks[1]);
    }

    #[test]
    fn empty_question_list() {
        let client: Arc<dyn GenerativeClient> = Arc::new(ExtractiveStub::default());
        assert_eq!(coverage_test(&md(DRAFT), &[], &client, 0.6), Err(ContentError::NoQuestions));
    }
}
