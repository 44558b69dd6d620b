use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{EvalRecord, VerdictValue};
use super::EvalError;
use crate::classify::QuestionType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportKind {
    Triplets,
    ClassifierTraining,
    TermDictionary,
}

impl std::str::FromStr for ExportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "triplets" => Ok(ExportKind::Triplets),
            "classifier-training" => Ok(ExportKind::ClassifierTraining),
            "term-dictionary" => Ok(ExportKind::TermDictionary),
            _ => Err(format!("unknown export kind {s:?}")),
        }
    }
}

/// Question, grounding topics and approved answer; the regression-case
/// source format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub question: String,
    pub topic_ids: Vec<String>,
    pub answer_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierExample {
    pub text: String,
    pub is_question: bool,
    pub qtype: QuestionType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermCount {
    pub term: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub kind: ExportKind,
    pub written: usize,
    /// Records that did not qualify for this kind.
    pub excluded: usize,
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), EvalError> {
    let mut out = BufWriter::new(File::create(path)?);
    for item in items {
        writeln!(out, "{}", serde_json::to_string(item).expect("export rows serialize"))?;
    }
    out.flush()?;
    Ok(())
}

pub fn triplets<'a>(records: impl IntoIterator<Item = &'a EvalRecord>) -> (Vec<Triplet>, usize) {
    let mut excluded = 0;
    let mut out = Vec::new();
    for r in records {
        if r.verdicts.good_answer == VerdictValue::Yes && !r.links.is_empty() {
            out.push(Triplet {
                question: r.question.clone(),
                topic_ids: r.grounding_topic_ids(),
                answer_text: r.answer_text.clone(),
            });
        } else {
            excluded += 1;
        }
    }
    (out, excluded)
}

pub fn classifier_examples<'a>(records: impl IntoIterator<Item = &'a EvalRecord>) -> (Vec<ClassifierExample>, usize) {
    let mut excluded = 0;
    let mut out = Vec::new();
    for r in records {
        match &r.qclass {
            // A reviewer saying the class is wrong disqualifies the label.
            Some(c) if r.verdicts.correct_class != VerdictValue::No => out.push(ClassifierExample {
                text: r.question.clone(),
                is_question: c.is_question,
                qtype: c.qtype,
            }),
            _ => excluded += 1,
        }
    }
    (out, excluded)
}

/// Annotated key terms, lowercased, by count descending then term.
pub fn term_dictionary<'a>(records: impl IntoIterator<Item = &'a EvalRecord>) -> (Vec<TermCount>, usize) {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut excluded = 0;
    for r in records {
        if r.key_terms.is_empty() {
            excluded += 1;
        }
        for kt in &r.key_terms {
            *counts.entry(kt.term.to_lowercase()).or_default() += 1;
        }
    }
    let mut out: Vec<TermCount> = counts.into_iter().map(|(term, count)| TermCount { term, count }).collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.term.cmp(&b.term)));
    (out, excluded)
}

/// Write one dataset as JSON Lines.
pub fn export_datasets<'a>(
    records: impl IntoIterator<Item = &'a EvalRecord>,
    kind: ExportKind,
    path: &Path,
) -> Result<ExportSummary, EvalError> {
    let (written, excluded) = match kind {
        ExportKind::Triplets => {
            let (rows, excluded) = triplets(records);
            if rows.is_empty() {
                return Err(EvalError::NothingToExport(kind));
            }
            write_lines(path, &rows)?;
            (rows.len(), excluded)
        }
        ExportKind::ClassifierTraining => {
            let (rows, excluded) = classifier_examples(records);
            if rows.is_empty() {
                return Err(EvalError::NothingToExport(kind));
            }
            write_lines(path, &rows)?;
            (rows.len(), excluded)
        }
        ExportKind::TermDictionary => {
            let (rows, excluded) = term_dictionary(records);
            if rows.is_empty() {
                return Err(EvalError::NothingToExport(kind));
            }
            write_lines(path, &rows)?;
            (rows.len(), excluded)
        }
    };
    Ok(ExportSummary {
        kind,
        written,
        excluded,
    })
}

pub fn read_triplets(path: &Path) -> Result<Vec<Triplet>, EvalError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EvalError::Corrupt {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
