//! Evaluation records: storage, five-criteria annotation, funnel analysis,
//! usage statistics, dataset exports and weekly summaries.

mod export;
mod filter;
mod funnel;
mod model;
mod stats;
mod store;

use thiserror::Error;

use crate::pipeline::Outcome;

pub use export::{
    classifier_examples, export_datasets, read_triplets, term_dictionary, triplets, ClassifierExample, ExportKind,
    ExportSummary, TermCount, Triplet,
};
pub use filter::{parse_filter, query_records, Clause, RecordFilter};
pub use funnel::{funnel_report, FunnelReport, Period, StageCount};
pub use model::{
    AuditEntry, Criterion, EvalRecord, EvalSeed, KeyTerm, VerdictPatch, VerdictValue, Verdicts,
};
pub use stats::{
    build_weekly_summary, top_themes, usage_stats, weekly_summary, BucketStats, FeedbackDistribution,
    SummaryDelivery, Theme, UsageStats, WeeklySummary, THEME_COUNT,
};
pub use store::{EvalStore, DEFAULT_SEGMENT_LINES};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("record {0} already stored")]
    DuplicateRecordId(String),
    #[error("{} responses are not evaluated", .0.as_str())]
    NotIngestible(Outcome),
    #[error("unknown record {0}")]
    UnknownRecord(String),
    #[error("workflow violation: {0}")]
    WorkflowViolation(String),
    #[error("key term {term:?} does not match question bytes {start}..{end}")]
    BadKeyTerm { term: String, start: usize, end: usize },
    #[error("bad filter {0}")]
    BadFilter(String),
    #[error("no records in the requested period")]
    EmptyPeriod,
    #[error("no records qualify for a {0:?} export")]
    NothingToExport(ExportKind),
    #[error("{path}:{line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}
