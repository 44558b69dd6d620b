use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::funnel::{funnel_report, FunnelReport, Period};
use super::model::EvalRecord;
use super::EvalError;
use crate::client::JsonSink;
use crate::pipeline::{LogLine, Outcome, Rating};
use crate::text::content_words;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub period: Period,
    pub responses: usize,
    pub questions: usize,
    /// `questions / responses`; 0 for an empty bucket.
    pub nl_question_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackDistribution {
    pub helpful: f64,
    pub somewhat_helpful: f64,
    pub unhelpful: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageStats {
    pub buckets: Vec<BucketStats>,
    pub feedback_counts: BTreeMap<Rating, usize>,
    /// `None` when there was no feedback at all.
    pub feedback_distribution: Option<FeedbackDistribution>,
    /// Feedback events per answered response; 0 with no answers.
    pub feedback_rate: f64,
}

/// Question share per bucket and feedback statistics over the whole log.
pub fn usage_stats(lines: &[LogLine], buckets: &[Period]) -> UsageStats {
    let buckets = buckets
        .iter()
        .map(|p| {
            let mut responses = 0;
            let mut questions = 0;
            for line in lines {
                if let LogLine::Response(r) = line {
                    if p.contains(r.ts) {
                        responses += 1;
                        if r.is_question == Some(true) {
                            questions += 1;
                        }
                    }
                }
            }
            BucketStats {
                period: *p,
                responses,
                questions,
                nl_question_share: if responses == 0 {
                    0.0
                } else {
                    questions as f64 / responses as f64
                },
            }
        })
        .collect();

    let mut feedback_counts: BTreeMap<Rating, usize> =
        [Rating::Helpful, Rating::SomewhatHelpful, Rating::Unhelpful].into_iter().map(|r| (r, 0)).collect();
    let mut answered = 0;
    for line in lines {
        match line {
            LogLine::Feedback(f) => *feedback_counts.entry(f.rating).or_default() += 1,
            LogLine::Response(r) if r.outcome.is_answer() => answered += 1,
            LogLine::Response(_) => {}
        }
    }
    let total_feedback: usize = feedback_counts.values().sum();
    let share = |r: Rating| feedback_counts[&r] as f64 / total_feedback as f64;
    let feedback_distribution = (total_feedback > 0).then(|| FeedbackDistribution {
        helpful: share(Rating::Helpful),
        somewhat_helpful: share(Rating::SomewhatHelpful),
        unhelpful: share(Rating::Unhelpful),
    });
    UsageStats {
        buckets,
        feedback_distribution,
        feedback_rate: if answered == 0 {
            0.0
        } else {
            total_feedback as f64 / answered as f64
        },
        feedback_counts,
    }
}

pub const THEME_COUNT: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theme {
    pub term: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklySummary {
    pub period: Period,
    pub records: usize,
    pub outcomes: BTreeMap<Outcome, usize>,
    pub themes: Vec<Theme>,
    /// Absent when no record in the period has enough verdicts.
    pub funnel: Option<FunnelReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryDelivery {
    pub summary: WeeklySummary,
    pub posted: bool,
    /// Written when the sink failed.
    pub local_copy: Option<PathBuf>,
}

/// The most frequent question content words; counts each word once per
/// question.
pub fn top_themes<'a>(records: impl IntoIterator<Item = &'a EvalRecord>, k: usize) -> Vec<Theme> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        let mut words = content_words(&r.question);
        words.sort();
        words.dedup();
        for w in words {
            *counts.entry(w).or_default() += 1;
        }
    }
    let mut themes: Vec<Theme> = counts.into_iter().map(|(term, count)| Theme { term, count }).collect();
    themes.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.term.cmp(&b.term)));
    themes.truncate(k);
    themes
}

pub fn build_weekly_summary(records: &[&EvalRecord], period: Period) -> WeeklySummary {
    let in_period: Vec<&EvalRecord> = records.iter().copied().filter(|r| period.contains(r.created_at)).collect();
    let mut outcomes = BTreeMap::new();
    for r in &in_period {
        *outcomes.entry(r.outcome).or_insert(0) += 1;
    }
    let funnel = funnel_report(in_period.iter().copied(), period).ok().filter(|f| f.total > 0);
    WeeklySummary {
        period,
        records: in_period.len(),
        outcomes,
        themes: top_themes(in_period.iter().copied(), THEME_COUNT),
        funnel,
    }
}

/// Build the summary and post it. When the sink fails the payload is
/// written under `fallback_dir` instead.
pub fn weekly_summary(
    records: &[&EvalRecord],
    period: Period,
    sink: &dyn JsonSink,
    fallback_dir: &Path,
) -> Result<SummaryDelivery, EvalError> {
    let summary = build_weekly_summary(records, period);
    let payload = serde_json::to_value(&summary).expect("summary serializes");
    match sink.post(&payload) {
        Ok(()) => Ok(SummaryDelivery {
            summary,
            posted: true,
            local_copy: None,
        }),
        Err(e) => {
            log::warn!("weekly summary sink {} failed: {e}", sink.name());
            std::fs::create_dir_all(fallback_dir)?;
            let stamp = period.from.map_or_else(|| "all".to_string(), |f| f.format("%Y%m%d").to_string());
            let path = fallback_dir.join(format!("weekly-summary-{stamp}.json"));
            std::fs::write(&path, serde_json::to_vec_pretty(&payload).expect("summary serializes"))?;
            Ok(SummaryDelivery {
                summary,
                posted: false,
                local_copy: Some(path),
            })
        }
    }
}
