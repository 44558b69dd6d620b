use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::model::{Criterion, EvalRecord, VerdictValue};
use super::EvalError;

/// Half-open time window `[from, to)`; a missing bound is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Period {
    pub from: Option<DateTime<Utc>>,
    pub to: Option<DateTime<Utc>>,
}

impl Period {
    pub fn all() -> Self {
        Period::default()
    }

    pub fn between(from: DateTime<Utc>, to: DateTime<Utc>) -> Self {
        Period {
            from: Some(from),
            to: Some(to),
        }
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.from.is_none_or(|f| t >= f) && self.to.is_none_or(|e| t < e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: Criterion,
    pub count: usize,
    /// Share of the previous stage (of `total` for the first stage).
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunnelReport {
    pub period: Period,
    /// Records counted in the funnel.
    pub total: usize,
    /// Records in the period left out because a verdict needed to place
    /// them was unset.
    pub excluded: usize,
    pub stages: Vec<StageCount>,
    /// `1 - article_exists / valid`; `None` when no record is valid.
    pub content_gap_rate: Option<f64>,
    /// `1 - search_success / article_exists`; `None` when no article exists.
    pub search_failure_rate: Option<f64>,
}

impl FunnelReport {
    pub fn count(&self, stage: Criterion) -> usize {
        self.stages.iter().find(|s| s.stage == stage).map_or(0, |s| s.count)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// How far down the funnel a record got, or `None` when its first non-yes
/// verdict is unset and its position is unknown.
fn depth(r: &EvalRecord) -> Option<usize> {
    for (i, c) in Criterion::ALL.iter().enumerate() {
        match r.verdicts.get(*c) {
            VerdictValue::Yes => continue,
            VerdictValue::No => return Some(i),
            VerdictValue::Unset => return None,
        }
    }
    Some(Criterion::ALL.len())
}

/// Stage counts over the five criteria. Each stage counts the records that
/// passed it and every stage before it.
pub fn funnel_report<'a>(
    records: impl IntoIterator<Item = &'a EvalRecord>,
    period: Period,
) -> Result<FunnelReport, EvalError> {
    let mut in_period = 0;
    let mut depths = Vec::new();
    for r in records {
        if !period.contains(r.created_at) {
            continue;
        }
        in_period += 1;
        if let Some(d) = depth(r) {
            depths.push(d);
        }
    }
    if in_period == 0 {
        return Err(EvalError::EmptyPeriod);
    }
    let total = depths.len();
    let mut stages = Vec::with_capacity(Criterion::ALL.len());
    let mut previous = total;
    for (i, c) in Criterion::ALL.iter().enumerate() {
        let count = depths.iter().filter(|&&d| d > i).count();
        stages.push(StageCount {
            stage: *c,
            count,
            rate: ratio(count, previous),
        });
        previous = count;
    }
    let valid = stages[0].count;
    let article = stages[2].count;
    let search = stages[3].count;
    Ok(FunnelReport {
        period,
        total,
        excluded: in_period - total,
        stages,
        content_gap_rate: (valid > 0).then(|| 1.0 - ratio(article, valid)),
        search_failure_rate: (article > 0).then(|| 1.0 - ratio(search, article)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalstore::{EvalSeed, Verdicts};
    use crate::pipeline::Outcome;

    fn record(id: usize, v: Verdicts) -> EvalRecord {
        let mut r = EvalRecord::from_seed(EvalSeed {
            record_id: format!("r{id}"),
            question: "q".into(),
            language: "en".into(),
            qclass: None,
            answer_html: None,
            answer_text: String::new(),
            links: vec![],
            outcome: Outcome::Answered,
            created_at: DateTime::UNIX_EPOCH,
        });
        r.verdicts = v;
        r
    }

    #[test]
    fn all_yes() {
        let rs: Vec<_> = (0..4).map(|i| record(i, Verdicts::all(VerdictValue::Yes))).collect();
        let f = funnel_report(&rs, Period::all()).unwrap();
        assert!(f.stages.iter().all(|s| s.rate == 1.0 && s.count == 4));
        assert_eq!(f.content_gap_rate, Some(0.0));
        assert_eq!(f.search_failure_rate, Some(0.0));
    }

    #[test]
    fn unset_records_are_excluded() {
        let mut partial = Verdicts::all(VerdictValue::Yes);
        partial.search_success = VerdictValue::Unset;
        let rs = vec![record(0, Verdicts::all(VerdictValue::Yes)), record(1, partial)];
        let f = funnel_report(&rs, Period::all()).unwrap();
        assert_eq!((f.total, f.excluded), (1, 1));
    }

    #[test]
    fn empty_period() {
        let rs = vec![record(0, Verdicts::default())];
        let later = Period::between(DateTime::UNIX_EPOCH + chrono::Duration::days(1), Utc::now());
        assert!(matches!(funnel_report(&rs, later), Err(EvalError::EmptyPeriod)));
    }
}
