//! Topic retrieval: the built-in BM25 index, the external search contract,
//! and hit post-processing.

mod bm25;
mod external;

use std::collections::BTreeSet;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Topic};
use crate::rewrite::AugmentedQuery;
use crate::text::search_tokens;

pub use bm25::{build_index, build_index_with, document_tokens, Bm25Params, LexicalIndex};
pub use external::{external_search, HttpSearchClient, RawHit, SearchClient, SearchRequest, SearchResponse};

#[derive(Debug, Error, PartialEq)]
pub enum RetrieveError {
    #[error("cannot index an empty corpus")]
    EmptyCorpus,
    #[error("search client {client} unavailable ({kind}): {message}")]
    SearchUnavailable {
        client: String,
        kind: UnavailableKind,
        message: String,
    },
    #[error("search client {client} sent a malformed response: {message}")]
    MalformedClientResponse {
        client: String,
        message: String,
        /// Hits that passed validation.
        valid_hits: Vec<TopicHit>,
    },
    #[error("bad filter {0:?}: expected field=value with field one of language, id")]
    BadFilter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnavailableKind {
    Timeout,
    Transport,
}

impl std::fmt::Display for UnavailableKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UnavailableKind::Timeout => "timeout",
            UnavailableKind::Transport => "transport",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HitSource {
    Builtin,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicHit {
    pub topic_id: String,
    pub score: f64,
    pub rank: usize,
    pub source: HitSource,
}

/// Metadata that filters can test.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicMeta {
    pub id: String,
    pub language: String,
    pub last_updated: DateTime<Utc>,
}

impl TopicMeta {
    pub fn of(topic: &Topic) -> Self {
        TopicMeta {
            id: topic.id.clone(),
            language: topic.language.clone(),
            last_updated: topic.last_updated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "field", content = "value")]
pub enum Filter {
    /// Primary language subtag, compared case-insensitively.
    Language(String),
    Id(String),
}

impl Filter {
    pub fn matches(&self, meta: &TopicMeta) -> bool {
        match self {
            Filter::Language(lang) => {
                let primary = meta.language.split(['-', '_']).next().unwrap_or("");
                primary.eq_ignore_ascii_case(lang) || meta.language.eq_ignore_ascii_case(lang)
            }
            Filter::Id(id) => &meta.id == id,
        }
    }
}

impl FromStr for Filter {
    type Err = RetrieveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (field, value) = s.split_once('=').ok_or_else(|| RetrieveError::BadFilter(s.into()))?;
        let value = value.trim().to_string();
        match field.trim() {
            "language" | "lang" => Ok(Filter::Language(value)),
            "id" | "topic_id" => Ok(Filter::Id(value)),
            _ => Err(RetrieveError::BadFilter(s.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchPolicy {
    pub max_hits: usize,
    pub min_score: f64,
    pub filters: Vec<Filter>,
}

impl Default for SearchPolicy {
    fn default() -> Self {
        SearchPolicy {
            max_hits: 5,
            min_score: 0.0,
            filters: Vec::new(),
        }
    }
}

/// Sort by score descending with topic id as the tie-break, then number
/// ranks from 1.
pub fn sort_and_rank(hits: &mut [TopicHit]) {
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.topic_id.cmp(&b.topic_id)));
    for (i, h) in hits.iter_mut().enumerate() {
        h.rank = i + 1;
    }
}

/// Total BM25 score of an augmented query for every indexed topic.
pub fn query_scores(index: &LexicalIndex, q: &AugmentedQuery) -> Vec<f64> {
    let mut total = index.score_text(&q.rewritten);
    for added in &q.added_terms {
        for (t, s) in total.iter_mut().zip(index.score_text(&added.term)) {
            *t += s;
        }
    }
    for boost in &q.boost_terms {
        for (t, s) in total.iter_mut().zip(index.score_text(&boost.term)) {
            *t += (boost.weight - 1.0) * s;
        }
    }
    total
}

/// Search the built-in index. Topics sharing no token with the query are
/// never returned.
pub fn search(index: &LexicalIndex, q: &AugmentedQuery, policy: &SearchPolicy) -> Vec<TopicHit> {
    let mut query_tokens: BTreeSet<String> = search_tokens(&q.rewritten).into_iter().collect();
    for a in &q.added_terms {
        query_tokens.extend(search_tokens(&a.term));
    }
    let scores = query_scores(index, q);
    let mut hits: Vec<TopicHit> = scores
        .into_iter()
        .enumerate()
        .filter(|&(doc, _)| index.overlaps(doc, &query_tokens))
        .filter(|&(doc, _)| policy.filters.iter().all(|f| f.matches(index.meta(doc))))
        .filter(|&(_, score)| score >= policy.min_score)
        .map(|(doc, score)| TopicHit {
            topic_id: index.meta(doc).id.clone(),
            score,
            rank: 0,
            source: HitSource::Builtin,
        })
        .collect();
    sort_and_rank(&mut hits);
    hits.truncate(policy.max_hits.max(1));
    hits
}

/// Optional second-stage scorer applied after filtering.
pub trait Rescorer: Send + Sync {
    fn name(&self) -> &str;
    fn rescore(&self, hit: &TopicHit, topic: Option<&Topic>) -> f64;
}

#[derive(Debug, Default, Clone)]
pub struct IdentityRescorer;

impl Rescorer for IdentityRescorer {
    fn name(&self) -> &str {
        "identity"
    }

    fn rescore(&self, hit: &TopicHit, _topic: Option<&Topic>) -> f64 {
        hit.score
    }
}

/// Multiplies the score by `0.5 ^ (age_days / half_life_days)`.
#[derive(Debug, Clone)]
pub struct RecencyRescorer {
    pub now: DateTime<Utc>,
    pub half_life_days: f64,
}

impl RecencyRescorer {
    pub fn factor(&self, updated: DateTime<Utc>) -> f64 {
        let age_days = (self.now - updated).num_seconds().max(0) as f64 / 86_400.0;
        0.5f64.powf(age_days / self.half_life_days)
    }
}

impl Rescorer for RecencyRescorer {
    fn name(&self) -> &str {
        "recency"
    }

    fn rescore(&self, hit: &TopicHit, topic: Option<&Topic>) -> f64 {
        match topic {
            Some(t) => hit.score * self.factor(t.last_updated),
            None => hit.score,
        }
    }
}

/// Filter, optionally re-score, re-sort and truncate. Hits whose topic is
/// missing from the corpus fail every metadata filter.
pub fn postprocess_hits(
    hits: Vec<TopicHit>,
    policy: &SearchPolicy,
    corpus: &Corpus,
    rescorer: Option<&dyn Rescorer>,
) -> Vec<TopicHit> {
    let mut out: Vec<TopicHit> = hits
        .into_iter()
        .filter(|h| {
            policy.filters.is_empty()
                || corpus
                    .get(&h.topic_id)
                    .is_some_and(|t| policy.filters.iter().all(|f| f.matches(&TopicMeta::of(t))))
        })
        .filter(|h| h.score >= policy.min_score)
        .collect();
    if let Some(r) = rescorer {
        for h in &mut out {
            h.score = r.rescore(h, corpus.get(&h.topic_id));
        }
    }
    sort_and_rank(&mut out);
    out.truncate(policy.max_hits.max(1));
    out
}
