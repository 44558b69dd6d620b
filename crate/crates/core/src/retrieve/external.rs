use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{sort_and_rank, HitSource, RetrieveError, TopicHit, UnavailableKind};
use crate::client::{post_json, ClientError};
use crate::corpus::Corpus;
use crate::rewrite::AugmentedQuery;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRequest {
    pub query: String,
    pub terms: Vec<String>,
    pub boosts: BTreeMap<String, f64>,
}

impl SearchRequest {
    pub fn from_query(q: &AugmentedQuery) -> Self {
        SearchRequest {
            query: q.rewritten.clone(),
            terms: q.added_terms.iter().map(|a| a.term.clone()).collect(),
            boosts: q.boost_terms.iter().map(|b| (b.term.clone(), b.weight)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawHit {
    pub topic_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub hits: Vec<RawHit>,
}

/// A search service outside this process.
pub trait SearchClient: Send + Sync {
    fn name(&self) -> &str;
    fn search(&self, request: &SearchRequest) -> Result<SearchResponse, ClientError>;
}

/// JSON over HTTP: POST the request, read `{hits: [{topic_id, score}]}`.
#[derive(Debug, Clone)]
pub struct HttpSearchClient {
    pub endpoint: String,
    pub timeout: Duration,
}

impl SearchClient for HttpSearchClient {
    fn name(&self) -> &str {
        &self.endpoint
    }

    fn search(&self, request: &SearchRequest) -> Result<SearchResponse, ClientError> {
        post_json(&self.endpoint, request, self.timeout)
    }
}

/// Query an external service and normalize its hits. Hits naming topics
/// that are not in the corpus, or carrying negative or non-finite scores,
/// make the response malformed; the valid remainder travels with the error.
pub fn external_search(
    client: &dyn SearchClient,
    q: &AugmentedQuery,
    corpus: &Corpus,
) -> Result<Vec<TopicHit>, RetrieveError> {
    let response = client.search(&SearchRequest::from_query(q)).map_err(|e| match e {
        ClientError::Malformed(message) => RetrieveError::MalformedClientResponse {
            client: client.name().to_string(),
            message,
            valid_hits: Vec::new(),
        },
        ClientError::Timeout => RetrieveError::SearchUnavailable {
            client: client.name().to_string(),
            kind: UnavailableKind::Timeout,
            message: e.to_string(),
        },
        other => RetrieveError::SearchUnavailable {
            client: client.name().to_string(),
            kind: UnavailableKind::Transport,
            message: other.to_string(),
        },
    })?;

    let mut problems = Vec::new();
    let mut hits = Vec::new();
    for raw in response.hits {
        if corpus.get(&raw.topic_id).is_none() {
            problems.push(format!("unknown topic id {:?}", raw.topic_id));
        } else if !raw.score.is_finite() || raw.score < 0.0 {
            problems.push(format!("bad score {} for {:?}", raw.score, raw.topic_id));
        } else if hits.iter().any(|h: &TopicHit| h.topic_id == raw.topic_id) {
            problems.push(format!("duplicate topic id {:?}", raw.topic_id));
        } else {
            hits.push(TopicHit {
                topic_id: raw.topic_id,
                score: raw.score,
                rank: 0,
                source: HitSource::External,
            });
        }
    }
    sort_and_rank(&mut hits);
    if problems.is_empty() {
        Ok(hits)
    } else {
        Err(RetrieveError::MalformedClientResponse {
            client: client.name().to_string(),
            message: problems.join("; "),
            valid_hits: hits,
        })
    }
}
