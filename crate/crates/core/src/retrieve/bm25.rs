use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{RetrieveError, TopicMeta};
use crate::corpus::{extract_grounding_text, Corpus};
use crate::text::search_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    /// How many times title tokens are emitted into the document.
    pub title_repeat: usize,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: 1.2,
            b: 0.75,
            title_repeat: 2,
        }
    }
}

/// In-memory BM25 index over topic grounding text. Immutable after build.
#[derive(Debug, Clone)]
pub struct LexicalIndex {
    params: Bm25Params,
    docs: Vec<TopicMeta>,
    doc_len: Vec<usize>,
    avgdl: f64,
    postings: BTreeMap<String, Vec<(usize, u32)>>,
}

/// Tokens that represent a topic in the index: the title, repeated, then
/// the grounding text.
pub fn document_tokens(title: &str, grounding: &str, title_repeat: usize) -> Vec<String> {
    let title_tokens = search_tokens(title);
    let mut out = Vec::new();
    for _ in 0..title_repeat {
        out.extend(title_tokens.iter().cloned());
    }
    out.extend(search_tokens(grounding));
    out
}

pub fn build_index(corpus: &Corpus) -> Result<LexicalIndex, RetrieveError> {
    build_index_with(corpus, Bm25Params::default())
}

pub fn build_index_with(corpus: &Corpus, params: Bm25Params) -> Result<LexicalIndex, RetrieveError> {
    if corpus.is_empty() {
        return Err(RetrieveError::EmptyCorpus);
    }
    let mut docs = Vec::with_capacity(corpus.len());
    let mut doc_len = Vec::with_capacity(corpus.len());
    let mut postings: BTreeMap<String, Vec<(usize, u32)>> = BTreeMap::new();
    for (i, topic) in corpus.topics().iter().enumerate() {
        let tokens = document_tokens(&topic.title, &extract_grounding_text(topic).text, params.title_repeat);
        doc_len.push(tokens.len());
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for t in tokens {
            *tf.entry(t).or_default() += 1;
        }
        for (term, n) in tf {
            postings.entry(term).or_default().push((i, n));
        }
        docs.push(TopicMeta::of(topic));
    }
    let avgdl = doc_len.iter().sum::<usize>() as f64 / doc_len.len() as f64;
    Ok(LexicalIndex {
        params,
        docs,
        doc_len,
        avgdl,
        postings,
    })
}

impl LexicalIndex {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub(crate) fn meta(&self, doc: usize) -> &TopicMeta {
        &self.docs[doc]
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.docs.len() as f64;
        let df = df as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// BM25 of `text` against every document, summed over its distinct
    /// index tokens. Indexed by document position.
    pub fn score_text(&self, text: &str) -> Vec<f64> {
        let mut scores = vec![0.0; self.docs.len()];
        let distinct: BTreeSet<String> = search_tokens(text).into_iter().collect();
        let Bm25Params { k1, b, .. } = self.params;
        for term in distinct {
            let Some(list) = self.postings.get(&term) else { continue };
            let idf = self.idf(list.len());
            for &(doc, tf) in list {
                let tf = tf as f64;
                let norm = 1.0 - b + b * self.doc_len[doc] as f64 / self.avgdl;
                scores[doc] += idf * tf * (k1 + 1.0) / (tf + k1 * norm);
            }
        }
        scores
    }

    /// BM25 of `text` keyed by topic id.
    pub fn score_by_id(&self, text: &str) -> BTreeMap<String, f64> {
        self.score_text(text)
            .into_iter()
            .enumerate()
            .map(|(i, s)| (self.docs[i].id.clone(), s))
            .collect()
    }

    /// Whether the document shares at least one index token with `text`.
    pub(crate) fn overlaps(&self, doc: usize, tokens: &BTreeSet<String>) -> bool {
        tokens
            .iter()
            .any(|t| self.postings.get(t).is_some_and(|l| l.iter().any(|&(d, _)| d == doc)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_topic, MarkupFormat};

    fn corpus() -> Corpus {
        let a = parse_topic("# Keys\n\nService credentials hold an API key.", MarkupFormat::Markdown, "a").unwrap();
        let b = parse_topic("# Regions\n\nPick a region near your users.", MarkupFormat::Markdown, "b").unwrap();
        Corpus::from_topics(vec![a, b]).unwrap()
    }

    #[test]
    fn document_count() {
        assert_eq!(build_index(&corpus()).unwrap().len(), 2);
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(
            build_index(&Corpus::from_topics(vec![]).unwrap()),
            Err(RetrieveError::EmptyCorpus)
        ));
    }

    #[test]
    fn rebuild_is_deterministic() {
        let c = corpus();
        let one = build_index(&c).unwrap().score_text("api key region");
        let two = build_index(&c).unwrap().score_text("api key region");
        assert_eq!(one, two);
    }

    #[test]
    fn title_is_counted_twice() {
        // Title "Keys" plus heading "# Keys" in the body: three occurrences.
        let idx = build_index(&corpus()).unwrap();
        let keys = idx.postings.get("keys").unwrap();
        assert_eq!(keys, &vec![(0, 3)]);
    }
}
