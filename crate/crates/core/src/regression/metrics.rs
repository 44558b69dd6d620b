//! Answer similarity metrics. All scores are in [0, 1]; two empty texts
//! score 1 on every metric.

use std::collections::HashMap;

use crate::text::{content_words, index_tokens};

pub const BLEU_MAX_ORDER: usize = 4;

/// Lowercase, keep alphanumeric runs, single spaces.
pub fn normalize_answer(text: &str) -> String {
    index_tokens(text).join(" ")
}

pub fn exact_match(candidate: &str, reference: &str) -> f64 {
    if normalize_answer(candidate) == normalize_answer(reference) {
        1.0
    } else {
        0.0
    }
}

fn counts<T: std::hash::Hash + Eq + Clone>(items: impl IntoIterator<Item = T>) -> HashMap<T, usize> {
    let mut m = HashMap::new();
    for i in items {
        *m.entry(i).or_insert(0) += 1;
    }
    m
}

fn overlap<T: std::hash::Hash + Eq>(a: &HashMap<T, usize>, b: &HashMap<T, usize>) -> usize {
    a.iter().map(|(k, n)| (*n).min(b.get(k).copied().unwrap_or(0))).sum()
}

/// F1 over the multiset of content words.
pub fn token_f1(candidate: &str, reference: &str) -> f64 {
    let c = content_words(candidate);
    let r = content_words(reference);
    if c.is_empty() && r.is_empty() {
        return 1.0;
    }
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let common = overlap(&counts(c.iter().cloned()), &counts(r.iter().cloned())) as f64;
    if common == 0.0 {
        return 0.0;
    }
    let p = common / c.len() as f64;
    let rec = common / r.len() as f64;
    2.0 * p * rec / (p + rec)
}

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    counts(tokens.windows(n))
}

/// BLEU up to 4-grams with a brevity penalty. An order with no matching
/// n-gram scores `1 / (candidate n-grams + 1)` instead of zero. Orders
/// longer than the candidate are left out of the geometric mean.
pub fn bleu(candidate: &str, reference: &str) -> f64 {
    let c = index_tokens(candidate);
    let r = index_tokens(reference);
    if c.is_empty() && r.is_empty() {
        return 1.0;
    }
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let orders = BLEU_MAX_ORDER.min(c.len());
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let cn = ngrams(&c, n);
        let total = c.len() + 1 - n;
        let matched = overlap(&cn, &ngrams(&r, n));
        let p = if matched == 0 {
            1.0 / (total as f64 + 1.0)
        } else {
            matched as f64 / total as f64
        };
        log_sum += p.ln();
    }
    let bp = if c.len() > r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    };
    bp * (log_sum / orders as f64).exp()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        prev = cur;
    }
    prev[b.len()]
}

/// ROUGE-L F1 from the longest common token subsequence.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let c = index_tokens(candidate);
    let r = index_tokens(reference);
    if c.is_empty() && r.is_empty() {
        return 1.0;
    }
    let lcs = lcs_len(&c, &r) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / c.len() as f64;
    let rec = lcs / r.len() as f64;
    2.0 * p * rec / (p + rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_scores_one() {
        let t = "280 parts per million during the interglacial periods.";
        assert_eq!(exact_match(t, t), 1.0);
        assert_eq!(token_f1(t, t), 1.0);
        assert!((bleu(t, t) - 1.0).abs() < 1e-12);
        assert_eq!(rouge_l(t, t), 1.0);
    }

    #[test]
    fn disjoint_texts() {
        assert_eq!(token_f1("alpha beta", "gamma delta"), 0.0);
        assert_eq!(rouge_l("alpha beta", "gamma delta"), 0.0);
        assert!(bleu("alpha beta", "gamma delta") > 0.0);
    }

    #[test]
    fn exact_match_ignores_case_and_punctuation() {
        assert_eq!(exact_match("280 ppm.", "280  PPM"), 1.0);
    }

    #[test]
    fn rouge_hand_computed() {
        // LCS of "a b c d" and "a c d e" is "a c d": P = R = 3/4.
        assert!((rouge_l("a b c d", "a c d e") - 0.75).abs() < 1e-12);
    }
}
