//! Synthetic corpora for the benchmarks.

use topicrag::corpus::{parse_topic, Corpus, MarkupFormat};

const WORDS: &[&str] = &[
    "account", "api", "key", "project", "region", "billing", "plan", "storage", "bucket", "credential",
    "token", "quota", "limit", "service", "instance", "network", "firewall", "backup", "restore", "upgrade",
    "invoice", "password", "user", "role", "policy", "log", "metric", "alert", "dashboard", "endpoint",
];

/// `n` Markdown topics of roughly `words` words each, generated from a
/// fixed linear congruential sequence so every run sees the same corpus.
pub fn synthetic_corpus(n: usize, words: usize) -> Corpus {
    let mut state: u64 = 0x2545_f491_4f6c_dd1d;
    let mut next = || {
        state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
        (state >> 33) as usize
    };
    let topics = (0..n)
        .map(|i| {
            let mut body = format!("# Topic {i} {}\n\n", WORDS[i % WORDS.len()]);
            for w in 0..words {
                body.push_str(WORDS[next() % WORDS.len()]);
                body.push(if w % 12 == 11 { '.' } else { ' ' });
                if w % 60 == 59 {
                    body.push_str("\n\n");
                }
            }
            body.push_str(".\n");
            parse_topic(&body, MarkupFormat::Markdown, &format!("t{i}")).expect("synthetic topic parses")
        })
        .collect();
    Corpus::from_topics(topics).expect("ids are unique")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic() {
        let a = synthetic_corpus(5, 100);
        let b = synthetic_corpus(5, 100);
        assert_eq!(a.len(), 5);
        for (x, y) in a.topics().iter().zip(b.topics()) {
            assert_eq!(x.content_hash, y.content_hash);
        }
    }
}
