//! Shared tokenization helpers.
//!
//! Two tokenizers live here and they are deliberately different:
//!
//! * [`index_tokens`] splits on every non-alphanumeric character. It feeds the
//!   lexical index, so `pre-industrial` becomes `pre` + `industrial`.
//! * [`words`] keeps internal hyphens and apostrophes, so `pre-industrial`
//!   stays one word. It feeds question matching, answer scoring, and
//!   highlighting, where the user's terms should survive intact.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

/// Function words ignored when comparing questions and answers.
///
/// Personal pronouns (`i`, `my`, `you`, ...) are kept on purpose: "where do I
/// find my credentials" and "what are credentials" ask different things.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "some", "any", "each", "every", "all",
    "is", "are", "was", "were", "be", "been", "being", "am", "do", "does", "did", "doing", "have",
    "has", "had", "can", "could", "should", "would", "will", "shall", "may", "might", "must",
    "what", "where", "when", "why", "how", "which", "who", "whom", "whose", "of", "in", "on", "at",
    "to", "for", "with", "by", "from", "up", "about", "into", "over", "under", "as", "than", "out",
    "off", "and", "or", "but", "if", "then", "so", "nor", "it", "its", "there", "here", "s", "t",
    "also", "just", "very",
];

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(&word)
}

fn word_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[\p{L}\p{N}]+(?:[-'’][\p{L}\p{N}]+)*").unwrap())
}

/// A word together with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Lowercased words with byte spans. A trailing possessive `'s` is dropped.
pub fn words_with_spans(text: &str) -> Vec<Word> {
    word_re()
        .find_iter(text)
        .map(|m| {
            let mut w = m.as_str().to_lowercase().replace('’', "'");
            if let Some(stem) = w.strip_suffix("'s") {
                w = stem.to_string();
            }
            Word {
                text: w,
                start: m.start(),
                end: m.end(),
            }
        })
        .collect()
}

pub fn words(text: &str) -> Vec<String> {
    words_with_spans(text).into_iter().map(|w| w.text).collect()
}

/// Words with stopwords removed, in order of appearance (duplicates kept).
pub fn content_words(text: &str) -> Vec<String> {
    words(text).into_iter().filter(|w| !is_stopword(w)).collect()
}

pub fn content_set(text: &str) -> BTreeSet<String> {
    content_words(text).into_iter().collect()
}

/// Lowercased alphanumeric runs.
pub fn index_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// [`index_tokens`] without stopwords; the lexical index tokenizer.
pub fn search_tokens(text: &str) -> Vec<String> {
    index_tokens(text).into_iter().filter(|t| !is_stopword(t)).collect()
}

/// Cosine similarity of two token sets: `|A ∩ B| / sqrt(|A| |B|)`.
pub fn set_cosine(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let shared = a.intersection(b).count() as f64;
    shared / ((a.len() as f64) * (b.len() as f64)).sqrt()
}

/// Token-set cosine over lowercased, stopword-stripped words.
pub fn question_similarity(a: &str, b: &str) -> f64 {
    set_cosine(&content_set(a), &content_set(b))
}

/// Trim and collapse every whitespace run to a single space.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// A sentence with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Split text into sentences. Line breaks always end a sentence; inside a
/// line a `.`, `?` or `!` followed by whitespace does.
pub fn sentences(text: &str) -> Vec<Sentence> {
    let mut out = Vec::new();
    let mut line_start = 0;
    for line in text.split('\n') {
        let bytes = line.as_bytes();
        let mut start = 0;
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            let terminal = matches!(c, b'.' | b'?' | b'!');
            let followed_by_space = i + 1 < bytes.len() && bytes[i + 1].is_ascii_whitespace();
            if terminal && followed_by_space {
                push_sentence(&mut out, line, line_start, start, i + 1);
                start = i + 1;
            }
            i += 1;
        }
        push_sentence(&mut out, line, line_start, start, bytes.len());
        line_start += line.len() + 1;
    }
    out
}

fn push_sentence(out: &mut Vec<Sentence>, line: &str, base: usize, from: usize, to: usize) {
    let raw = &line[from..to];
    let lead = raw.len() - raw.trim_start().len();
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return;
    }
    let start = base + from + lead;
    out.push(Sentence {
        text: trimmed.to_string(),
        start,
        end: start + trimmed.len(),
    });
}

/// True when the word looks like a number (`280`, `400,000`, `3.5`).
pub fn is_numeric(word: &str) -> bool {
    let mut digits = 0;
    for c in word.chars() {
        if c.is_ascii_digit() {
            digits += 1;
        } else if c != ',' && c != '.' {
            return false;
        }
    }
    digits > 0 && word.starts_with(|c: char| c.is_ascii_digit())
}

/// HTML-escape text for the answer markup.
pub fn escape_html(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_keep_hyphenated_terms() {
        assert_eq!(
            words("What is the pre-industrial level of CO2 on Earth's surface?"),
            vec!["what", "is", "the", "pre-industrial", "level", "of", "co2", "on", "earth", "surface"]
        );
    }

    #[test]
    fn index_tokens_split_hyphens() {
        assert_eq!(index_tokens("pre-industrial CO2"), vec!["pre", "industrial", "co2"]);
    }

    #[test]
    fn content_words_drop_function_words_only() {
        assert_eq!(
            content_words("Where do I find my credentials?"),
            vec!["i", "find", "my", "credentials"]
        );
    }

    #[test]
    fn cosine_of_identical_sets_is_one() {
        assert!((question_similarity("how do i find my credentials", "Where do I find my credentials?") - 1.0).abs() < 1e-12);
        assert_eq!(question_similarity("", "credentials"), 0.0);
    }

    #[test]
    fn sentence_split_keeps_numbers_intact() {
        let s = sentences("About 3.5 units. Next one? Yes\nNew line");
        let texts: Vec<_> = s.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, vec!["About 3.5 units.", "Next one?", "Yes", "New line"]);
        let src = "About 3.5 units. Next one? Yes\nNew line";
        for s in &s {
            assert_eq!(&src[s.start..s.end], s.text);
        }
    }

    #[test]
    fn numeric_words() {
        assert!(is_numeric("280"));
        assert!(is_numeric("400,000"));
        assert!(!is_numeric("co2"));
        assert!(!is_numeric(","));
    }
}
