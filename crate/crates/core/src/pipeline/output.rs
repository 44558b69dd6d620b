//! Answer markup: a small HTML subset of `p`, `strong`, `a`, `ul` and `li`.

use std::collections::BTreeSet;

use thiserror::Error;

use super::types::Link;
use crate::generate::EvidenceSentence;
use crate::guard::{screen_text, translate, FindingCategory, GuardError, GuardPolicy, LanguageTag, TranslatorClient, Verdict};
use crate::rewrite::AugmentedQuery;
use crate::text::{content_set, content_words, escape_html, words_with_spans};

/// Question content words that occur both in the answer and in the
/// evidence sentences, in order of first appearance in the answer.
pub fn highlight_terms(answer: &str, q: &AugmentedQuery, evidence: &[EvidenceSentence]) -> Vec<String> {
    let question = content_set(&q.original);
    let evidence_words: BTreeSet<String> = evidence.iter().flat_map(|e| content_set(&e.text)).collect();
    let mut out: Vec<String> = Vec::new();
    for w in content_words(answer) {
        if question.contains(&w) && evidence_words.contains(&w) && !out.contains(&w) {
            out.push(w);
        }
    }
    out
}

fn mark_line(line: &str, bold: &BTreeSet<String>) -> String {
    let mut out = String::new();
    let mut cursor = 0;
    for w in words_with_spans(line) {
        if bold.contains(&w.text) {
            out.push_str(&escape_html(&line[cursor..w.start]));
            out.push_str("<strong>");
            out.push_str(&escape_html(&line[w.start..w.end]));
            out.push_str("</strong>");
            cursor = w.end;
        }
    }
    out.push_str(&escape_html(&line[cursor..]));
    out
}

/// Render answer text and grounding links. Each non-blank line becomes a
/// paragraph; highlighted words are wrapped in `strong`.
pub fn render_answer_html(answer: &str, highlighted: &[String], links: &[Link]) -> String {
    let bold: BTreeSet<String> = highlighted.iter().cloned().collect();
    let mut html = String::new();
    for line in answer.lines().map(str::trim).filter(|l| !l.is_empty()) {
        html.push_str("<p>");
        html.push_str(&mark_line(line, &bold));
        html.push_str("</p>");
    }
    if !links.is_empty() {
        html.push_str("<ul>");
        for l in links {
            html.push_str(&format!(
                "<li><a href=\"{}\">{}</a></li>",
                escape_html(&l.url),
                escape_html(&l.title)
            ));
        }
        html.push_str("</ul>");
    }
    html
}

/// Check that `html` only uses the answer subset and that tags balance.
pub fn is_answer_markup(html: &str) -> bool {
    const ALLOWED: [&str; 5] = ["p", "strong", "a", "ul", "li"];
    let mut stack: Vec<String> = Vec::new();
    let mut rest = html;
    while let Some(open) = rest.find('<') {
        let Some(close) = rest[open..].find('>') else { return false };
        let tag = &rest[open + 1..open + close];
        rest = &rest[open + close + 1..];
        if let Some(name) = tag.strip_prefix('/') {
            if stack.pop().as_deref() != Some(name) {
                return false;
            }
        } else {
            let name = tag.split_whitespace().next().unwrap_or("");
            if !ALLOWED.contains(&name) {
                return false;
            }
            if name == "a" && !tag[1..].trim_start().starts_with("href=\"") {
                return false;
            }
            stack.push(name.to_string());
        }
    }
    stack.is_empty()
}

#[derive(Debug, Error, PartialEq)]
pub enum OutputError {
    #[error("generated text was rejected by the guard: {0:?}")]
    Rejected(Vec<FindingCategory>),
    #[error(transparent)]
    Translation(#[from] GuardError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostProcessed {
    pub answer_html: String,
    /// Guarded English text, before translation.
    pub answer_text: String,
    /// Translated plain text, as rendered.
    pub localized_text: String,
    /// Categories redacted from the generated text.
    pub findings: Vec<FindingCategory>,
}

/// Guard the generated text, translate it back to the asker's language and
/// render it with links.
pub fn postprocess_output(
    answer: &str,
    highlighted: &[String],
    links: &[Link],
    language: &LanguageTag,
    translator: &dyn TranslatorClient,
    policy: &GuardPolicy,
) -> Result<PostProcessed, OutputError> {
    let screened = screen_text(answer, policy);
    if screened.verdict == Verdict::Rejected {
        return Err(OutputError::Rejected(screened.categories()));
    }
    let localized = translate(&screened.text, &LanguageTag::english(), language, translator)?;
    Ok(PostProcessed {
        answer_html: render_answer_html(&localized.text, highlighted, links),
        findings: screened.categories(),
        answer_text: screened.text,
        localized_text: localized.text,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guard::DictionaryTranslator;
    use std::collections::BTreeMap;

    fn evidence(text: &str) -> EvidenceSentence {
        EvidenceSentence {
            topic_id: "t".into(),
            start: 0,
            end: text.len(),
            text: text.into(),
        }
    }

    #[test]
    fn shared_term_is_highlighted() {
        let q = AugmentedQuery::plain("where are my credentials?");
        let ev = [evidence("Your credentials are on the service page.")];
        assert_eq!(
            highlight_terms("Your credentials are on the service page.", &q, &ev),
            vec!["credentials"]
        );
        assert!(highlight_terms("Nothing shared.", &q, &ev).is_empty());
    }

    #[test]
    fn markup_subset() {
        let links = [Link {
            topic_id: "creds".into(),
            title: "Credentials & keys".into(),
            url: "/topics/creds".into(),
        }];
        let html = render_answer_html("Your Credentials <b>here</b>.", &["credentials".into()], &links);
        assert_eq!(
            html,
            "<p>Your <strong>Credentials</strong> &lt;b&gt;here&lt;/b&gt;.</p>\
             <ul><li><a href=\"/topics/creds\">Credentials &amp; keys</a></li></ul>"
        );
        assert!(is_answer_markup(&html));
        assert!(!is_answer_markup("<p><script>x</script></p>"));
        assert!(!is_answer_markup("<p>open"));
    }

    #[test]
    fn email_in_output_is_redacted() {
        let out = postprocess_output(
            "Write to ops@example.com for access.",
            &[],
            &[],
            &LanguageTag::english(),
            &crate::guard::IdentityTranslator,
            &GuardPolicy::default(),
        )
        .unwrap();
        assert!(out.answer_html.contains("[EMAIL]"), "{}", out.answer_html);
        assert!(!out.answer_html.contains("ops@example.com"));
        assert_eq!(out.findings, vec![FindingCategory::PiiEmail]);
    }

    #[test]
    fn translated_before_markup() {
        let mut en_es = BTreeMap::new();
        en_es.insert("project".to_string(), "proyecto".to_string());
        let mut pairs = BTreeMap::new();
        pairs.insert("en-es".to_string(), en_es);
        let tr = DictionaryTranslator::from_pairs(pairs);
        let out = postprocess_output(
            "project",
            &[],
            &[],
            &LanguageTag::new("es", 0.9),
            &tr,
            &GuardPolicy::default(),
        )
        .unwrap();
        assert_eq!(out.answer_html, "<p>proyecto</p>");
        assert_eq!(out.answer_text, "project");
    }
}
