//! Query rewriting before search: paraphrase patterns, jargon replacement,
//! synonym expansion and concept boosts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use regex::Regex;
use serde::de::{Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RewriteError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("rule schema error at {key}: {message}")]
    Schema { key: String, message: String },
}

fn schema(key: impl Into<String>, message: impl Into<String>) -> RewriteError {
    RewriteError::Schema {
        key: key.into(),
        message: message.into(),
    }
}

/// JSON object kept as an ordered list of pairs so duplicate keys are
/// visible (a plain map keeps only the last one).
#[derive(Debug, Clone, Default)]
struct Pairs<V>(Vec<(String, V)>);

impl<'de, V: Deserialize<'de>> Deserialize<'de> for Pairs<V> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PairsVisitor<V>(std::marker::PhantomData<V>);

        impl<'de, V: Deserialize<'de>> Visitor<'de> for PairsVisitor<V> {
            type Value = Pairs<V>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, V>()? {
                    out.push((k, v));
                }
                Ok(Pairs(out))
            }
        }

        deserializer.deserialize_map(PairsVisitor(std::marker::PhantomData))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    #[serde(default)]
    jargon_map: Pairs<String>,
    #[serde(default)]
    synonyms: Pairs<Vec<String>>,
    #[serde(default)]
    boosts: Pairs<f64>,
    #[serde(default)]
    paraphrase_patterns: Pairs<String>,
}

#[derive(Debug, Clone)]
struct Paraphrase {
    re: Regex,
    template: String,
}

/// Compiled rewrite rules. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct RewriteRules {
    jargon: BTreeMap<String, String>,
    jargon_re: Option<Regex>,
    synonyms: Vec<(String, Regex, Vec<String>)>,
    boosts: Vec<(String, Regex, f64)>,
    paraphrases: Vec<Paraphrase>,
}

/// Whole-word, case-insensitive matcher for a (possibly multi-word) term.
fn term_regex(term: &str) -> Regex {
    let word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
    let lead = if word(term.chars().next()) { r"\b" } else { "" };
    let tail = if word(term.chars().last()) { r"\b" } else { "" };
    Regex::new(&format!("(?i){lead}{}{tail}", regex::escape(term))).expect("escaped term compiles")
}

fn check_unique<'a>(section: &str, keys: impl Iterator<Item = &'a String>) -> Result<(), RewriteError> {
    let mut seen = BTreeMap::new();
    for k in keys {
        if k.trim().is_empty() {
            return Err(schema(format!("{section}.{k:?}"), "empty term"));
        }
        if let Some(prev) = seen.insert(k.to_lowercase(), k.clone()) {
            return Err(schema(format!("{section}.{k}"), format!("duplicate of {prev:?}")));
        }
    }
    Ok(())
}

impl RewriteRules {
    pub fn from_json(raw: &str) -> Result<Self, RewriteError> {
        let file: RuleFile = serde_json::from_str(raw).map_err(|e| schema("$", e.to_string()))?;
        Self::compile(file)
    }

    pub fn load(path: &Path) -> Result<Self, RewriteError> {
        let raw = std::fs::read_to_string(path).map_err(|e| RewriteError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&raw)
    }

    fn compile(file: RuleFile) -> Result<Self, RewriteError> {
        check_unique("jargon_map", file.jargon_map.0.iter().map(|p| &p.0))?;
        check_unique("synonyms", file.synonyms.0.iter().map(|p| &p.0))?;
        check_unique("boosts", file.boosts.0.iter().map(|p| &p.0))?;
        check_unique("paraphrase_patterns", file.paraphrase_patterns.0.iter().map(|p| &p.0))?;

        let jargon: BTreeMap<String, String> =
            file.jargon_map.0.into_iter().map(|(k, v)| (k.to_lowercase(), v)).collect();
        let jargon_re = if jargon.is_empty() {
            None
        } else {
            // Longer terms first so "service id" wins over "id".
            let mut keys: Vec<&String> = jargon.keys().collect();
            keys.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
            let alternation = keys
                .iter()
                .map(|k| term_regex(k).as_str().trim_start_matches("(?i)").to_string())
                .collect::<Vec<_>>()
                .join("|");
            Some(Regex::new(&format!("(?i){alternation}")).expect("escaped terms compile"))
        };

        let synonyms = file
            .synonyms
            .0
            .into_iter()
            .map(|(k, v)| {
                let re = term_regex(&k);
                (k, re, v)
            })
            .collect();

        let mut boosts = Vec::new();
        for (term, weight) in file.boosts.0 {
            if !weight.is_finite() || weight < 1.0 {
                return Err(schema(format!("boosts.{term}"), format!("weight {weight} is below 1.0")));
            }
            let re = term_regex(&term);
            boosts.push((term, re, weight));
        }

        let mut paraphrases = Vec::new();
        for (pattern, template) in file.paraphrase_patterns.0 {
            let re = Regex::new(&pattern)
                .map_err(|e| schema(format!("paraphrase_patterns.{pattern}"), e.to_string()))?;
            paraphrases.push(Paraphrase { re, template });
        }

        Ok(RewriteRules {
            jargon,
            jargon_re,
            synonyms,
            boosts,
            paraphrases,
        })
    }

    pub fn synonym_groups(&self) -> usize {
        self.synonyms.len()
    }

    pub fn jargon_terms(&self) -> usize {
        self.jargon.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermSource {
    Synonym,
    JargonMap,
    Boost,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddedTerm {
    pub term: String,
    pub source: TermSource,
    /// The term of the original question that caused the addition.
    pub trigger: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostTerm {
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedQuery {
    pub original: String,
    pub rewritten: String,
    pub added_terms: Vec<AddedTerm>,
    pub boost_terms: Vec<BoostTerm>,
}

impl AugmentedQuery {
    /// A query with no rewriting applied.
    pub fn plain(question: &str) -> Self {
        AugmentedQuery {
            original: question.to_string(),
            rewritten: question.to_string(),
            added_terms: Vec::new(),
            boost_terms: Vec::new(),
        }
    }
}

fn apply_paraphrase(question: &str, rules: &RewriteRules) -> String {
    // The single longest match across all patterns is rewritten; earlier
    // matches and earlier patterns win ties.
    let mut best: Option<(&Paraphrase, regex::Captures)> = None;
    for p in &rules.paraphrases {
        if let Some(caps) = p.re.captures(question) {
            let m = caps.get(0).expect("group 0");
            let better = match &best {
                None => true,
                Some((_, b)) => {
                    let bm = b.get(0).expect("group 0");
                    m.len() > bm.len() || (m.len() == bm.len() && m.start() < bm.start())
                }
            };
            if better && !m.is_empty() {
                best = Some((p, caps));
            }
        }
    }
    let Some((p, caps)) = best else {
        return question.to_string();
    };
    let m = caps.get(0).expect("group 0");
    let mut expanded = String::new();
    caps.expand(&p.template, &mut expanded);
    format!("{}{}{}", &question[..m.start()], expanded, &question[m.end()..])
}

/// Rewrite a screened English question. Every rule runs at most once.
pub fn augment_query(question: &str, rules: &RewriteRules) -> AugmentedQuery {
    let mut added_terms: Vec<AddedTerm> = Vec::new();
    let original_lower = question.to_lowercase();

    let paraphrased = apply_paraphrase(question, rules);

    let rewritten = match &rules.jargon_re {
        Some(re) => re
            .replace_all(&paraphrased, |caps: &regex::Captures| {
                let matched = caps.get(0).expect("group 0").as_str();
                let replacement = rules.jargon[&matched.to_lowercase()].clone();
                if original_lower.contains(&matched.to_lowercase())
                    && !added_terms.iter().any(|a| a.term == replacement && a.source == TermSource::JargonMap)
                {
                    added_terms.push(AddedTerm {
                        term: replacement.clone(),
                        source: TermSource::JargonMap,
                        trigger: matched.to_string(),
                    });
                }
                replacement
            })
            .into_owned(),
        None => paraphrased,
    };
    let rewritten = if rewritten.trim().is_empty() {
        question.to_string()
    } else {
        rewritten
    };

    let rewritten_lower = rewritten.to_lowercase();
    for (_, re, alternatives) in &rules.synonyms {
        let Some(m) = re.find(question) else { continue };
        for alt in alternatives {
            let alt_lower = alt.to_lowercase();
            let present = term_regex(alt).is_match(&rewritten_lower)
                || added_terms.iter().any(|a| a.term.to_lowercase() == alt_lower);
            if !present {
                added_terms.push(AddedTerm {
                    term: alt.clone(),
                    source: TermSource::Synonym,
                    trigger: m.as_str().to_string(),
                });
            }
        }
    }

    let boost_terms = rules
        .boosts
        .iter()
        .filter(|(_, re, _)| re.is_match(&rewritten) || added_terms.iter().any(|a| re.is_match(&a.term)))
        .map(|(term, _, weight)| BoostTerm {
            term: term.clone(),
            weight: *weight,
        })
        .collect();

    AugmentedQuery {
        original: question.to_string(),
        rewritten,
        added_terms,
        boost_terms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synonym_group() {
        let rules = RewriteRules::from_json(r#"{"synonyms":{"login":["sign in"]}}"#).unwrap();
        assert_eq!(rules.synonym_groups(), 1);
        let q = augment_query("how do I login?", &rules);
        assert_eq!(q.rewritten, "how do I login?");
        assert_eq!(
            q.added_terms,
            vec![AddedTerm {
                term: "sign in".into(),
                source: TermSource::Synonym,
                trigger: "login".into()
            }]
        );
    }

    #[test]
    fn weight_below_one_is_rejected() {
        let err = RewriteRules::from_json(r#"{"boosts":{"credentials":0.5}}"#).unwrap_err();
        assert!(matches!(err, RewriteError::Schema { ref key, .. } if key == "boosts.credentials"), "{err:?}");
    }

    #[test]
    fn duplicate_jargon_keys_are_rejected() {
        let err = RewriteRules::from_json(r#"{"jargon_map":{"creds":"a","Creds":"b"}}"#).unwrap_err();
        assert!(matches!(err, RewriteError::Schema { ref key, .. } if key == "jargon_map.Creds"), "{err:?}");
    }

    #[test]
    fn jargon_is_whole_word() {
        let rules = RewriteRules::from_json(r#"{"jargon_map":{"creds":"service credentials"}}"#).unwrap();
        let q = augment_query("how do I make a creds?", &rules);
        assert_eq!(q.rewritten, "how do I make a service credentials?");
        assert_eq!(q.added_terms[0].source, TermSource::JargonMap);
        assert_eq!(augment_query("credsx", &rules).rewritten, "credsx");
    }

    #[test]
    fn no_rules_is_identity() {
        let rules = RewriteRules::from_json(r#"{"jargon_map":{"vm":"virtual server"}}"#).unwrap();
        let q = augment_query("what is a bucket?", &rules);
        assert_eq!(q, AugmentedQuery::plain("what is a bucket?"));
    }

    #[test]
    fn paraphrase_uses_longest_match() {
        let rules = RewriteRules::from_json(
            r#"{"paraphrase_patterns":{"(?i)how come (.+)":"why $1","(?i)how come":"why"}}"#,
        )
        .unwrap();
        assert_eq!(augment_query("how come it fails", &rules).rewritten, "why it fails");
    }

    #[test]
    fn boosts_tag_present_terms() {
        let rules = RewriteRules::from_json(r#"{"boosts":{"credentials":2.0,"billing":3.0}}"#).unwrap();
        let q = augment_query("where are my credentials", &rules);
        assert_eq!(
            q.boost_terms,
            vec![BoostTerm {
                term: "credentials".into(),
                weight: 2.0
            }]
        );
    }

    #[test]
    fn unknown_section_is_a_schema_error() {
        assert!(RewriteRules::from_json(r#"{"synonym":{}}"#).is_err());
    }
}
