use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GuardError, LanguageTag};
use crate::client::ClientError;

/// A machine-translation backend.
pub trait TranslatorClient: Send + Sync {
    fn name(&self) -> &str;
    fn translate(&self, text: &str, from: &str, to: &str) -> Result<String, ClientError>;
}

/// Returns text unchanged.
#[derive(Debug, Default, Clone)]
pub struct IdentityTranslator;

impl TranslatorClient for IdentityTranslator {
    fn name(&self) -> &str {
        "identity"
    }

    fn translate(&self, text: &str, _from: &str, _to: &str) -> Result<String, ClientError> {
        Ok(text.to_string())
    }
}

/// Word-for-word translation from a JSON file of the form
/// `{"es-en": {"hola": "hello"}, "en-es": {...}}`. Unknown words pass
/// through unchanged.
#[derive(Debug, Default, Clone)]
pub struct DictionaryTranslator {
    pairs: BTreeMap<String, BTreeMap<String, String>>,
}

impl DictionaryTranslator {
    pub fn load(path: &Path) -> Result<Self, std::io::Error> {
        let raw = std::fs::read_to_string(path)?;
        let pairs = serde_json::from_str(&raw)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(DictionaryTranslator::from_pairs(pairs))
    }

    pub fn from_pairs(pairs: BTreeMap<String, BTreeMap<String, String>>) -> Self {
        let pairs = pairs
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().map(|(w, t)| (w.to_lowercase(), t)).collect()))
            .collect();
        DictionaryTranslator { pairs }
    }
}

impl TranslatorClient for DictionaryTranslator {
    fn name(&self) -> &str {
        "dictionary"
    }

    fn translate(&self, text: &str, from: &str, to: &str) -> Result<String, ClientError> {
        let key = format!("{from}-{to}");
        let Some(map) = self.pairs.get(&key) else {
            return Err(ClientError::Unavailable(format!("no dictionary for {key}")));
        };
        let mut out = String::with_capacity(text.len());
        let mut cursor = 0;
        for w in crate::text::words_with_spans(text) {
            out.push_str(&text[cursor..w.start]);
            let original = &text[w.start..w.end];
            match map.get(&original.to_lowercase()) {
                Some(t) if original.chars().next().is_some_and(char::is_uppercase) => {
                    let mut c = t.chars();
                    if let Some(first) = c.next() {
                        out.extend(first.to_uppercase());
                        out.push_str(c.as_str());
                    }
                }
                Some(t) => out.push_str(t),
                None => out.push_str(original),
            }
            cursor = w.end;
        }
        out.push_str(&text[cursor..]);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Translated {
    pub text: String,
    /// Which client produced the text (`identity` when no translation ran).
    pub client: String,
}

/// Translate between languages. Same-language requests never reach the
/// client.
pub fn translate(
    text: &str,
    from: &LanguageTag,
    to: &LanguageTag,
    client: &dyn TranslatorClient,
) -> Result<Translated, GuardError> {
    if from.primary() == to.primary() {
        return Ok(Translated {
            text: text.to_string(),
            client: "identity".into(),
        });
    }
    client
        .translate(text, &from.primary(), &to.primary())
        .map(|text| Translated {
            text,
            client: client.name().to_string(),
        })
        .map_err(|e| GuardError::TranslatorUnavailable {
            client: client.name().to_string(),
            cause: e.to_string(),
        })
}
