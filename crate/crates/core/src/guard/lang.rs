//! Lightweight language identification: stopword hits plus a character
//! trigram profile per language, built once from short sample texts.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::GuardError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageTag {
    pub code: String,
    pub confidence: f64,
}

impl LanguageTag {
    pub fn new(code: impl Into<String>, confidence: f64) -> Self {
        LanguageTag {
            code: code.into(),
            confidence: confidence.clamp(0.0, 1.0),
        }
    }

    pub fn english() -> Self {
        LanguageTag::new("en", 1.0)
    }

    /// Primary subtag, lowercased (`es-MX` -> `es`).
    pub fn primary(&self) -> String {
        self.code
            .split(['-', '_'])
            .next()
            .unwrap_or("")
            .to_ascii_lowercase()
    }
}

struct Profile {
    code: &'static str,
    stopwords: &'static [&'static str],
    sample: &'static str,
    hint_chars: &'static str,
}

const PROFILES: &[Profile] = &[
    Profile {
        code: "en",
        stopwords: &[
            "the", "a", "an", "and", "or", "of", "to", "in", "is", "are", "how", "what", "do", "does", "i",
            "you", "my", "can", "for", "with", "on", "it", "this", "that", "where", "why", "when", "which",
            "be", "not", "get", "find",
        ],
        sample: "How do I create a new project in the console? You can find your credentials on the \
                 service page. What is the difference between a deployment and a job? Why does my \
                 build fail when the password is changed? Where are the settings for this instance stored? \
                 The following steps show how to configure the service with your account.",
        hint_chars: "",
    },
    Profile {
        code: "es",
        stopwords: &[
            "el", "la", "los", "las", "un", "una", "y", "o", "de", "del", "en", "es", "son", "cómo", "como",
            "qué", "que", "por", "para", "con", "mi", "yo", "se", "no", "al", "lo", "dónde", "cuál", "puedo",
            "mis",
        ],
        sample: "¿Cómo creo un proyecto nuevo en la consola? Puedes encontrar tus credenciales en la \
                 página del servicio. ¿Qué es la diferencia entre una implementación y un trabajo? ¿Por qué \
                 falla mi compilación cuando cambio la contraseña? ¿Dónde se guarda la configuración de esta \
                 instancia? Los siguientes pasos muestran cómo configurar el servicio con tu cuenta.",
        hint_chars: "¿¡ñ",
    },
    Profile {
        code: "fr",
        stopwords: &[
            "le", "la", "les", "un", "une", "et", "ou", "de", "des", "du", "en", "est", "sont", "comment",
            "que", "quoi", "pour", "avec", "mon", "ma", "je", "ne", "pas", "dans", "au", "où", "puis", "mes",
        ],
        sample: "Comment créer un nouveau projet dans la console ? Vous pouvez trouver vos identifiants sur \
                 la page du service. Quelle est la différence entre un déploiement et une tâche ? Pourquoi ma \
                 compilation échoue-t-elle quand je change le mot de passe ? Où sont stockés les paramètres de \
                 cette instance ? Les étapes suivantes montrent comment configurer le service avec votre compte.",
        hint_chars: "çœ",
    },
    Profile {
        code: "de",
        stopwords: &[
            "der", "die", "das", "ein", "eine", "und", "oder", "von", "zu", "in", "ist", "sind", "wie", "was",
            "für", "mit", "mein", "ich", "nicht", "den", "dem", "auf", "wo", "kann", "meine", "warum",
        ],
        sample: "Wie erstelle ich ein neues Projekt in der Konsole? Sie finden Ihre Zugangsdaten auf der \
                 Seite des Dienstes. Was ist der Unterschied zwischen einer Bereitstellung und einem Job? \
                 Warum schlägt mein Build fehl, wenn das Passwort geändert wird? Wo werden die Einstellungen \
                 dieser Instanz gespeichert? Die folgenden Schritte zeigen, wie Sie den Dienst mit Ihrem Konto \
                 konfigurieren.",
        hint_chars: "ßäöü",
    },
    Profile {
        code: "pt",
        stopwords: &[
            "o", "a", "os", "as", "um", "uma", "e", "ou", "de", "do", "da", "em", "é", "são", "como", "que",
            "para", "com", "meu", "eu", "não", "no", "na", "onde", "posso", "minhas",
        ],
        sample: "Como eu crio um projeto novo no console? Você pode encontrar suas credenciais na página do \
                 serviço. Qual é a diferença entre uma implantação e um trabalho? Por que minha compilação \
                 falha quando a senha é alterada? Onde ficam as configurações desta instância? As etapas a \
                 seguir mostram como configurar o serviço com a sua conta.",
        hint_chars: "ãõ",
    },
    Profile {
        code: "it",
        stopwords: &[
            "il", "lo", "la", "i", "gli", "le", "un", "una", "e", "o", "di", "del", "in", "è", "sono", "come",
            "che", "per", "con", "mio", "io", "non", "nel", "dove", "posso", "mie",
        ],
        sample: "Come creo un nuovo progetto nella console? Puoi trovare le tue credenziali nella pagina del \
                 servizio. Qual è la differenza tra una distribuzione e un lavoro? Perché la mia compilazione \
                 non riesce quando cambio la password? Dove sono memorizzate le impostazioni di questa istanza? \
                 I passaggi seguenti mostrano come configurare il servizio con il tuo account.",
        hint_chars: "ìò",
    },
];

const PROFILE_SIZE: usize = 120;

fn trigrams(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in crate::text::words(text) {
        let padded: Vec<char> = format!(" {word} ").chars().collect();
        for w in padded.windows(3) {
            out.push(w.iter().collect());
        }
    }
    out
}

fn trigram_tables() -> &'static Vec<BTreeSet<String>> {
    static TABLES: OnceLock<Vec<BTreeSet<String>>> = OnceLock::new();
    TABLES.get_or_init(|| {
        PROFILES
            .iter()
            .map(|p| {
                let mut counts: BTreeMap<String, usize> = BTreeMap::new();
                for t in trigrams(p.sample) {
                    *counts.entry(t).or_default() += 1;
                }
                let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
                ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                ranked.into_iter().take(PROFILE_SIZE).map(|(t, _)| t).collect()
            })
            .collect()
    })
}

/// Per-language scores, in profile order. Exposed for diagnostics.
pub fn language_scores(text: &str) -> Vec<(&'static str, f64)> {
    let words = crate::text::words(text);
    let grams = trigrams(text);
    let tables = trigram_tables();
    PROFILES
        .iter()
        .zip(tables)
        .map(|(p, table)| {
            let stop = if words.is_empty() {
                0.0
            } else {
                words.iter().filter(|w| p.stopwords.contains(&w.as_str())).count() as f64 / words.len() as f64
            };
            let tri = if grams.is_empty() {
                0.0
            } else {
                grams.iter().filter(|g| table.contains(*g)).count() as f64 / grams.len() as f64
            };
            let hint = if p.hint_chars.chars().any(|c| text.to_lowercase().contains(c)) {
                0.25
            } else {
                0.0
            };
            (p.code, stop + 0.5 * tri + hint)
        })
        .collect()
}

/// Best-guess language of `text`.
///
/// Confidence is `best / (best + runner_up)`. ASCII-only text whose words
/// are mostly English stopwords is reported as `en` with confidence at
/// least 0.8. Text with no signal at all is `und` with confidence 0.
pub fn detect_language(text: &str) -> Result<LanguageTag, GuardError> {
    if text.trim().is_empty() {
        return Err(GuardError::EmptyText);
    }
    let mut scores = language_scores(text);
    scores.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (best_code, best) = scores[0];
    let runner_up = scores[1].1;
    if best <= 0.0 {
        return Ok(LanguageTag::new("und", 0.0));
    }
    let mut confidence = best / (best + runner_up);
    if best_code == "en" && text.is_ascii() {
        let words = crate::text::words(text);
        let en = &PROFILES[0];
        let hits = words.iter().filter(|w| en.stopwords.contains(&w.as_str())).count();
        if !words.is_empty() && hits * 2 >= words.len() {
            confidence = confidence.max(0.8);
        }
    }
    Ok(LanguageTag::new(best_code, confidence))
}
