//! Service configuration: built-in defaults, then a TOML or JSON file, then
//! `TOPICRAG_*` environment variables. Nested keys use `__`, e.g.
//! `TOPICRAG_PIPELINE__FAQ_THRESHOLD=0.9`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use figment::providers::{Env, Format, Json, Serialized, Toml};
use figment::Figment;
use serde::{Deserialize, Serialize};
use topicrag::contenttools::{LintThresholds, DEFAULT_COVERAGE_THRESHOLD};
use topicrag::pipeline::PipelineConfig;
use topicrag::regression::RegressionOptions;

pub const ENV_PREFIX: &str = "TOPICRAG_";

fn default_timeout_ms() -> u64 {
    10_000
}

/// A JSON-over-HTTP service the pipeline calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorEndpoint {
    pub id: String,
    pub url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub corpus_root: PathBuf,
    pub faq_registry: Option<PathBuf>,
    pub rewrite_rules: Option<PathBuf>,
    pub question_rules: Option<PathBuf>,
    pub guard_policy: Option<PathBuf>,
    /// Phrase dictionary for the offline translator.
    pub translations: Option<PathBuf>,
    /// Evaluation store directory; in memory when unset.
    pub eval_dir: Option<PathBuf>,
    /// JSONL response and feedback log.
    pub response_log: Option<PathBuf>,
    /// Where weekly summaries are written when the webhook fails.
    pub summary_dir: PathBuf,
    pub bind: String,
    /// Enables admin endpoints and debug traces when set.
    pub admin_token: Option<String>,
    /// Live generators in priority order. Empty means the extractive stub.
    pub generators: Vec<GeneratorEndpoint>,
    pub search: Option<Endpoint>,
    pub webhook: Option<Endpoint>,
    pub pipeline: PipelineConfig,
    pub lint: LintThresholds,
    pub coverage_threshold: f64,
    pub regression: RegressionOptions,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            corpus_root: PathBuf::from("docs"),
            faq_registry: None,
            rewrite_rules: None,
            question_rules: None,
            guard_policy: None,
            translations: None,
            eval_dir: None,
            response_log: None,
            summary_dir: PathBuf::from("summaries"),
            bind: "127.0.0.1:8080".into(),
            admin_token: None,
            generators: Vec::new(),
            search: None,
            webhook: None,
            pipeline: PipelineConfig::default(),
            lint: LintThresholds::default(),
            coverage_threshold: DEFAULT_COVERAGE_THRESHOLD,
            regression: RegressionOptions::default(),
        }
    }
}

impl AppConfig {
    /// Load `path` (TOML unless it ends in `.json`) over the defaults and
    /// apply environment overrides.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        Self::load_with_env(path, Env::prefixed(ENV_PREFIX).split("__").ignore(&["config"]))
    }

    fn load_with_env(path: Option<&Path>, env: Env) -> anyhow::Result<Self> {
        let mut figment = Figment::from(Serialized::defaults(AppConfig::default()));
        if let Some(p) = path {
            if !p.is_file() {
                bail!("config file {} not found", p.display());
            }
            figment = if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
                figment.merge(Json::file(p))
            } else {
                figment.merge(Toml::file(p))
            };
        }
        figment
            .merge(env)
            .extract()
            .with_context(|| match path {
                Some(p) => format!("invalid configuration in {}", p.display()),
                None => "invalid configuration".to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = AppConfig::load_with_env(None, Env::prefixed("TOPICRAG_TEST_NONE_")).unwrap();
        assert_eq!(c, AppConfig::default());
    }

    #[test]
    fn toml_then_env() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("topicrag.toml");
        std::fs::write(
            &path,
            "corpus_root = \"corpus\"\n[pipeline]\nfaq_threshold = 0.9\n[[generators]]\nid = \"m1\"\nurl = \"http://x\"\n",
        )
        .unwrap();
        figment::Jail::expect_with(|jail| {
            jail.set_env("TOPICRAG_T1_PIPELINE__STRICT_FEEDBACK", "true");
            jail.set_env("TOPICRAG_T1_BIND", "0.0.0.0:9000");
            let c = AppConfig::load_with_env(Some(&path), Env::prefixed("TOPICRAG_T1_").split("__")).unwrap();
            assert_eq!(c.corpus_root, PathBuf::from("corpus"));
            assert_eq!(c.pipeline.faq_threshold, 0.9);
            assert!(c.pipeline.strict_feedback);
            assert_eq!(c.bind, "0.0.0.0:9000");
            assert_eq!(c.generators[0].timeout_ms, 10_000);
            Ok(())
        });
    }

    #[test]
    fn json_files_are_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"admin_token": "s3cret", "coverage_threshold": 0.5}"#).unwrap();
        let c = AppConfig::load_with_env(Some(&path), Env::prefixed("TOPICRAG_TEST_NONE_")).unwrap();
        assert_eq!(c.admin_token.as_deref(), Some("s3cret"));
        assert_eq!(c.coverage_threshold, 0.5);
    }

    #[test]
    fn missing_file_and_bad_values_are_errors() {
        assert!(AppConfig::load(Some(Path::new("/nonexistent/topicrag.toml"))).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "bind = 5\n[pipeline]\nfaq_threshold = \"high\"\n").unwrap();
        assert!(AppConfig::load_with_env(Some(&path), Env::prefixed("TOPICRAG_TEST_NONE_")).is_err());
    }
}
