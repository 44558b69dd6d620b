//! Wiring a pipeline, evaluation store and sinks from an [`AppConfig`].

use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::Context;
use topicrag::classify::QuestionRules;
use topicrag::client::{HttpWebhook, JsonSink};
use topicrag::corpus::{load_corpus, Corpus};
use topicrag::evalstore::EvalStore;
use topicrag::faq::FaqRegistry;
use topicrag::generate::{ExtractiveStub, GenerativeClient, HttpGenerativeClient};
use topicrag::guard::{DictionaryTranslator, GuardPolicy, IdentityTranslator, TranslatorClient};
use topicrag::pipeline::{Clients, EvalSink, FileSink, LogSink, Pipeline, Snapshot, WebhookSink};
use topicrag::retrieve::{HttpSearchClient, SearchClient};
use topicrag::rewrite::RewriteRules;

use crate::config::AppConfig;

pub struct App {
    pub config: AppConfig,
    pub pipeline: Arc<Pipeline>,
    pub store: Arc<Mutex<EvalStore>>,
    pub webhook: Option<Arc<dyn JsonSink>>,
}

/// Load the corpus, logging files that failed to parse.
pub fn load_corpus_logged(root: &std::path::Path) -> anyhow::Result<Corpus> {
    let corpus = load_corpus(root).with_context(|| format!("loading corpus {}", root.display()))?;
    for f in corpus.failures() {
        log::warn!("skipped {}: {}", f.path.display(), f.error);
    }
    Ok(corpus)
}

/// Corpus plus every rule file named in the config.
pub fn load_snapshot(config: &AppConfig) -> anyhow::Result<Snapshot> {
    let corpus = load_corpus_logged(&config.corpus_root)?;
    let faq = match &config.faq_registry {
        Some(p) => FaqRegistry::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => FaqRegistry::in_memory(),
    };
    let rewrite = match &config.rewrite_rules {
        Some(p) => RewriteRules::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RewriteRules::default(),
    };
    let questions = match &config.question_rules {
        Some(p) => QuestionRules::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => QuestionRules::default(),
    };
    let guard = match &config.guard_policy {
        Some(p) => GuardPolicy::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => GuardPolicy::default(),
    };
    Snapshot::new(corpus, faq, rewrite, questions, guard).context("building search index")
}

/// Live clients from config. Without `live`, or with no generators
/// configured, generation uses the extractive stub.
pub fn build_clients(config: &AppConfig, live: bool) -> anyhow::Result<Clients> {
    let generators: Vec<Arc<dyn GenerativeClient>> = if live && !config.generators.is_empty() {
        config
            .generators
            .iter()
            .map(|g| {
                Arc::new(HttpGenerativeClient::new(&g.id, &g.url, Duration::from_millis(g.timeout_ms)))
                    as Arc<dyn GenerativeClient>
            })
            .collect()
    } else {
        vec![Arc::new(ExtractiveStub::default())]
    };
    let translator: Arc<dyn TranslatorClient> = match &config.translations {
        Some(p) => Arc::new(DictionaryTranslator::load(p).with_context(|| format!("loading {}", p.display()))?),
        None => Arc::new(IdentityTranslator),
    };
    let search = match (&config.search, live) {
        (Some(s), true) => Some(Arc::new(HttpSearchClient {
            endpoint: s.url.clone(),
            timeout: Duration::from_millis(s.timeout_ms),
        }) as Arc<dyn SearchClient>),
        _ => None,
    };
    Ok(Clients {
        generators,
        translator,
        search,
    })
}

impl App {
    /// Everything the server needs: live clients and all configured sinks.
    pub fn build(config: AppConfig) -> anyhow::Result<App> {
        let snapshot = load_snapshot(&config)?;
        let clients = build_clients(&config, true)?;
        let store = match &config.eval_dir {
            Some(dir) => EvalStore::open(dir).with_context(|| format!("opening eval store {}", dir.display()))?,
            None => EvalStore::in_memory(),
        };
        let store = Arc::new(Mutex::new(store));
        let webhook = config.webhook.as_ref().map(|w| {
            Arc::new(HttpWebhook {
                url: w.url.clone(),
                timeout: Duration::from_millis(w.timeout_ms),
            }) as Arc<dyn JsonSink>
        });

        let mut sinks: Vec<Arc<dyn LogSink>> = Vec::new();
        if let Some(path) = &config.response_log {
            let sink = FileSink::open(path).with_context(|| format!("opening {}", path.display()))?;
            sinks.push(Arc::new(sink));
        }
        if let Some(w) = &webhook {
            sinks.push(Arc::new(WebhookSink::new(Arc::clone(w))));
        }
        sinks.push(Arc::new(EvalSink::new(Arc::clone(&store))));

        let pipeline = Pipeline::new(snapshot, clients, sinks, config.pipeline.clone());
        Ok(App {
            config,
            pipeline: Arc::new(pipeline),
            store,
            webhook,
        })
    }

    /// Re-read the corpus and rule files and swap them in atomically.
    /// Returns the new topic count.
    pub fn reload(&self) -> anyhow::Result<usize> {
        let snapshot = load_snapshot(&self.config)?;
        let n = snapshot.corpus.len();
        self.pipeline.replace_snapshot(snapshot);
        Ok(n)
    }

    pub fn response_log(&self) -> Option<&PathBuf> {
        self.config.response_log.as_ref()
    }
}
