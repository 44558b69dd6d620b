//! The ask flow: screening, FAQ cache, rewrite, search, grounding,
//! generation, markup and logging.

mod config;
mod output;
mod sinks;
mod types;

use std::collections::{HashSet, VecDeque};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use chrono::Utc;
use thiserror::Error;

use crate::classify::{QuestionClass, QuestionRules};
use crate::corpus::{extract_grounding_text, Corpus};
use crate::evalstore::{EvalRecord, EvalSeed};
use crate::faq::{check_freshness, curate_entry, match_faq, FaqEntry, FaqError, FaqRegistry, Freshness};
use crate::generate::{
    build_prompt, generate_candidates, select_best, ExtractiveStub, GenerateError, GenerativeClient, GroundingDoc,
    TemplateId,
};
use crate::guard::{
    detect_language, screen_input, translate, GuardPolicy, IdentityTranslator, LanguageTag,
    TranslatorClient, Verdict,
};
use crate::retrieve::{
    build_index, external_search, postprocess_hits, search, LexicalIndex, RecencyRescorer, RetrieveError,
    SearchClient, TopicHit,
};
use crate::rewrite::{augment_query, AugmentedQuery, RewriteRules};

pub use config::{Deadlines, PipelineConfig, SearchSource};
pub use output::{highlight_terms, is_answer_markup, postprocess_output, render_answer_html, OutputError, PostProcessed};
pub use sinks::{read_log, webhook_payload, EvalSink, FileSink, LogSink, WebhookSink};
pub use types::*;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Retrieve(#[from] RetrieveError),
    #[error("unknown request id {0}")]
    UnknownRequestId(String),
    #[error(transparent)]
    Faq(#[from] FaqError),
}

/// Everything a request reads. Swapped as a whole on reload.
#[derive(Clone)]
pub struct Snapshot {
    pub corpus: Arc<Corpus>,
    pub index: Arc<LexicalIndex>,
    pub faq: Arc<FaqRegistry>,
    pub rewrite_rules: Arc<RewriteRules>,
    pub question_rules: Arc<QuestionRules>,
    pub guard_policy: Arc<GuardPolicy>,
}

impl Snapshot {
    pub fn new(
        corpus: Corpus,
        faq: FaqRegistry,
        rewrite_rules: RewriteRules,
        question_rules: QuestionRules,
        guard_policy: GuardPolicy,
    ) -> Result<Self, RetrieveError> {
        let index = build_index(&corpus)?;
        Ok(Snapshot {
            corpus: Arc::new(corpus),
            index: Arc::new(index),
            faq: Arc::new(faq),
            rewrite_rules: Arc::new(rewrite_rules),
            question_rules: Arc::new(question_rules),
            guard_policy: Arc::new(guard_policy),
        })
    }

    /// Default rules and policy, empty FAQ registry.
    pub fn from_corpus(corpus: Corpus) -> Result<Self, RetrieveError> {
        Snapshot::new(
            corpus,
            FaqRegistry::in_memory(),
            RewriteRules::default(),
            QuestionRules::default(),
            GuardPolicy::default(),
        )
    }

    /// Same rules with a different corpus and a rebuilt index.
    pub fn with_corpus(&self, corpus: Corpus) -> Result<Self, RetrieveError> {
        let index = build_index(&corpus)?;
        Ok(Snapshot {
            corpus: Arc::new(corpus),
            index: Arc::new(index),
            ..self.clone()
        })
    }
}

pub struct Clients {
    /// Candidate generators; position is the tie-break priority.
    pub generators: Vec<Arc<dyn GenerativeClient>>,
    pub translator: Arc<dyn TranslatorClient>,
    pub search: Option<Arc<dyn SearchClient>>,
}

impl Default for Clients {
    fn default() -> Self {
        Clients {
            generators: vec![Arc::new(ExtractiveStub::default())],
            translator: Arc::new(IdentityTranslator),
            search: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackAck {
    pub request_id: String,
    /// The request id was not answered by this process.
    pub orphan: bool,
}

#[derive(Default)]
struct RecentIds {
    order: VecDeque<String>,
    set: HashSet<String>,
}

impl RecentIds {
    fn insert(&mut self, id: &str, cap: usize) {
        if self.set.insert(id.to_string()) {
            self.order.push_back(id.to_string());
        }
        while self.order.len() > cap.max(1) {
            if let Some(old) = self.order.pop_front() {
                self.set.remove(&old);
            }
        }
    }
}

pub struct Pipeline {
    state: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
    clients: Clients,
    sinks: Vec<Arc<dyn LogSink>>,
    config: PipelineConfig,
    recent: Mutex<RecentIds>,
}

/// Early exit; the outcome is already set.
struct Exit;

type Flow = Result<(), Exit>;

struct Run {
    started: Instant,
    deadline: Duration,
    trace: Vec<StageRecord>,
    resp: AnswerResponse,
    screened: String,
    qclass: Option<QuestionClass>,
    answer_text: String,
}

impl Run {
    fn push(&mut self, stage: Stage, t0: Instant, verdict: StageVerdict, detail: String) {
        self.trace.push(StageRecord {
            stage,
            duration_us: t0.elapsed().as_micros() as u64,
            verdict,
            detail,
        });
    }

    /// Record a finished stage and enforce the total deadline.
    fn record(&mut self, stage: Stage, t0: Instant, verdict: StageVerdict, detail: impl Into<String>) -> Flow {
        self.push(stage, t0, verdict, detail.into());
        if self.started.elapsed() > self.deadline {
            self.resp.outcome = Outcome::Error;
            let last = self.trace.last_mut().expect("just pushed");
            last.verdict = StageVerdict::Fail;
            last.detail = format!("deadline exceeded at {}", stage.as_str());
            return Err(Exit);
        }
        Ok(())
    }

    fn stop(&mut self, stage: Stage, t0: Instant, verdict: StageVerdict, outcome: Outcome, detail: impl Into<String>) -> Exit {
        self.push(stage, t0, verdict, detail.into());
        self.resp.outcome = outcome;
        Exit
    }

    fn remaining(&self) -> Duration {
        self.deadline.saturating_sub(self.started.elapsed())
    }
}

fn join<T: AsRef<str>>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|s| s.as_ref().to_string()).collect::<Vec<_>>().join(",")
}

impl Pipeline {
    pub fn new(snapshot: Snapshot, clients: Clients, sinks: Vec<Arc<dyn LogSink>>, config: PipelineConfig) -> Self {
        Pipeline {
            state: RwLock::new(Arc::new(snapshot)),
            writer: Mutex::new(()),
            clients,
            sinks,
            config,
            recent: Mutex::new(RecentIds::default()),
        }
    }

    /// Stub generator, identity translation, default rules, no sinks.
    pub fn with_defaults(corpus: Corpus) -> Result<Self, PipelineError> {
        Ok(Pipeline::new(
            Snapshot::from_corpus(corpus)?,
            Clients::default(),
            Vec::new(),
            PipelineConfig::default(),
        ))
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn generator_ids(&self) -> Vec<String> {
        self.clients.generators.iter().map(|g| g.id().to_string()).collect()
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.state.read().unwrap_or_else(|p| p.into_inner()))
    }

    /// Atomically replace everything requests read.
    pub fn replace_snapshot(&self, snapshot: Snapshot) {
        let _w = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        *self.state.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(snapshot);
    }

    pub fn reload_corpus(&self, corpus: Corpus) -> Result<(), PipelineError> {
        let _w = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let next = self.snapshot().with_corpus(corpus)?;
        *self.state.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(next);
        Ok(())
    }

    /// Save a good evaluation record as a curated FAQ entry.
    pub fn curate(&self, record: &EvalRecord) -> Result<FaqEntry, PipelineError> {
        let _w = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let current = self.snapshot();
        let mut registry = (*current.faq).clone();
        let entry = curate_entry(record, &current.corpus, &mut registry)?;
        let next = Snapshot {
            faq: Arc::new(registry),
            ..(*current).clone()
        };
        *self.state.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(next);
        Ok(entry)
    }

    pub fn answer_question(&self, req: &AskRequest) -> AnswerResponse {
        let snap = self.snapshot();
        let mut run = Run {
            started: Instant::now(),
            deadline: self.config.total_deadline(),
            trace: Vec::new(),
            resp: AnswerResponse {
                request_id: req.request_id.clone(),
                outcome: Outcome::Error,
                answer_html: None,
                answer_text: None,
                links: Vec::new(),
                highlighted_terms: Vec::new(),
                hits: Vec::new(),
                findings: Vec::new(),
                language: "und".into(),
                trace: Vec::new(),
            },
            screened: String::new(),
            qclass: None,
            answer_text: String::new(),
        };
        let _ = self.flow(&snap, req, &mut run);
        self.log(req, &mut run);
        self.recent
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(&req.request_id, self.config.request_memory);
        let mut resp = run.resp;
        resp.trace = run.trace;
        resp
    }

    fn flow(&self, snap: &Snapshot, req: &AskRequest, run: &mut Run) -> Flow {
        let t = Instant::now();
        let screened = match screen_input(&req.text, &snap.guard_policy) {
            Ok(s) => s,
            Err(e) => return Err(run.stop(Stage::Screen, t, StageVerdict::Stop, Outcome::Rejected, e.to_string())),
        };
        run.resp.findings = screened.categories();
        let cats = join(run.resp.findings.iter().map(|c| c.as_str()));
        match screened.verdict {
            Verdict::Rejected => {
                return Err(run.stop(Stage::Screen, t, StageVerdict::Stop, Outcome::Rejected, cats));
            }
            Verdict::Sanitized => run.record(Stage::Screen, t, StageVerdict::Changed, cats)?,
            Verdict::Clean => run.record(Stage::Screen, t, StageVerdict::Pass, "")?,
        }
        run.screened = screened.text.clone();
        let text = screened.text;

        let t = Instant::now();
        let lang = match detect_language(&text) {
            Ok(tag) => tag,
            Err(_) => {
                return Err(run.stop(Stage::Language, t, StageVerdict::Stop, Outcome::NotAQuestion, "empty input"));
            }
        };
        let lang = if lang.code == "und" || lang.confidence < self.config.language_min_confidence {
            match &req.client_locale {
                Some(loc) => LanguageTag::new(loc.clone(), lang.confidence),
                None => LanguageTag::new("en", lang.confidence),
            }
        } else {
            lang
        };
        run.resp.language = lang.code.clone();
        run.record(Stage::Language, t, StageVerdict::Pass, lang.code.clone())?;

        let english = if lang.primary() == "en" {
            text
        } else {
            let t = Instant::now();
            match translate(&text, &lang, &LanguageTag::english(), self.clients.translator.as_ref()) {
                Ok(tr) => {
                    run.record(Stage::TranslateIn, t, StageVerdict::Changed, tr.client)?;
                    tr.text
                }
                Err(e) => return Err(run.stop(Stage::TranslateIn, t, StageVerdict::Fail, Outcome::Error, e.to_string())),
            }
        };

        let t = Instant::now();
        let class = snap.question_rules.classify(&english);
        run.qclass = Some(class.clone());
        if !class.is_question {
            run.record(Stage::Classify, t, StageVerdict::Stop, "not a question")?;
            let t = Instant::now();
            let hits = match self.retrieve(snap, &AugmentedQuery::plain(&english)) {
                Ok(h) => h,
                Err(e) => return Err(run.stop(Stage::Retrieve, t, StageVerdict::Fail, Outcome::Error, e.to_string())),
            };
            let detail = join(hits.iter().map(|h| h.topic_id.as_str()));
            run.resp.hits = hits;
            run.resp.outcome = Outcome::NotAQuestion;
            return run.record(Stage::Retrieve, t, StageVerdict::Pass, detail);
        }
        run.record(Stage::Classify, t, StageVerdict::Pass, class.qtype.as_str())?;

        let t = Instant::now();
        match match_faq(&english, &snap.faq, self.config.faq_threshold) {
            Some(m) => match check_freshness(&m.entry, &snap.corpus) {
                Freshness::Fresh => {
                    run.record(Stage::Faq, t, StageVerdict::Pass, format!("{} {:.3}", m.entry.id, m.score))?;
                    let links = self.links(
                        snap,
                        m.entry.grounding.iter().map(|g| g.topic_id.as_str()),
                    );
                    return self.finish(snap, run, &m.entry.answer_text, Vec::new(), links, &lang, Outcome::FaqAnswered);
                }
                Freshness::Stale { changed, deleted } => {
                    let detail = format!("{} stale: changed [{}] deleted [{}]", m.entry.id, join(&changed), join(&deleted));
                    run.record(Stage::Faq, t, StageVerdict::Changed, detail)?;
                }
            },
            None => run.record(Stage::Faq, t, StageVerdict::Pass, "no match")?,
        }

        let t = Instant::now();
        let q = augment_query(&english, &snap.rewrite_rules);
        let changed = q.rewritten != q.original || !q.added_terms.is_empty() || !q.boost_terms.is_empty();
        let detail = join(q.added_terms.iter().map(|a| a.term.as_str()));
        run.record(Stage::Rewrite, t, if changed { StageVerdict::Changed } else { StageVerdict::Pass }, detail)?;

        let t = Instant::now();
        let hits = match self.retrieve(snap, &q) {
            Ok(h) => h,
            Err(e) => return Err(run.stop(Stage::Retrieve, t, StageVerdict::Fail, Outcome::Error, e.to_string())),
        };
        if hits.is_empty() {
            return Err(run.stop(Stage::Retrieve, t, StageVerdict::Stop, Outcome::NoGrounding, "no hits"));
        }
        run.resp.hits = hits.clone();
        run.record(Stage::Retrieve, t, StageVerdict::Pass, join(hits.iter().map(|h| h.topic_id.as_str())))?;

        let t = Instant::now();
        let mut docs: Vec<GroundingDoc> = hits
            .iter()
            .filter_map(|h| snap.corpus.get(&h.topic_id))
            .map(|topic| GroundingDoc {
                topic_id: topic.id.clone(),
                title: topic.title.clone(),
                text: extract_grounding_text(topic).text,
            })
            .collect();
        if docs.is_empty() {
            return Err(run.stop(Stage::Extract, t, StageVerdict::Stop, Outcome::NoGrounding, "no grounding text"));
        }
        run.record(Stage::Extract, t, StageVerdict::Pass, format!("{} topics", docs.len()))?;

        let t = Instant::now();
        let mut dropped = 0;
        let prompt = loop {
            match build_prompt(&english, docs.clone(), TemplateId::GroundedAnswer, self.config.context_budget) {
                Ok(p) => break p,
                Err(GenerateError::ContextBudgetExceeded { .. }) if docs.len() > 1 => {
                    docs.pop();
                    dropped += 1;
                }
                Err(e) => return Err(run.stop(Stage::Generate, t, StageVerdict::Fail, Outcome::Error, e.to_string())),
            }
        };
        let deadline = self.config.generate_deadline().min(run.remaining());
        let selection = match generate_candidates(&prompt, &self.clients.generators, deadline)
            .and_then(|c| select_best(&c, &prompt, &self.config.selection))
        {
            Ok(s) => s,
            Err(e) => return Err(run.stop(Stage::Generate, t, StageVerdict::Fail, Outcome::Error, e.to_string())),
        };
        let mut detail = format!("chose {}", selection.chosen.model_id);
        if dropped > 0 {
            detail.push_str(&format!(", dropped {dropped} topics over budget"));
        }
        run.record(Stage::Generate, t, StageVerdict::Pass, detail)?;

        let highlighted = highlight_terms(&selection.chosen.text, &q, &selection.evidence_sentences);
        // Link the topics the answer draws on, or the best hit if no
        // sentence could be traced.
        let mut grounded: Vec<&str> = prompt
            .grounding
            .iter()
            .map(|g| g.topic_id.as_str())
            .filter(|id| selection.evidence_sentences.iter().any(|e| e.topic_id == *id))
            .collect();
        if grounded.is_empty() {
            grounded.push(&prompt.grounding[0].topic_id);
        }
        let links = self.links(snap, grounded.into_iter());
        self.finish(snap, run, &selection.chosen.text, highlighted, links, &lang, Outcome::Answered)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        snap: &Snapshot,
        run: &mut Run,
        answer: &str,
        highlighted: Vec<String>,
        links: Vec<Link>,
        lang: &LanguageTag,
        outcome: Outcome,
    ) -> Flow {
        let t = Instant::now();
        match postprocess_output(answer, &highlighted, &links, lang, self.clients.translator.as_ref(), &snap.guard_policy) {
            Ok(out) => {
                let verdict = if out.findings.is_empty() {
                    StageVerdict::Pass
                } else {
                    StageVerdict::Changed
                };
                let detail = join(out.findings.iter().map(|c| c.as_str()));
                run.resp.answer_html = Some(out.answer_html);
                run.resp.answer_text = Some(out.localized_text);
                run.resp.highlighted_terms = highlighted;
                run.resp.links = links;
                run.resp.outcome = outcome;
                run.answer_text = out.answer_text;
                run.record(Stage::Postprocess, t, verdict, detail)
            }
            Err(e) => Err(run.stop(Stage::Postprocess, t, StageVerdict::Fail, Outcome::Error, e.to_string())),
        }
    }

    fn links<'a>(&self, snap: &Snapshot, ids: impl Iterator<Item = &'a str>) -> Vec<Link> {
        let mut out: Vec<Link> = Vec::new();
        for id in ids {
            if out.iter().any(|l| l.topic_id == id) {
                continue;
            }
            if let Some(topic) = snap.corpus.get(id) {
                out.push(Link {
                    topic_id: id.to_string(),
                    title: topic.title.clone(),
                    url: format!("{}{}", self.config.link_base, id),
                });
            }
        }
        out
    }

    fn retrieve(&self, snap: &Snapshot, q: &AugmentedQuery) -> Result<Vec<TopicHit>, RetrieveError> {
        let raw = match (self.config.search_source, &self.clients.search) {
            (SearchSource::External, Some(client)) => match external_search(client.as_ref(), q, &snap.corpus) {
                Ok(hits) => hits,
                Err(RetrieveError::MalformedClientResponse {
                    client,
                    message,
                    valid_hits,
                }) => {
                    log::warn!("search client {client} sent a malformed response: {message}");
                    valid_hits
                }
                Err(e) => return Err(e),
            },
            _ => {
                let mut policy = self.config.search.clone();
                // Filters and the score floor are applied afterwards.
                policy.filters.clear();
                policy.min_score = f64::NEG_INFINITY;
                policy.max_hits = usize::MAX;
                search(&snap.index, q, &policy)
            }
        };
        let recency = self.config.recency_half_life_days.map(|half_life_days| RecencyRescorer {
            now: Utc::now(),
            half_life_days,
        });
        Ok(postprocess_hits(
            raw,
            &self.config.search,
            &snap.corpus,
            recency.as_ref().map(|r| r as &dyn crate::retrieve::Rescorer),
        ))
    }

    fn log(&self, req: &AskRequest, run: &mut Run) {
        let t = Instant::now();
        let summary = ResponseSummary {
            request_id: req.request_id.clone(),
            ts: req.received_at,
            question: run.screened.clone(),
            outcome: run.resp.outcome,
            is_question: run.qclass.as_ref().map(|c| c.is_question),
            links: run.resp.links.clone(),
            findings: run.resp.findings.clone(),
            duration_ms: run.started.elapsed().as_millis() as u64,
        };
        let seed = EvalSeed {
            record_id: req.request_id.clone(),
            question: run.screened.clone(),
            language: run.resp.language.clone(),
            qclass: run.qclass.clone(),
            answer_html: run.resp.answer_html.clone(),
            answer_text: run.answer_text.clone(),
            links: run.resp.links.clone(),
            outcome: run.resp.outcome,
            created_at: req.received_at,
        };
        let mut failed = Vec::new();
        for sink in &self.sinks {
            if let Err(e) = sink.response(&summary, &seed) {
                log::warn!("log sink {} failed for {}: {e}", sink.name(), req.request_id);
                failed.push(sink.name().to_string());
            }
        }
        let verdict = if failed.is_empty() {
            StageVerdict::Pass
        } else {
            StageVerdict::Fail
        };
        let detail = format!("{} sinks", self.sinks.len());
        let detail = if failed.is_empty() {
            detail
        } else {
            format!("{detail}, failed {}", join(&failed))
        };
        run.push(Stage::Log, t, verdict, detail);
    }

    /// Log a rating and forward it to the sinks. Unknown request ids are
    /// accepted as orphans unless strict mode is on.
    pub fn record_feedback(&self, event: &FeedbackEvent) -> Result<FeedbackAck, PipelineError> {
        let known = self
            .recent
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .set
            .contains(&event.request_id);
        if !known && self.config.strict_feedback {
            return Err(PipelineError::UnknownRequestId(event.request_id.clone()));
        }
        for sink in &self.sinks {
            if let Err(e) = sink.feedback(event) {
                log::warn!("log sink {} failed for feedback on {}: {e}", sink.name(), event.request_id);
            }
        }
        Ok(FeedbackAck {
            request_id: event.request_id.clone(),
            orphan: !known,
        })
    }
}
