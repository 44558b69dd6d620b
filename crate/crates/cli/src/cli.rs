//! `topicrag` subcommands. Exit codes: 0 success, 1 failures present
//! (failing cases, lint errors, unmatched questions, nothing to report),
//! 2 usage or input errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use chrono::{Duration, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use topicrag::contenttools::{coverage_test, grounded_answer_check, lint_topic, Severity};
use topicrag::corpus::parse_topic_file;
use topicrag::evalstore::{
    build_weekly_summary, export_datasets, funnel_report, weekly_summary, EvalError, EvalStore, ExportKind, Period,
};
use topicrag::faq::check_freshness;
use topicrag::pipeline::{read_log, Pipeline};
use topicrag::regression::{load_cases, run_regression, RegressionOptions};

use crate::app::{build_clients, load_snapshot, App};
use crate::config::AppConfig;
use crate::http::{log_stats, parse_time, Bucket};

#[derive(Debug, Parser)]
#[command(name = "topicrag", version, about = "Question answering over structured product documentation")]
pub struct Cli {
    /// TOML or JSON configuration file. TOPICRAG_* variables override it.
    #[arg(long, short, global = true, env = "TOPICRAG_CONFIG")]
    pub config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
    /// Load the corpus and rules, build the index and print counts.
    Ingest {
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Run a batch of question-topic-answer cases end to end.
    Regress(RegressArgs),
    /// Check topic files against the authoring guidelines.
    Lint {
        /// Topic files or directories.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Compare the questions a draft topic answers with real user questions.
    Coverage(CoverageArgs),
    /// Evaluation and usage reports.
    Report(ReportArgs),
    /// Write a training dataset from evaluated records.
    Export {
        #[arg(long)]
        kind: ExportKind,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    /// JSONL file of regression cases.
    #[arg(long)]
    pub cases: PathBuf,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub min_token_f1: Option<f64>,
    #[arg(long)]
    pub min_bleu: Option<f64>,
    #[arg(long)]
    pub min_rouge_l: Option<f64>,
    /// Use the configured generator and search services instead of the stub.
    #[arg(long)]
    pub live: bool,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    /// Draft topic file (HTML or Markdown).
    pub topic: PathBuf,
    /// Real user questions, one per line (or a JSON array for `.json`).
    #[arg(long)]
    pub questions: PathBuf,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Also answer each question from the draft and score the answer.
    #[arg(long)]
    pub answers: bool,
    #[arg(long)]
    pub live: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    Funnel,
    Usage,
    Weekly,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(value_enum)]
    pub kind: ReportKind,
    /// Start of the period (RFC 3339 or YYYY-MM-DD).
    #[arg(long)]
    pub from: Option<String>,
    /// End of the period, exclusive.
    #[arg(long)]
    pub to: Option<String>,
    /// Usage buckets: month or week.
    #[arg(long, default_value = "month")]
    pub bucket: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse `args` and run. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli) {
        Ok(Status::Ok) => 0,
        Ok(Status::Failures) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Ok,
    Failures,
}

fn execute(cli: Cli) -> anyhow::Result<Status> {
    let mut config = AppConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Serve { bind } => {
            if let Some(b) = bind {
                config.bind = b;
            }
            serve(config)
        }
        Command::Ingest { corpus } => {
            if let Some(c) = corpus {
                config.corpus_root = c;
            }
            ingest(&config)
        }
        Command::Regress(args) => regress(config, args),
        Command::Lint { paths, json } => lint(&config, &paths, json),
        Command::Coverage(args) => coverage(&config, args),
        Command::Report(args) => report(&config, args),
        Command::Export { kind, out } => export(&config, kind, &out),
    }
}

fn serve(config: AppConfig) -> anyhow::Result<Status> {
    let app = Arc::new(App::build(config)?);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(crate::http::serve(app))?;
    Ok(Status::Ok)
}

fn ingest(config: &AppConfig) -> anyhow::Result<Status> {
    let snap = load_snapshot(config)?;
    let stale = snap
        .faq
        .entries()
        .filter(|e| !check_freshness(e, &snap.corpus).is_fresh())
        .count();
    println!("topics: {}", snap.corpus.len());
    println!("skipped files: {}", snap.corpus.failures().len());
    for f in snap.corpus.failures() {
        println!("  {}: {}", f.path.display(), f.error);
    }
    println!("faq entries: {} ({} stale)", snap.faq.len(), stale);
    println!("synonym groups: {}", snap.rewrite_rules.synonym_groups());
    println!("jargon terms: {}", snap.rewrite_rules.jargon_terms());
    Ok(Status::Ok)
}

fn write_json(out: Option<&Path>, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}")?;
            Ok(())
        }
    }
}

fn regress(mut config: AppConfig, args: RegressArgs) -> anyhow::Result<Status> {
    if let Some(c) = args.corpus {
        config.corpus_root = c;
    }
    let cases = load_cases(&args.cases)?;
    let mut options: RegressionOptions = config.regression.clone();
    if let Some(p) = args.parallelism {
        options.parallelism = p;
    }
    options.gates.token_f1 = args.min_token_f1.or(options.gates.token_f1);
    options.gates.bleu = args.min_bleu.or(options.gates.bleu);
    options.gates.rouge_l = args.min_rouge_l.or(options.gates.rouge_l);

    let snapshot = load_snapshot(&config)?;
    let clients = build_clients(&config, args.live)?;
    let pipeline = Pipeline::new(snapshot, clients, Vec::new(), config.pipeline.clone());
    let report = run_regression(&cases, &pipeline, &options)?;
    write_json(args.out.as_deref(), &report)?;
    let a = &report.aggregates;
    eprintln!(
        "{} cases, {} failed; hit rate {:.2}, token F1 {:.3}, BLEU {:.3}, ROUGE-L {:.3}",
        a.cases, a.failed, a.hit_rate, a.token_f1, a.bleu, a.rouge_l
    );
    Ok(if report.all_passed() { Status::Ok } else { Status::Failures })
}

fn topic_files(paths: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("reading {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| topicrag::corpus::MarkupFormat::from_path(f).is_some())
                .collect();
            found.sort();
            out.extend(found);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            bail!("{} does not exist", p.display());
        }
    }
    Ok(out)
}

fn lint(config: &AppConfig, paths: &[PathBuf], json: bool) -> anyhow::Result<Status> {
    let mut errors = 0;
    let mut report = Vec::new();
    for file in topic_files(paths)? {
        let raw = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
        let topic = parse_topic_file(&raw, &file).with_context(|| format!("parsing {}", file.display()))?;
        let findings = lint_topic(&topic, &config.lint);
        errors += findings.iter().filter(|f| f.severity == Severity::Error).count();
        if !json {
            for f in &findings {
                let sev = match f.severity {
                    Severity::Error => "error",
                    Severity::Warning => "warning",
                };
                println!("{}:{}: {sev} [{}] {}", file.display(), f.line, f.guideline.as_str(), f.message);
            }
        }
        report.push(serde_json::json!({ "path": file, "topic_id": topic.id, "findings": findings }));
    }
    if json {
        write_json(None, &report)?;
    } else {
        let total: usize = report.iter().map(|r| r["findings"].as_array().map_or(0, |a| a.len())).sum();
        println!("{} files, {total} findings, {errors} errors", report.len());
    }
    Ok(if errors > 0 { Status::Failures } else { Status::Ok })
}

fn read_questions(path: &Path) -> anyhow::Result<Vec<String>> {
    let raw = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let questions: Vec<String> = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()))?
    } else {
        raw.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect()
    };
    if questions.is_empty() {
        bail!("{} holds no questions", path.display());
    }
    Ok(questions)
}

fn coverage(config: &AppConfig, args: CoverageArgs) -> anyhow::Result<Status> {
    let raw = std::fs::read_to_string(&args.topic).with_context(|| format!("reading {}", args.topic.display()))?;
    let draft = parse_topic_file(&raw, &args.topic).with_context(|| format!("parsing {}", args.topic.display()))?;
    let questions = read_questions(&args.questions)?;
    let clients = build_clients(config, args.live)?;
    let client = &clients.generators[0];
    let threshold = args.threshold.unwrap_or(config.coverage_threshold);
    let report = coverage_test(&draft, &questions, client, threshold)?;
    let answers = if args.answers {
        Some(grounded_answer_check(&draft, &questions, client)?)
    } else {
        None
    };
    if args.json {
        write_json(None, &serde_json::json!({ "coverage": report, "answers": answers }))?;
    } else {
        println!("coverage {:.2} at threshold {:.2}", report.coverage, report.threshold);
        for p in &report.best_pairs {
            let mark = if p.similarity >= threshold && p.best_generated.is_some() { "ok" } else { "MISSING" };
            println!(
                "  [{mark}] {} -> {} ({:.2})",
                p.real_question,
                p.best_generated.as_deref().unwrap_or("-"),
                p.similarity
            );
        }
        for a in answers.iter().flatten() {
            println!(
                "  answer {:?}: answerable={} groundedness={:.2} coverage={:.2}",
                a.question, a.answerable, a.groundedness, a.coverage
            );
        }
    }
    Ok(if report.unmatched_real.is_empty() { Status::Ok } else { Status::Failures })
}

fn period_from(args: &ReportArgs) -> anyhow::Result<Period> {
    let parse = |v: &Option<String>| -> anyhow::Result<_> {
        match v {
            None => Ok(None),
            Some(s) => parse_time(s).map(Some).with_context(|| format!("bad time {s:?}")),
        }
    };
    Ok(Period {
        from: parse(&args.from)?,
        to: parse(&args.to)?,
    })
}

fn open_store(config: &AppConfig) -> anyhow::Result<EvalStore> {
    let Some(dir) = &config.eval_dir else {
        bail!("eval_dir is not configured");
    };
    EvalStore::open(dir).with_context(|| format!("opening eval store {}", dir.display()))
}

fn report(config: &AppConfig, args: ReportArgs) -> anyhow::Result<Status> {
    let mut period = period_from(&args)?;
    match args.kind {
        ReportKind::Funnel => {
            let store = open_store(config)?;
            match funnel_report(store.records(), period) {
                Ok(r) => write_json(args.out.as_deref(), &r)?,
                Err(EvalError::EmptyPeriod) => {
                    eprintln!("no records in the requested period");
                    return Ok(Status::Failures);
                }
                Err(e) => return Err(e.into()),
            }
        }
        ReportKind::Usage => {
            let Some(path) = &config.response_log else {
                bail!("response_log is not configured");
            };
            let bucket: Bucket = args.bucket.parse().map_err(anyhow::Error::msg)?;
            let lines = read_log(path).with_context(|| format!("reading {}", path.display()))?;
            let stats = log_stats(lines, period, bucket);
            if stats.buckets.is_empty() {
                eprintln!("no log lines in the requested period");
                return Ok(Status::Failures);
            }
            write_json(args.out.as_deref(), &stats)?;
        }
        ReportKind::Weekly => {
            // Default to the seven days ending now.
            if period.from.is_none() && period.to.is_none() {
                let now = Utc::now();
                period = Period::between(now - Duration::days(7), now);
            }
            let store = open_store(config)?;
            let records: Vec<_> = store.records().into_iter().filter(|r| period.contains(r.created_at)).collect();
            if records.is_empty() {
                eprintln!("no records in the requested period");
                return Ok(Status::Failures);
            }
            let app_webhook = config.webhook.as_ref().map(|w| topicrag::client::HttpWebhook {
                url: w.url.clone(),
                timeout: std::time::Duration::from_millis(w.timeout_ms),
            });
            match app_webhook {
                Some(hook) => {
                    let d = weekly_summary(&records, period, &hook, &config.summary_dir)?;
                    match &d.local_copy {
                        Some(p) => eprintln!("webhook failed; summary written to {}", p.display()),
                        None => eprintln!("summary posted"),
                    }
                    if let Some(out) = &args.out {
                        write_json(Some(out), &d.summary)?;
                    }
                }
                None => write_json(args.out.as_deref(), &build_weekly_summary(&records, period))?,
            }
        }
    }
    Ok(Status::Ok)
}

fn export(config: &AppConfig, kind: ExportKind, out: &Path) -> anyhow::Result<Status> {
    let store = open_store(config)?;
    match export_datasets(store.records(), kind, out) {
        Ok(s) => {
            eprintln!("wrote {} rows to {} ({} records excluded)", s.written, out.display(), s.excluded);
            Ok(Status::Ok)
        }
        Err(e @ EvalError::NothingToExport(_)) => {
            eprintln!("{e}");
            Ok(Status::Failures)
        }
        Err(e) => Err(e.into()),
    }
}
