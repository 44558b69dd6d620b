use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use topicrag::evalstore::{VerdictPatch, VerdictValue, Criterion};
use topicrag::pipeline::AskRequest;
use topicrag_cli::app::App;
use topicrag_cli::cli::run;
use topicrag_cli::config::AppConfig;

fn core_fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(rel)
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn topicrag(args: &[&str]) -> i32 {
    run(std::iter::once("topicrag").chain(args.iter().copied()))
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn regress_all_passing_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let code = topicrag(&[
        "regress",
        "--cases",
        &s(&core_fixture("co2_cases.jsonl")),
        "--corpus",
        &s(&core_fixture("co2/edited")),
        "--out",
        &s(&out),
    ]);
    assert_eq!(code, 0);
    let report = read_json(&out);
    assert_eq!(report["aggregates"]["cases"], 2);
    assert_eq!(report["aggregates"]["failed"], 0);
    assert!(report["config_hash"].as_str().is_some_and(|h| h.len() == 64));
}

#[test]
fn regress_with_a_failing_case_exits_1_and_still_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/report.json");
    let code = topicrag(&[
        "regress",
        "--cases",
        &s(&core_fixture("co2_cases.jsonl")),
        "--corpus",
        &s(&core_fixture("co2/edited")),
        "--out",
        &s(&out),
        "--min-bleu",
        "0.99",
        "--parallelism",
        "1",
    ]);
    assert_eq!(code, 1);
    assert!(read_json(&out)["aggregates"]["failed"].as_u64().unwrap() > 0);
}

#[test]
fn usage_and_input_errors_exit_2() {
    assert_eq!(topicrag(&["regress", "--cases", "x.jsonl", "--bogus"]), 2);
    assert_eq!(topicrag(&["regress"]), 2);
    assert_eq!(topicrag(&["dance"]), 2);
    assert_eq!(topicrag(&["regress", "--cases", "/nonexistent/cases.jsonl"]), 2);
    assert_eq!(topicrag(&["--config", "/nonexistent/topicrag.toml", "ingest"]), 2);
    assert_eq!(topicrag(&["report", "funnel"]), 2, "no eval_dir configured");
    assert_eq!(topicrag(&["--version"]), 0);
}

#[test]
fn bad_case_lines_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = dir.path().join("cases.jsonl");
    std::fs::write(&cases, "{\"question\":\"q\",\"expected_topic_ids\":[],\"expected_answer\":\"a\"}\n").unwrap();
    let code = topicrag(&["regress", "--cases", &s(&cases), "--corpus", &s(&core_fixture("docs"))]);
    assert_eq!(code, 2);
}

#[test]
fn ingest_prints_counts() {
    assert_eq!(topicrag(&["ingest", "--corpus", &s(&core_fixture("docs"))]), 0);
    assert_eq!(topicrag(&["ingest", "--corpus", "/nonexistent/docs"]), 2);
}

#[test]
fn lint_exits_1_on_errors() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean.md");
    std::fs::write(&clean, "---\nid: clean\ntitle: Clean\n---\n# Clean\n\nTo start, do the following:\n\n1. Open it.\n2. Close it.\n").unwrap();
    assert_eq!(topicrag(&["lint", &s(&clean)]), 0);

    let bad = dir.path().join("bad.md");
    std::fs::write(&bad, "---\nid: bad\ntitle: Bad\n---\n# Bad\n\n- one\n- two\n").unwrap();
    assert_eq!(topicrag(&["lint", "--json", &s(dir.path())]), 1);
    assert_eq!(topicrag(&["lint", &s(&dir.path().join("missing.md"))]), 2);
}

#[test]
fn coverage_exits_1_when_questions_are_unmatched() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("questions.txt");
    std::fs::write(
        &q,
        "Where do I find my credentials?\nHow do I get my credentials?\nWhere can I look up my credentials?\n",
    )
    .unwrap();
    let draft = s(&core_fixture("drafts/credentials.md"));
    assert_eq!(topicrag(&["coverage", &draft, "--questions", &s(&q), "--answers"]), 1);
    // A threshold of zero matches whatever was generated.
    assert_eq!(topicrag(&["coverage", &draft, "--questions", &s(&q), "--threshold", "0", "--json"]), 0);
}

/// A config file whose eval store holds two answered records, one fully
/// evaluated as good.
fn evaluated_store(dir: &Path) -> PathBuf {
    let config = AppConfig {
        corpus_root: core_fixture("docs"),
        eval_dir: Some(dir.join("eval")),
        response_log: Some(dir.join("responses.jsonl")),
        summary_dir: dir.join("summaries"),
        ..AppConfig::default()
    };
    let path = dir.join("topicrag.json");
    std::fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();
    let app = App::build(config).unwrap();
    let a = app.pipeline.answer_question(&AskRequest::new("how do I create an API key?"));
    app.pipeline.answer_question(&AskRequest::new("how do I create a project?"));
    let patch = Criterion::ALL.iter().fold(VerdictPatch::default(), |p, c| p.with(*c, VerdictValue::Yes));
    app.store
        .lock()
        .unwrap()
        .annotate(&a.request_id, patch, vec![], vec!["keys".into()], "ana")
        .unwrap();
    path
}

#[test]
fn reports_and_exports_from_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let config = s(&evaluated_store(dir.path()));

    let funnel = dir.path().join("funnel.json");
    assert_eq!(topicrag(&["--config", &config, "report", "funnel", "--out", &s(&funnel)]), 0);
    let f = read_json(&funnel);
    assert_eq!((f["total"].clone(), f["excluded"].clone()), (json!(1), json!(1)));
    assert_eq!(topicrag(&["--config", &config, "report", "funnel", "--to", "2001-01-01"]), 1);

    let usage = dir.path().join("usage.json");
    assert_eq!(topicrag(&["--config", &config, "report", "usage", "--bucket", "week", "--out", &s(&usage)]), 0);
    assert_eq!(read_json(&usage)["buckets"][0]["responses"], 2);
    assert_eq!(topicrag(&["--config", &config, "report", "usage", "--bucket", "year"]), 2);

    let weekly = dir.path().join("weekly.json");
    assert_eq!(topicrag(&["--config", &config, "report", "weekly", "--out", &s(&weekly)]), 0);
    assert_eq!(read_json(&weekly)["records"], 2);

    let triplets = dir.path().join("triplets.jsonl");
    assert_eq!(topicrag(&["--config", &config, "export", "--kind", "triplets", "--out", &s(&triplets)]), 0);
    let rows = topicrag::evalstore::read_triplets(&triplets).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].topic_ids[0], "api-keys");
}

#[test]
fn export_with_nothing_qualifying_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = AppConfig {
        eval_dir: Some(dir.path().join("eval")),
        ..AppConfig::default()
    };
    let path = dir.path().join("c.json");
    std::fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();
    let out = dir.path().join("t.jsonl");
    assert_eq!(topicrag(&["--config", &s(&path), "export", "--kind", "triplets", "--out", &s(&out)]), 1);
}

#[test]
fn weekly_summary_falls_back_to_a_file_when_the_webhook_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = evaluated_store(dir.path());
    let mut config: Value = read_json(&path);
    // Nothing listens on port 9 of localhost.
    config["webhook"] = json!({ "url": "http://127.0.0.1:9/hook", "timeout_ms": 500 });
    std::fs::write(&path, config.to_string()).unwrap();
    assert_eq!(topicrag(&["--config", &s(&path), "report", "weekly"]), 0);
    let written: Vec<_> = std::fs::read_dir(dir.path().join("summaries")).unwrap().collect();
    assert_eq!(written.len(), 1);
}

#[test]
fn the_binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_topicrag");
    let status = |args: &[&str]| std::process::Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["--unknown-flag"]), Some(2));
    assert_eq!(status(&["help"]), Some(0));
    assert_eq!(status(&["ingest", "--corpus", &s(&core_fixture("docs"))]), Some(0));
}
