mod common;

use common::{corpus, fixture};
use topicrag::pipeline::{Outcome, Pipeline};
use topicrag::regression::{load_cases, run_regression, Gates, RegressionOptions};

fn run(rel: &str, options: &RegressionOptions) -> topicrag::regression::RegressionReport {
    let cases = load_cases(&fixture("co2_cases.jsonl")).unwrap();
    let p = Pipeline::with_defaults(corpus(rel)).unwrap();
    run_regression(&cases, &p, options).unwrap()
}

#[test]
fn edited_corpus_passes_both_cases() {
    let report = run("co2/edited", &RegressionOptions::default());
    assert!(report.all_passed(), "{report:#?}");
    let co2 = &report.cases[0];
    assert_eq!(co2.outcome, Outcome::Answered);
    assert!(co2.retrieval_hit);
    assert_eq!(co2.hit_ids[0], "earth-co2");
    assert!(co2.answer_text.contains("280 parts per million"), "{}", co2.answer_text);
    assert!(co2.token_f1 > 0.0);
    assert_eq!(report.aggregates.hit_rate, 1.0);
}

#[test]
fn gates_fail_low_scoring_cases() {
    let options = RegressionOptions {
        gates: Gates {
            bleu: Some(0.99),
            ..Gates::default()
        },
        ..RegressionOptions::default()
    };
    let report = run("co2/edited", &options);
    assert_eq!(report.aggregates.failed, 2);
    assert!(!report.all_passed());
}

#[test]
fn aggregates_are_means_of_cases() {
    let report = run("co2/original", &RegressionOptions::default());
    let n = report.cases.len() as f64;
    let mean = |f: fn(&topicrag::regression::CaseResult) -> f64| report.cases.iter().map(f).sum::<f64>() / n;
    assert!((report.aggregates.token_f1 - mean(|c| c.token_f1)).abs() < 1e-12);
    assert!((report.aggregates.bleu - mean(|c| c.bleu)).abs() < 1e-12);
    assert!((report.aggregates.rouge_l - mean(|c| c.rouge_l)).abs() < 1e-12);
    for c in &report.cases {
        for m in [c.exact_match, c.token_f1, c.bleu, c.rouge_l] {
            assert!((0.0..=1.0).contains(&m));
        }
    }
}

#[test]
fn reports_are_identical_apart_from_the_timestamp() {
    let one_thread = RegressionOptions {
        parallelism: 1,
        ..RegressionOptions::default()
    };
    let mut a = serde_json::to_value(run("co2/edited", &one_thread)).unwrap();
    let mut b = serde_json::to_value(run("co2/edited", &RegressionOptions::default())).unwrap();
    a["generated_at"] = serde_json::Value::Null;
    b["generated_at"] = serde_json::Value::Null;
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn config_hash_tracks_corpus_content() {
    let a = run("co2/original", &RegressionOptions::default());
    let b = run("co2/edited", &RegressionOptions::default());
    assert_ne!(a.config_hash, b.config_hash);
    assert_eq!(a.config_hash, run("co2/original", &RegressionOptions::default()).config_hash);
}
