mod common;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use common::bridge_stub::{spawn_tcp, Stub};
use markabsa_core::experiment::{run_experiment, ExperimentConfig, ExperimentError, ScorerSpec};
use markabsa_core::scorers::{NoiseScorer, WordTokenizer};
use markabsa_core::token::{Scorer, TokenId, Tokenizer};
use markabsa_core::{CategoryInventory, Lexicalization, Task};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn config(out: &Path, scorer: ScorerSpec) -> ExperimentConfig {
    ExperimentConfig {
        task: Task::Tasd,
        source_lang: "en".into(),
        target_lang: "es".into(),
        source_train: fixture("en_train.jsonl"),
        target_train: fixture("es_train.jsonl"),
        target_test: fixture("es_test.jsonl"),
        fewshot: vec![0, 1, 5],
        seeds: vec![1, 2, 3],
        scorer,
        output_dir: out.to_path_buf(),
        workers: 2,
        ..Default::default()
    }
}

fn read_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

#[test]
fn oracle_scores_perfectly_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    for task in Task::ALL {
        let cfg = ExperimentConfig {
            task,
            ..config(dir.path(), ScorerSpec::Oracle)
        };
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.failed(), 0);
        assert_eq!(report.results.len(), 3 * 2 * 3);
        for r in &report.results {
            assert_eq!(r.outcome.as_ref().unwrap().score.f1, 1.0, "{:?}", r.cell);
        }
    }
}

#[test]
fn constraints_beat_adversarial_substitutions() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&config(dir.path(), ScorerSpec::Adversarial)).unwrap();
    for on in report.results.iter().filter(|r| r.cell.constrained) {
        let off = report
            .results
            .iter()
            .find(|r| !r.cell.constrained && r.cell.n_fewshot == on.cell.n_fewshot && r.cell.seed == on.cell.seed)
            .unwrap();
        let (on_f1, off_f1) = (
            on.outcome.as_ref().unwrap().score.f1,
            off.outcome.as_ref().unwrap().score.f1,
        );
        assert!(on_f1 > off_f1, "{on_f1} vs {off_f1}");
    }
}

#[test]
fn every_cell_once_and_failures_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        fewshot: vec![0, 8, 9],
        monolingual: true,
        ..config(dir.path(), ScorerSpec::Oracle)
    };
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.failed(), 6);
    let rows = read_rows(&dir.path().join("runs.csv"));
    assert_eq!(rows.len(), (3 + 1) * 2 * 3);
    let mut keys: Vec<String> = rows
        .iter()
        .map(|r| format!("{}|{}|{}|{}|{}", &r[1], &r[2], &r[3], &r[4], &r[5]))
        .collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), rows.len());
    for r in &rows {
        let expect = if &r[3] == "9" { "failed" } else { "ok" };
        assert_eq!(&r[9], expect);
    }
    assert!(rows.iter().any(|r| &r[1] == "es" && &r[2] == "es" && &r[3] == "8"));

    let curve = read_rows(&dir.path().join("curve.csv"));
    assert_eq!(curve.len(), 4 * 2);
    assert!(curve.iter().any(|r| &r[0] == "mono"));
    let agg = read_rows(&dir.path().join("aggregate.csv"));
    assert!(agg.iter().all(|r| &r[8] == "normal-1.96"));
}

#[test]
fn sweeps_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_experiment(&config(a.path(), ScorerSpec::Adversarial)).unwrap();
    let mut cfg = config(b.path(), ScorerSpec::Adversarial);
    cfg.workers = 5;
    let rb = run_experiment(&cfg).unwrap();
    assert_eq!(ra.files.len(), 4);
    for (fa, fb) in ra.files.iter().zip(&rb.files) {
        assert_eq!(
            std::fs::read(fa).unwrap(),
            std::fs::read(fb).unwrap(),
            "{}",
            fa.display()
        );
    }
}

#[test]
fn missing_corpus_stops_before_any_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut cfg = config(&out, ScorerSpec::Oracle);
    cfg.target_test = dir.path().join("absent.jsonl");
    assert!(matches!(run_experiment(&cfg), Err(ExperimentError::MissingCorpus(_))));
    assert!(!out.exists());
}

#[test]
fn unreachable_bridge_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), ScorerSpec::Bridge(Some("cmd:/nonexistent/server".into())));
    assert!(matches!(
        run_experiment(&cfg),
        Err(ExperimentError::BridgeUnreachable(_))
    ));
}

#[test]
fn sweep_over_bridge() {
    let inv = CategoryInventory::semeval_restaurants();
    let lex = Lexicalization::default();
    let files = ["en_train.jsonl", "es_train.jsonl", "es_test.jsonl"];
    let mut examples = Vec::new();
    for f in files {
        examples.extend(markabsa_core::corpus::read_jsonl(&std::fs::read_to_string(fixture(f)).unwrap()).unwrap());
    }
    let tok = WordTokenizer::for_corpus(&examples, &inv, &lex);
    let vocab = tok.vocab_size();
    let addr = spawn_tcp(Stub {
        tok,
        model: Arc::new(move |input: &[TokenId], prefix: &[TokenId]| {
            NoiseScorer::new(5, vocab)
                .next_scores(input, prefix)
                .unwrap()
                .into_iter()
                .map(|s| s as f64)
                .collect()
        }),
        k: 50,
        oom_at: None,
    });
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), ScorerSpec::Bridge(Some(addr)));
    cfg.fewshot = vec![0];
    cfg.seeds = vec![1];
    cfg.max_len = 200;
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.failed(), 0);
    let constrained = report.results.iter().find(|r| r.cell.constrained).unwrap();
    let eval = constrained.outcome.as_ref().unwrap();
    assert_eq!(eval.parse_diagnostics, 0);
}
