//! Few-shot sweeps: for every (few-shot count, constrained flag, seed) cell,
//! build the training mixture, decode the target test set, score it and
//! write the report CSVs.
//!
//! Configuration is line-oriented `key = value`; `#` starts a comment line.
//!
//! ```text
//! task = tasd
//! source_lang = en
//! target_lang = es
//! source_train = data/en_train.jsonl
//! target_train = data/es_train.jsonl
//! target_test = data/es_test.jsonl
//! fewshot = 0,1,2,5,10,20,100
//! constrained = off,on
//! seeds = 1,2,3,4,5
//! scorer = oracle
//! output_dir = out
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::bridge::{BridgeClient, BRIDGE_ENV};
use crate::corpus::{self, few_shot_mix, ingest_semeval, load_jsonl, Dataset, MixRecipe, Split};
use crate::decode::{DecodeConfig, Session, StopReason, DEFAULT_MAX_LEN};
use crate::domain::{project, CategoryInventory, Example, Lexicalization, Task, TaskTuple};
use crate::eval::{aggregate, classify_errors, count_errors, micro_f1, ErrorKind, RunScore, CI_METHOD};
use crate::format::{build_target, parse_output};
use crate::scorers::{out_of_input_word, AdversarialScorer, ScriptedScorer, WordTokenizer};
use crate::token::{Scorer, TokenId, Tokenizer};

pub const DEFAULT_FEWSHOT: [usize; 7] = [0, 1, 2, 5, 10, 20, 100];
pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("missing corpus {0}")]
    MissingCorpus(PathBuf),
    #[error("corpus {path}: {source}")]
    Corpus {
        path: PathBuf,
        #[source]
        source: corpus::CorpusError,
    },
    #[error("inventory {path}: {message}")]
    Inventory { path: PathBuf, message: String },
    #[error("bridge unreachable: {0}")]
    BridgeUnreachable(String),
    #[error("writing reports: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Where next-token scores come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScorerSpec {
    /// Replays each gold target exactly.
    Oracle,
    /// Replays gold targets but prefers an out-of-input word at the first
    /// token of every explicit term, ranking the gold token second.
    Adversarial,
    /// Remote model server; `None` reads the address from the environment.
    Bridge(Option<String>),
}

impl FromStr for ScorerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" | "scripted" => Ok(ScorerSpec::Oracle),
            "adversarial" => Ok(ScorerSpec::Adversarial),
            "bridge" => Ok(ScorerSpec::Bridge(None)),
            other => match other.strip_prefix("bridge:") {
                Some(addr) if !addr.is_empty() => Ok(ScorerSpec::Bridge(Some(addr.to_string()))),
                _ => Err(format!("unknown scorer {other:?}")),
            },
        }
    }
}

impl ScorerSpec {
    pub fn bridge_address(&self) -> Option<String> {
        match self {
            ScorerSpec::Bridge(Some(a)) => Some(a.clone()),
            ScorerSpec::Bridge(None) => std::env::var(BRIDGE_ENV).ok(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub source_lang: String,
    pub target_lang: String,
    pub source_train: PathBuf,
    pub target_train: PathBuf,
    pub target_test: PathBuf,
    pub inventory: Option<PathBuf>,
    pub fewshot: Vec<usize>,
    pub constrained: Vec<bool>,
    pub seeds: Vec<u64>,
    pub scorer: ScorerSpec,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub max_len: usize,
    /// Adds reference cells trained on the full target training set.
    pub monolingual: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Tasd,
            source_lang: "en".into(),
            target_lang: String::new(),
            source_train: PathBuf::new(),
            target_train: PathBuf::new(),
            target_test: PathBuf::new(),
            inventory: None,
            fewshot: DEFAULT_FEWSHOT.to_vec(),
            constrained: vec![false, true],
            seeds: DEFAULT_SEEDS.to_vec(),
            scorer: ScorerSpec::Oracle,
            output_dir: PathBuf::from("out"),
            workers: 1,
            max_len: DEFAULT_MAX_LEN,
            monolingual: false,
        }
    }
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse().map_err(|_| format!("bad list item {v:?}")))
        .collect()
}

fn parse_flag(value: &str) -> Result<bool, String> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected on/off, got {other:?}")),
    }
}

impl ExperimentConfig {
    /// Parses a config file body. Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ExperimentError> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| ExperimentError::Config { line: idx + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            cfg.set(key.trim(), value.trim(), base).map_err(err)?;
        }
        Ok(cfg)
    }

    /// Sets one key; used for config lines and command-line overrides.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), String> {
        let path = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        match key {
            "task" => self.task = value.parse().map_err(|e: crate::domain::DomainError| e.to_string())?,
            "source_lang" => self.source_lang = value.to_string(),
            "target_lang" => self.target_lang = value.to_string(),
            "source_train" => self.source_train = path(value),
            "target_train" => self.target_train = path(value),
            "target_test" => self.target_test = path(value),
            "inventory" => self.inventory = Some(path(value)),
            "fewshot" => self.fewshot = parse_list(value)?,
            "constrained" => {
                self.constrained = value
                    .split(',')
                    .map(str::trim)
                    .filter(|v| !v.is_empty())
                    .map(parse_flag)
                    .collect::<Result<_, _>>()?
            }
            "seeds" => self.seeds = parse_list(value)?,
            "scorer" => self.scorer = value.parse()?,
            "output_dir" => self.output_dir = path(value),
            "workers" => self.workers = value.parse().map_err(|_| format!("bad worker count {value:?}"))?,
            "max_len" => self.max_len = value.parse().map_err(|_| format!("bad max_len {value:?}"))?,
            "monolingual" => self.monolingual = parse_flag(value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let invalid = |m: &str| Err(ExperimentError::Invalid(m.to_string()));
        if self.fewshot.is_empty() || self.constrained.is_empty() || self.seeds.is_empty() {
            return invalid("fewshot, constrained and seeds must be non-empty");
        }
        if self.fewshot.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("fewshot counts must be strictly increasing");
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return invalid("seeds must be distinct");
        }
        if self.workers == 0 || self.max_len == 0 {
            return invalid("workers and max_len must be at least 1");
        }
        if self.target_lang.is_empty() {
            return invalid("target_lang is required");
        }
        Ok(())
    }
}

/// Reads JSONL, or SemEval XML when the file ends in `.xml`.
pub fn load_dataset(path: &Path, language: &str, split: Split) -> Result<Dataset, ExperimentError> {
    let bytes = fs::read(path).map_err(|_| ExperimentError::MissingCorpus(path.to_path_buf()))?;
    let corpus_err = |source| ExperimentError::Corpus {
        path: path.to_path_buf(),
        source,
    };
    if path.extension().is_some_and(|e| e == "xml") {
        ingest_semeval(&bytes, language, split).map_err(corpus_err)
    } else {
        let text = String::from_utf8(bytes).map_err(|e| {
            corpus_err(corpus::CorpusError::Jsonl {
                line: 0,
                message: e.to_string(),
            })
        })?;
        load_jsonl(&text, language, split).map_err(corpus_err)
    }
}

pub fn load_inventory(path: Option<&Path>, lex: &Lexicalization) -> Result<CategoryInventory, ExperimentError> {
    let inventory = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| ExperimentError::Inventory {
                path: p.to_path_buf(),
                message: e.to_string(),
            })?;
            CategoryInventory::parse(&text).map_err(|e| ExperimentError::Inventory {
                path: p.to_path_buf(),
                message: e.to_string(),
            })?
        }
        None => CategoryInventory::semeval_restaurants(),
    };
    inventory.check_against(lex).map_err(|e| ExperimentError::Inventory {
        path: path.map(Path::to_path_buf).unwrap_or_default(),
        message: e.to_string(),
    })?;
    Ok(inventory)
}

/// One generated output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub id: String,
    pub language: String,
    pub output: String,
    pub stop: StopReason,
}

/// Token decoder shared by every example of a run.
pub enum Backend<'a> {
    InProcess { tok: &'a WordTokenizer, adversarial: bool },
    Bridge(&'a BridgeClient),
}

/// Positions right after each `[A]` marker whose term is not the implicit word.
fn explicit_term_steps(target: &[TokenId], marker: TokenId, implicit: &[TokenId]) -> Vec<usize> {
    target
        .iter()
        .enumerate()
        .filter(|&(i, &t)| t == marker && !target[i + 1..].starts_with(implicit))
        .map(|(i, _)| i + 1)
        .filter(|&i| i < target.len())
        .collect()
}

/// Builds the in-process scorer for one example.
pub fn scripted_scorer_for(
    example: &Example,
    task: Task,
    tok: &WordTokenizer,
    lex: &Lexicalization,
    adversarial: bool,
) -> Result<Box<dyn Scorer>, String> {
    let target = build_target(&project(example, task), task, lex).map_err(|e| e.to_string())?;
    let base = ScriptedScorer::new(&target, tok).map_err(|e| e.to_string())?;
    if !adversarial {
        return Ok(Box::new(base));
    }
    let Some(wrong) = out_of_input_word(tok, &example.text, lex).and_then(|w| tok.id(w)) else {
        return Ok(Box::new(base));
    };
    let marker = tok
        .id(crate::domain::Element::Aspect.marker())
        .expect("markers are in the vocabulary");
    let implicit = tok.encode(lex.implicit_word()).map_err(|e| e.to_string())?;
    let substitutions: BTreeMap<usize, TokenId> = explicit_term_steps(base.target(), marker, &implicit)
        .into_iter()
        .map(|step| (step, wrong))
        .collect();
    Ok(Box::new(
        AdversarialScorer::new(base, substitutions).map_err(|e| e.to_string())?,
    ))
}

/// Decodes every example of `test`.
pub fn decode_examples(
    test: &[Example],
    task: Task,
    backend: &Backend<'_>,
    inventory: &CategoryInventory,
    lex: &Lexicalization,
    cfg: DecodeConfig,
) -> Result<Vec<Prediction>, String> {
    test.iter()
        .map(|example| {
            let out = match backend {
                Backend::InProcess { tok, adversarial } => {
                    let session = Session::new(*tok, &example.text, task, inventory, lex).map_err(|e| e.to_string())?;
                    let mut scorer = scripted_scorer_for(example, task, tok, lex, *adversarial)?;
                    session.decode(&mut scorer, cfg)
                }
                Backend::Bridge(client) => {
                    let session =
                        Session::new(*client, &example.text, task, inventory, lex).map_err(|e| e.to_string())?;
                    let mut scorer = *client;
                    session.decode(&mut scorer, cfg)
                }
            }
            .map_err(|e| format!("example {:?}: {e}", example.id))?;
            Ok(Prediction {
                id: example.id.clone(),
                language: example.language.clone(),
                output: out.text,
                stop: out.stop,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub score: RunScore,
    pub errors: Vec<(ErrorKind, usize)>,
    pub parse_diagnostics: usize,
}

/// Parses predictions against their examples and scores them. Predictions
/// are matched to examples by position.
pub fn evaluate_predictions(
    test: &[Example],
    outputs: &[&str],
    task: Task,
    inventory: &CategoryInventory,
    lex: &Lexicalization,
) -> Result<Evaluation, crate::eval::EvalError> {
    let mut preds: Vec<Vec<TaskTuple>> = Vec::with_capacity(outputs.len());
    let mut golds: Vec<Vec<TaskTuple>> = Vec::with_capacity(test.len());
    let mut records = Vec::new();
    let mut parse_diagnostics = 0;
    for (example, output) in test.iter().zip(outputs) {
        let parsed = parse_output(output, task, &example.text, lex, inventory);
        parse_diagnostics += parsed.diagnostics.len();
        let gold = project(example, task);
        records.extend(classify_errors(&parsed.tuples, &gold, &example.text));
        preds.push(parsed.tuples);
        golds.push(gold);
    }
    if outputs.len() != test.len() {
        return Err(crate::eval::EvalError::LengthMismatch {
            predictions: outputs.len(),
            golds: test.len(),
        });
    }
    Ok(Evaluation {
        score: micro_f1(&preds, &golds)?,
        errors: count_errors(&records),
        parse_diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Setup {
    CrossLingual,
    Monolingual,
}

impl Setup {
    fn name(self) -> &'static str {
        match self {
            Setup::CrossLingual => "crosslingual",
            Setup::Monolingual => "mono",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub setup: Setup,
    pub n_fewshot: usize,
    pub constrained: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub train_size: usize,
    pub outcome: Result<Evaluation, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub results: Vec<CellResult>,
    pub files: Vec<PathBuf>,
}

impl SweepReport {
    pub fn failed(&self) -> usize {
        self.results.iter().filter(|r| r.outcome.is_err()).count()
    }
}

fn cells(cfg: &ExperimentConfig, target_train_len: usize) -> Vec<Cell> {
    let mut setups: Vec<(Setup, usize)> = cfg.fewshot.iter().map(|&n| (Setup::CrossLingual, n)).collect();
    if cfg.monolingual {
        setups.push((Setup::Monolingual, target_train_len));
    }
    let mut out = Vec::new();
    for (setup, n) in setups {
        for &constrained in &cfg.constrained {
            for &seed in &cfg.seeds {
                out.push(Cell {
                    setup,
                    n_fewshot: n,
                    constrained,
                    seed,
                });
            }
        }
    }
    out
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    source: &'a Dataset,
    target_train: &'a Dataset,
    test: &'a [Example],
    inventory: &'a CategoryInventory,
    lex: &'a Lexicalization,
}

fn run_cell(ctx: &Context<'_>, backend: &Backend<'_>, cell: &Cell) -> CellResult {
    let mixture = match cell.setup {
        Setup::CrossLingual => few_shot_mix(MixRecipe {
            source: ctx.source,
            target: ctx.target_train,
            n_target: cell.n_fewshot,
        })
        .map_err(|e| e.to_string()),
        Setup::Monolingual => Ok(ctx.target_train.clone()),
    };
    let train_size = mixture.as_ref().map_or(0, Dataset::len);
    let decode_cfg = DecodeConfig {
        constrained: cell.constrained,
        max_len: ctx.cfg.max_len,
    };
    let outcome = mixture.and_then(|_| {
        let preds = decode_examples(ctx.test, ctx.cfg.task, backend, ctx.inventory, ctx.lex, decode_cfg)?;
        let outputs: Vec<&str> = preds.iter().map(|p| p.output.as_str()).collect();
        evaluate_predictions(ctx.test, &outputs, ctx.cfg.task, ctx.inventory, ctx.lex).map_err(|e| e.to_string())
    });
    CellResult {
        cell: cell.clone(),
        train_size,
        outcome,
    }
}

fn fmt_score(x: f64) -> String {
    format!("{x:.6}")
}

/// Runs the configured sweep and writes `runs.csv`, `aggregate.csv`,
/// `errors.csv` and `curve.csv` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SweepReport, ExperimentError> {
    cfg.validate()?;
    let lex = Lexicalization::default();
    let inventory = load_inventory(cfg.inventory.as_deref(), &lex)?;
    for p in [&cfg.source_train, &cfg.target_train, &cfg.target_test] {
        if !p.is_file() {
            return Err(ExperimentError::MissingCorpus(p.clone()));
        }
    }
    let source = load_dataset(&cfg.source_train, &cfg.source_lang, Split::Train)?;
    let target_train = load_dataset(&cfg.target_train, &cfg.target_lang, Split::Train)?;
    let test = load_dataset(&cfg.target_test, &cfg.target_lang, Split::Test)?;

    let bridge_addr = match &cfg.scorer {
        ScorerSpec::Bridge(_) => Some(cfg.scorer.bridge_address().ok_or_else(|| {
            ExperimentError::BridgeUnreachable(format!("no address given and {BRIDGE_ENV} is unset"))
        })?),
        _ => None,
    };
    let tokenizer = WordTokenizer::for_corpus(
        source
            .examples()
            .iter()
            .chain(target_train.examples())
            .chain(test.examples()),
        &inventory,
        &lex,
    );

    let ctx = Context {
        cfg,
        source: &source,
        target_train: &target_train,
        test: test.examples(),
        inventory: &inventory,
        lex: &lex,
    };
    let all_cells = cells(cfg, target_train.len());
    let workers = cfg.workers.min(all_cells.len()).max(1);

    let mut clients = Vec::new();
    if let Some(addr) = &bridge_addr {
        for w in 0..workers {
            clients.push(
                BridgeClient::connect(addr, &format!("worker-{w}"))
                    .map_err(|e| ExperimentError::BridgeUnreachable(e.to_string()))?,
            );
        }
    }

    let mut slots: Vec<Option<CellResult>> = vec![None; all_cells.len()];
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let ctx = &ctx;
                let all_cells = &all_cells;
                let tokenizer = &tokenizer;
                let client = clients.get(w);
                scope.spawn(move || {
                    let backend = match client {
                        Some(c) => Backend::Bridge(c),
                        None => Backend::InProcess {
                            tok: tokenizer,
                            adversarial: cfg.scorer == ScorerSpec::Adversarial,
                        },
                    };
                    all_cells
                        .iter()
                        .enumerate()
                        .skip(w)
                        .step_by(workers)
                        .map(|(i, cell)| (i, run_cell(ctx, &backend, cell)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    let results: Vec<CellResult> = slots.into_iter().map(|r| r.expect("every cell ran")).collect();

    fs::create_dir_all(&cfg.output_dir)?;
    let files = write_reports(cfg, &results)?;
    Ok(SweepReport { results, files })
}

fn langs(cfg: &ExperimentConfig, setup: Setup) -> (&str, &str) {
    match setup {
        Setup::CrossLingual => (&cfg.source_lang, &cfg.target_lang),
        Setup::Monolingual => (&cfg.target_lang, &cfg.target_lang),
    }
}

fn write_reports(cfg: &ExperimentConfig, results: &[CellResult]) -> Result<Vec<PathBuf>, ExperimentError> {
    let task = cfg.task.name();
    let runs_path = cfg.output_dir.join("runs.csv");
    let mut runs = csv::Writer::from_path(&runs_path)?;
    runs.write_record([
        "task",
        "source_lang",
        "target_lang",
        "n_fewshot",
        "constrained",
        "seed",
        "P",
        "R",
        "F1",
        "status",
        "train_size",
        "n_pred",
        "n_gold",
        "n_correct",
        "parse_diagnostics",
        "error",
    ])?;
    let errors_path = cfg.output_dir.join("errors.csv");
    let mut errors = csv::Writer::from_path(&errors_path)?;
    errors.write_record([
        "task",
        "source_lang",
        "target_lang",
        "n_fewshot",
        "constrained",
        "seed",
        "kind",
        "count",
    ])?;

    // (setup, n, constrained) -> F1 per successful seed, in cell order
    let mut groups: BTreeMap<(Setup, usize, bool), Vec<f64>> = BTreeMap::new();
    for r in results {
        let c = &r.cell;
        let (src, tgt) = langs(cfg, c.setup);
        let key = [
            task.to_string(),
            src.to_string(),
            tgt.to_string(),
            c.n_fewshot.to_string(),
            c.constrained.to_string(),
            c.seed.to_string(),
        ];
        let group = groups.entry((c.setup, c.n_fewshot, c.constrained)).or_default();
        match &r.outcome {
            Ok(eval) => {
                let s = &eval.score;
                group.push(s.f1);
                let mut row = key.to_vec();
                row.extend([
                    fmt_score(s.precision),
                    fmt_score(s.recall),
                    fmt_score(s.f1),
                    "ok".into(),
                    r.train_size.to_string(),
                    s.n_pred.to_string(),
                    s.n_gold.to_string(),
                    s.n_correct.to_string(),
                    eval.parse_diagnostics.to_string(),
                    String::new(),
                ]);
                runs.write_record(&row)?;
                for (kind, count) in &eval.errors {
                    let mut row = key.to_vec();
                    row.extend([kind.name().to_string(), count.to_string()]);
                    errors.write_record(&row)?;
                }
            }
            Err(message) => {
                let mut row = key.to_vec();
                row.extend([
                    String::new(),
                    String::new(),
                    String::new(),
                    "failed".into(),
                    r.train_size.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    message.clone(),
                ]);
                runs.write_record(&row)?;
            }
        }
    }
    runs.flush()?;
    errors.flush()?;

    let aggregate_path = cfg.output_dir.join("aggregate.csv");
    let mut agg = csv::Writer::from_path(&aggregate_path)?;
    agg.write_record([
        "task",
        "source_lang",
        "target_lang",
        "n_fewshot",
        "constrained",
        "n_runs",
        "mean",
        "half_width",
        "ci_method",
    ])?;
    let curve_path = cfg.output_dir.join("curve.csv");
    let mut curve = csv::Writer::from_path(&curve_path)?;
    curve.write_record(["setup", "n_fewshot", "constrained", "mean_f1", "half_width", "n_runs"])?;
    for ((setup, n, constrained), f1s) in &groups {
        let (src, tgt) = langs(cfg, *setup);
        let (mean, half, n_runs) = match aggregate(f1s) {
            Ok(a) => (fmt_score(a.mean), fmt_score(a.half_width), a.n_runs),
            Err(_) => (String::new(), String::new(), 0),
        };
        agg.write_record([
            task,
            src,
            tgt,
            &n.to_string(),
            &constrained.to_string(),
            &n_runs.to_string(),
            &mean,
            &half,
            CI_METHOD,
        ])?;
        curve.write_record([
            setup.name(),
            &n.to_string(),
            &constrained.to_string(),
            &mean,
            &half,
            &n_runs.to_string(),
        ])?;
    }
    agg.flush()?;
    curve.flush()?;
    Ok(vec![runs_path, aggregate_path, errors_path, curve_path])
}
