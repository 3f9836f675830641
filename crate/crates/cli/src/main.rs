use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use markabsa_core::bridge::BridgeClient;
use markabsa_core::corpus::{
    self, few_shot_mix, split_dev, stats, write_jsonl, Dataset, MixRecipe, Split, SplitRounding,
};
use markabsa_core::decode::{DecodeConfig, StopReason, DEFAULT_MAX_LEN};
use markabsa_core::eval::ErrorKind;
use markabsa_core::experiment::{
    decode_examples, evaluate_predictions, load_dataset, load_inventory, run_experiment, Backend, Evaluation,
    ExperimentConfig, ExperimentError, Prediction, ScorerSpec,
};
use markabsa_core::scorers::WordTokenizer;
use markabsa_core::{Lexicalization, Task};

const EXIT_FAILURE: u8 = 1;
const EXIT_MISSING_CORPUS: u8 = 3;
const EXIT_BRIDGE: u8 = 4;
const EXIT_PARTIAL: u8 = 5;

#[derive(Parser)]
#[command(
    name = "markabsa",
    version,
    about = "Marker-based cross-lingual aspect sentiment extraction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rounding {
    Floor,
    Ceil,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a SemEval XML file to JSONL, optionally carving off a dev set.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        lang: String,
        #[arg(long, default_value = "train")]
        split: Split,
        #[arg(long, short)]
        out: PathBuf,
        /// Write the last tenth of the file here and keep the rest as train.
        #[arg(long)]
        dev_out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "floor")]
        rounding: Rounding,
    },
    /// Print sentence and tuple counts.
    Stats {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "und")]
        lang: String,
    },
    /// Append the first N target examples to a source training set.
    Mix {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, short)]
        n: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Generate marker sequences for every sentence of a dataset.
    Decode {
        input: PathBuf,
        #[arg(long, default_value = "tasd")]
        task: Task,
        /// oracle, adversarial, bridge or bridge:<address>
        #[arg(long, default_value = "oracle")]
        scorer: ScorerSpec,
        #[arg(long)]
        unconstrained: bool,
        #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
        max_len: usize,
        #[arg(long)]
        inventory: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Score predictions against gold tuples.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value = "tasd")]
        task: Task,
        #[arg(long)]
        inventory: Option<PathBuf>,
    },
    /// Count prediction errors by kind.
    Analyze {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value = "tasd")]
        task: Task,
        #[arg(long)]
        inventory: Option<PathBuf>,
    },
    /// Run a few-shot grid from a config file.
    Sweep {
        config: PathBuf,
        /// Override a config key, e.g. `--set workers=4`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn read_dataset(path: &Path, lang: &str, split: Split) -> Result<Dataset, ExperimentError> {
    load_dataset(path, lang, split)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn stop_name(stop: StopReason) -> &'static str {
    match stop {
        StopReason::EndToken => "end",
        StopReason::MaxLenReached => "max_len",
    }
}

fn write_predictions(path: &Path, preds: &[Prediction]) -> Result<()> {
    let mut out = String::new();
    for p in preds {
        let row = json!({ "id": p.id, "lang": p.language, "output": p.output, "stop": stop_name(p.stop) });
        out.push_str(&row.to_string());
        out.push('\n');
    }
    write_file(path, &out)
}

/// Reads predictions and orders their outputs by the gold example order.
fn read_predictions(path: &Path, gold: &Dataset) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut by_id = std::collections::HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: serde_json::Value = serde_json::from_str(line).with_context(|| format!("line {}", idx + 1))?;
        let (Some(id), Some(output)) = (row["id"].as_str(), row["output"].as_str()) else {
            bail!("line {}: expected string fields id and output", idx + 1);
        };
        if by_id.insert(id.to_string(), output.to_string()).is_some() {
            bail!("line {}: duplicate prediction id {id:?}", idx + 1);
        }
    }
    gold.examples()
        .iter()
        .map(|e| {
            by_id
                .remove(&e.id)
                .with_context(|| format!("no prediction for example {:?}", e.id))
        })
        .collect()
}

fn score(
    gold: &Path,
    predictions: &Path,
    task: Task,
    inventory: Option<&Path>,
    lex: &Lexicalization,
) -> Result<Evaluation> {
    let inventory = load_inventory(inventory, lex)?;
    let gold = read_dataset(gold, "und", Split::Test)?;
    let outputs = read_predictions(predictions, &gold)?;
    let refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    Ok(evaluate_predictions(gold.examples(), &refs, task, &inventory, lex)?)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let lex = Lexicalization::default();
    match cli.command {
        Command::Ingest {
            input,
            lang,
            split,
            out,
            dev_out,
            rounding,
        } => {
            let xml = fs::read(&input).map_err(|_| ExperimentError::MissingCorpus(input.clone()))?;
            let dataset = corpus::ingest_semeval(&xml, &lang, split).with_context(|| input.display().to_string())?;
            match dev_out {
                None => write_file(&out, &write_jsonl(dataset.examples()))?,
                Some(dev_path) => {
                    let rounding = match rounding {
                        Rounding::Floor => SplitRounding::Floor,
                        Rounding::Ceil => SplitRounding::Ceil,
                    };
                    let (train, dev) = split_dev(&dataset, rounding)?;
                    write_file(&out, &write_jsonl(train.examples()))?;
                    write_file(&dev_path, &write_jsonl(dev.examples()))?;
                    println!("train {} dev {}", train.len(), dev.len());
                }
            }
        }
        Command::Stats { inputs, lang } => {
            for path in inputs {
                let d = read_dataset(&path, &lang, Split::Train)?;
                let s = stats(&d);
                println!(
                    "{}\t{}\tsentences {}\ttuples {}",
                    path.display(),
                    d.language,
                    s.sentences,
                    s.tuples
                );
            }
        }
        Command::Mix { source, target, n, out } => {
            let source = read_dataset(&source, "und", Split::Train)?;
            let target = read_dataset(&target, "und", Split::Train)?;
            let mix = few_shot_mix(MixRecipe {
                source: &source,
                target: &target,
                n_target: n,
            })?;
            write_file(&out, &write_jsonl(mix.examples()))?;
            println!("{} examples", mix.len());
        }
        Command::Decode {
            input,
            task,
            scorer,
            unconstrained,
            max_len,
            inventory,
            out,
        } => {
            let inventory = load_inventory(inventory.as_deref(), &lex)?;
            let data = read_dataset(&input, "und", Split::Test)?;
            let cfg = DecodeConfig {
                constrained: !unconstrained,
                max_len,
            };
            let preds = match &scorer {
                ScorerSpec::Bridge(_) => {
                    let addr = scorer
                        .bridge_address()
                        .ok_or_else(|| ExperimentError::BridgeUnreachable("no bridge address".into()))?;
                    let client = BridgeClient::connect(&addr, "decode")
                        .map_err(|e| ExperimentError::BridgeUnreachable(e.to_string()))?;
                    decode_examples(data.examples(), task, &Backend::Bridge(&client), &inventory, &lex, cfg)
                }
                _ => {
                    let tok = WordTokenizer::for_corpus(data.examples(), &inventory, &lex);
                    let backend = Backend::InProcess {
                        tok: &tok,
                        adversarial: scorer == ScorerSpec::Adversarial,
                    };
                    decode_examples(data.examples(), task, &backend, &inventory, &lex, cfg)
                }
            }
            .map_err(anyhow::Error::msg)?;
            write_predictions(&out, &preds)?;
        }
        Command::Eval {
            gold,
            predictions,
            task,
            inventory,
        } => {
            let eval = score(&gold, &predictions, task, inventory.as_deref(), &lex)?;
            let s = &eval.score;
            println!(
                "P {:.6}\tR {:.6}\tF1 {:.6}\tpred {}\tgold {}\tcorrect {}",
                s.precision, s.recall, s.f1, s.n_pred, s.n_gold, s.n_correct
            );
            if eval.parse_diagnostics > 0 {
                println!("parse diagnostics {}", eval.parse_diagnostics);
            }
        }
        Command::Analyze {
            gold,
            predictions,
            task,
            inventory,
        } => {
            let eval = score(&gold, &predictions, task, inventory.as_deref(), &lex)?;
            for kind in ErrorKind::ALL {
                let count = eval.errors.iter().find(|(k, _)| *k == kind).map_or(0, |(_, c)| *c);
                println!("{}\t{}", kind.name(), count);
            }
        }
        Command::Sweep { config, overrides } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let base = config.parent().unwrap_or(Path::new("."));
            let mut cfg = ExperimentConfig::parse(&text, base)?;
            let cwd = std::env::current_dir()?;
            for o in &overrides {
                let (k, v) = o
                    .split_once('=')
                    .with_context(|| format!("override {o:?} is not KEY=VALUE"))?;
                cfg.set(k.trim(), v.trim(), &cwd).map_err(anyhow::Error::msg)?;
            }
            let report = run_experiment(&cfg)?;
            for f in &report.files {
                println!("{}", f.display());
            }
            let failed = report.failed();
            if failed > 0 {
                eprintln!("{failed} of {} cells failed", report.results.len());
                return Ok(ExitCode::from(EXIT_PARTIAL));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<ExperimentError>() {
                Some(ExperimentError::MissingCorpus(_)) => ExitCode::from(EXIT_MISSING_CORPUS),
                Some(ExperimentError::BridgeUnreachable(_)) => ExitCode::from(EXIT_BRIDGE),
                _ => ExitCode::from(EXIT_FAILURE),
            }
        }
    }
}
