//! Dataset loading, dev splitting and few-shot mixing.
//!
//! SemEval-2016 ABSA XML is import-only. The canonical on-disk form is JSONL
//! with one example per line:
//!
//! ```text
//! {"id":"1004293:0","lang":"en","text":"...","tuples":[{"term":"staff","from":4,"to":9,"category":"SERVICE#GENERAL","polarity":"positive"}]}
//! ```
//!
//! Implicit terms are written as `"term":"NULL"` with no offsets.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AspectTerm, Category, DomainError, Example, Polarity, SentimentTuple, Span, NULL_TERM};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("{location}: unknown polarity label {label:?}")]
    UnknownPolarityLabel { location: String, label: String },
    #[error("{location}: span ({from}, {to}) does not match target {target:?}")]
    BadSpan {
        location: String,
        target: String,
        from: usize,
        to: usize,
    },
    #[error("{location}: {message}")]
    Invalid { location: String, message: String },
    #[error("JSONL line {line}: {message}")]
    Jsonl { line: usize, message: String },
    #[error("duplicate example id {0:?}")]
    DuplicateId(String),
    #[error("dev split needs at least 10 examples, got {0}")]
    TooFewExamples(usize),
    #[error("requested {requested} few-shot examples but the target set has {available}")]
    NTooLarge { requested: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

/// An ordered, id-unique list of examples.
///
/// Ids are unique per language, so a mixture of two languages may reuse an
/// id across them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub language: String,
    pub split: Split,
    examples: Vec<Example>,
}

impl Dataset {
    pub fn new(language: impl Into<String>, split: Split, examples: Vec<Example>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for e in &examples {
            if !seen.insert((e.language.as_str(), e.id.as_str())) {
                return Err(CorpusError::DuplicateId(e.id.clone()));
            }
        }
        Ok(Dataset {
            language: language.into(),
            split,
            examples,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DatasetStats {
    pub sentences: usize,
    pub tuples: usize,
}

pub fn stats(dataset: &Dataset) -> DatasetStats {
    DatasetStats {
        sentences: dataset.len(),
        tuples: dataset.examples.iter().map(|e| e.gold().len()).sum(),
    }
}

fn xml_location(doc: &roxmltree::Document, node: roxmltree::Node, sentence_id: &str) -> String {
    let pos = doc.text_pos_at(node.range().start);
    format!("sentence {sentence_id:?} (line {}, column {})", pos.row, pos.col)
}

/// Reads a SemEval-2016 ABSA file. Every `sentence` element becomes one
/// example; `Opinion` nodes become gold tuples. Repeated opinions with the
/// same (target, category, polarity) are merged.
pub fn ingest_semeval(xml: &[u8], language: &str, split: Split) -> Result<Dataset, CorpusError> {
    let text = std::str::from_utf8(xml).map_err(|e| CorpusError::MalformedXml(e.to_string()))?;
    let doc = roxmltree::Document::parse(text).map_err(|e| CorpusError::MalformedXml(e.to_string()))?;

    let mut examples = Vec::new();
    for (idx, sentence) in doc.descendants().filter(|n| n.has_tag_name("sentence")).enumerate() {
        let id = sentence
            .attribute("id")
            .map(str::to_string)
            .unwrap_or_else(|| format!("s{idx}"));
        let location = xml_location(&doc, sentence, &id);
        let text_node = sentence
            .children()
            .find(|n| n.has_tag_name("text"))
            .ok_or_else(|| CorpusError::Invalid {
                location: location.clone(),
                message: "sentence has no text element".into(),
            })?;
        let sentence_text = text_node.text().unwrap_or_default().to_string();

        let mut gold: Vec<SentimentTuple> = Vec::new();
        for opinion in sentence.descendants().filter(|n| n.has_tag_name("Opinion")) {
            let location = xml_location(&doc, opinion, &id);
            let attr = |name: &str| {
                opinion.attribute(name).ok_or_else(|| CorpusError::Invalid {
                    location: location.clone(),
                    message: format!("Opinion is missing attribute {name:?}"),
                })
            };
            let polarity_label = attr("polarity")?;
            let polarity = Polarity::from_str(polarity_label).map_err(|_| CorpusError::UnknownPolarityLabel {
                location: location.clone(),
                label: polarity_label.to_string(),
            })?;
            let category = Category::parse_label(attr("category")?).map_err(|e| CorpusError::Invalid {
                location: location.clone(),
                message: e.to_string(),
            })?;
            let target = opinion.attribute("target").unwrap_or(NULL_TERM);
            let term = if target == NULL_TERM {
                AspectTerm::Implicit
            } else {
                let offset = |name: &str| -> Result<Option<usize>, CorpusError> {
                    opinion
                        .attribute(name)
                        .map(|v| {
                            v.parse::<usize>().map_err(|_| CorpusError::Invalid {
                                location: location.clone(),
                                message: format!("attribute {name:?} is not an offset: {v:?}"),
                            })
                        })
                        .transpose()
                };
                match (offset("from")?, offset("to")?) {
                    (Some(from), Some(to)) => AspectTerm::explicit_at(target, Span { from, to }, &sentence_text)
                        .map_err(|_| CorpusError::BadSpan {
                            location: location.clone(),
                            target: target.to_string(),
                            from,
                            to,
                        })?,
                    _ => AspectTerm::explicit(target),
                }
            };
            let tuple = SentimentTuple::new(term, category, polarity);
            let key = crate::domain::TaskTuple::project(&tuple, crate::domain::Task::Tasd);
            if !gold
                .iter()
                .any(|g| crate::domain::TaskTuple::project(g, crate::domain::Task::Tasd) == key)
            {
                gold.push(tuple);
            }
        }
        examples.push(
            Example::new(id, language, sentence_text, gold).map_err(|e| CorpusError::Invalid {
                location,
                message: e.to_string(),
            })?,
        );
    }
    Dataset::new(language, split, examples)
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonTuple {
    term: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    from: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    to: Option<usize>,
    category: String,
    polarity: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonExample {
    id: String,
    lang: String,
    text: String,
    #[serde(default)]
    tuples: Vec<JsonTuple>,
}

fn example_from_json(row: JsonExample) -> Result<Example, String> {
    let mut gold = Vec::with_capacity(row.tuples.len());
    for t in row.tuples {
        let category = Category::parse_label(&t.category).map_err(|e| e.to_string())?;
        let polarity = Polarity::from_str(&t.polarity).map_err(|e: DomainError| e.to_string())?;
        let term = if t.term == NULL_TERM {
            if t.from.is_some() || t.to.is_some() {
                return Err("implicit term must not carry offsets".into());
            }
            AspectTerm::Implicit
        } else {
            match (t.from, t.to) {
                (Some(from), Some(to)) => {
                    AspectTerm::explicit_at(&t.term, Span { from, to }, &row.text).map_err(|e| e.to_string())?
                }
                (None, None) if !t.term.is_empty() => AspectTerm::explicit(t.term),
                (None, None) => return Err(DomainError::EmptyTerm.to_string()),
                _ => return Err("offsets must be given together".into()),
            }
        };
        gold.push(SentimentTuple::new(term, category, polarity));
    }
    Example::new(row.id, row.lang, row.text, gold).map_err(|e| e.to_string())
}

fn example_to_json(e: &Example) -> JsonExample {
    JsonExample {
        id: e.id.clone(),
        lang: e.language.clone(),
        text: e.text.clone(),
        tuples: e
            .gold()
            .iter()
            .map(|t| JsonTuple {
                term: t.term.label().to_string(),
                from: t.term.span().map(|s| s.from),
                to: t.term.span().map(|s| s.to),
                category: t.category.label(),
                polarity: t.polarity.label().to_string(),
            })
            .collect(),
    }
}

/// Parses JSONL examples. Blank lines are skipped; line numbers in errors
/// are 1-based.
pub fn read_jsonl(text: &str) -> Result<Vec<Example>, CorpusError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| CorpusError::Jsonl { line: idx + 1, message };
        let row: JsonExample = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        out.push(example_from_json(row).map_err(err)?);
    }
    Ok(out)
}

/// Loads a JSONL dataset; the dataset language is taken from the first
/// example, or `fallback_language` when the file is empty.
pub fn load_jsonl(text: &str, fallback_language: &str, split: Split) -> Result<Dataset, CorpusError> {
    let examples = read_jsonl(text)?;
    let language = examples
        .first()
        .map(|e| e.language.clone())
        .unwrap_or_else(|| fallback_language.to_string());
    Dataset::new(language, split, examples)
}

pub fn write_jsonl(examples: &[Example]) -> String {
    let mut out = String::new();
    for e in examples {
        out.push_str(&serde_json::to_string(&example_to_json(e)).expect("example serializes"));
        out.push('\n');
    }
    out
}

/// How the 9:1 boundary is rounded when the count is not a multiple of ten.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitRounding {
    /// `floor(0.9 N)` training examples.
    #[default]
    Floor,
    /// `ceil(0.9 N)` training examples.
    Ceil,
}

/// Splits a training set 9:1 into (train, dev), keeping file order.
pub fn split_dev(train: &Dataset, rounding: SplitRounding) -> Result<(Dataset, Dataset), CorpusError> {
    let n = train.len();
    if n < 10 {
        return Err(CorpusError::TooFewExamples(n));
    }
    let cut = match rounding {
        SplitRounding::Floor => n * 9 / 10,
        SplitRounding::Ceil => (n * 9).div_ceil(10),
    };
    let (head, tail) = train.examples.split_at(cut);
    Ok((
        Dataset {
            language: train.language.clone(),
            split: Split::Train,
            examples: head.to_vec(),
        },
        Dataset {
            language: train.language.clone(),
            split: Split::Dev,
            examples: tail.to_vec(),
        },
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct MixRecipe<'a> {
    pub source: &'a Dataset,
    pub target: &'a Dataset,
    pub n_target: usize,
}

/// Source examples followed by the first `n_target` target examples.
pub fn few_shot_mix(recipe: MixRecipe<'_>) -> Result<Dataset, CorpusError> {
    let MixRecipe {
        source,
        target,
        n_target,
    } = recipe;
    if n_target > target.len() {
        return Err(CorpusError::NTooLarge {
            requested: n_target,
            available: target.len(),
        });
    }
    if n_target == 0 {
        return Ok(source.clone());
    }
    let mut examples = source.examples.clone();
    examples.extend_from_slice(&target.examples[..n_target]);
    Dataset::new(
        format!("{}+{}", source.language, target.language),
        Split::Train,
        examples,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<Reviews>
  <Review rid="1">
    <sentences>
      <sentence id="1:0">
        <text>The staff was helpful</text>
        <Opinions>
          <Opinion target="staff" category="SERVICE#GENERAL" polarity="positive" from="4" to="9"/>
        </Opinions>
      </sentence>
      <sentence id="1:1">
        <text>Delightful experience!</text>
        <Opinions>
          <Opinion target="NULL" category="RESTAURANT#GENERAL" polarity="positive" from="0" to="0"/>
        </Opinions>
      </sentence>
      <sentence id="1:2">
        <text>We went on a Tuesday.</text>
      </sentence>
    </sentences>
  </Review>
</Reviews>"#;

    fn synthetic(lang: &str, n: usize) -> Dataset {
        let examples = (0..n)
            .map(|i| Example::new(format!("{lang}{i}"), lang, format!("sentence {i}"), vec![]).unwrap())
            .collect();
        Dataset::new(lang, Split::Train, examples).unwrap()
    }

    #[test]
    fn ingest_fixture() {
        let d = ingest_semeval(FIXTURE.as_bytes(), "en", Split::Train).unwrap();
        assert_eq!(d.len(), 3);
        let staff = &d.examples()[0].gold()[0];
        assert_eq!(
            staff.term,
            AspectTerm::Explicit {
                text: "staff".into(),
                span: Some(Span { from: 4, to: 9 })
            }
        );
        // substring oracle on the fixture offsets
        assert_eq!(&"The staff was helpful"[4..9], "staff");
        assert!(d.examples()[1].gold()[0].term.is_implicit());
        assert!(d.examples()[2].gold().is_empty());
        assert_eq!(
            stats(&d),
            DatasetStats {
                sentences: 3,
                tuples: 2
            }
        );
    }

    #[test]
    fn ingest_rejects_conflict_polarity() {
        let xml = FIXTURE.replacen("polarity=\"positive\"", "polarity=\"conflict\"", 1);
        let err = ingest_semeval(xml.as_bytes(), "en", Split::Train).unwrap_err();
        match err {
            CorpusError::UnknownPolarityLabel { location, label } => {
                assert_eq!(label, "conflict");
                assert!(location.contains("1:0"), "{location}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ingest_rejects_bad_span() {
        let xml = FIXTURE.replace("from=\"4\" to=\"9\"", "from=\"4\" to=\"40\"");
        assert!(matches!(
            ingest_semeval(xml.as_bytes(), "en", Split::Train),
            Err(CorpusError::BadSpan { .. })
        ));
        let xml = FIXTURE.replace("from=\"4\" to=\"9\"", "from=\"3\" to=\"8\"");
        assert!(matches!(
            ingest_semeval(xml.as_bytes(), "en", Split::Train),
            Err(CorpusError::BadSpan { .. })
        ));
    }

    #[test]
    fn ingest_rejects_malformed_xml() {
        assert!(matches!(
            ingest_semeval(b"<Reviews><sentence>", "en", Split::Train),
            Err(CorpusError::MalformedXml(_))
        ));
    }

    #[test]
    fn jsonl_round_trip_and_errors() {
        let d = ingest_semeval(FIXTURE.as_bytes(), "en", Split::Train).unwrap();
        let text = write_jsonl(d.examples());
        assert!(text.lines().nth(1).unwrap().contains(r#""term":"NULL","category""#));
        assert_eq!(read_jsonl(&text).unwrap(), d.examples());

        let bad = format!("{text}{{\"id\":\"x\"}}\n");
        match read_jsonl(&bad) {
            Err(CorpusError::Jsonl { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let bad_span = r#"{"id":"x","lang":"en","text":"soup","tuples":[{"term":"soup","from":1,"to":4,"category":"FOOD#QUALITY","polarity":"positive"}]}"#;
        assert!(read_jsonl(bad_span).is_err());
    }

    #[test]
    fn dataset_ids_unique_per_language() {
        let a = Example::new("1", "en", "x", vec![]).unwrap();
        assert!(matches!(
            Dataset::new("en", Split::Train, vec![a.clone(), a.clone()]),
            Err(CorpusError::DuplicateId(_))
        ));
        let b = Example::new("1", "es", "x", vec![]).unwrap();
        assert!(Dataset::new("en+es", Split::Train, vec![a, b]).is_ok());
    }

    #[test]
    fn dev_split_sizes() {
        let (t, d) = split_dev(&synthetic("en", 2000), SplitRounding::Floor).unwrap();
        assert_eq!((t.len(), d.len()), (1800, 200));
        let (t, d) = split_dev(&synthetic("en", 10), SplitRounding::Floor).unwrap();
        assert_eq!((t.len(), d.len()), (9, 1));
        let (t, d) = split_dev(&synthetic("fr", 1732), SplitRounding::Ceil).unwrap();
        assert_eq!((t.len(), d.len()), (1559, 173));
        assert!(matches!(
            split_dev(&synthetic("en", 9), SplitRounding::Floor),
            Err(CorpusError::TooFewExamples(9))
        ));
    }

    #[test]
    fn floor_split_matches_published_counts() {
        // (train, dev) sentence counts per language.
        for (train, dev) in [
            (1800, 200),
            (1863, 207),
            (1559, 174),
            (1549, 173),
            (3289, 366),
            (1108, 124),
        ] {
            let (t, d) = split_dev(&synthetic("xx", train + dev), SplitRounding::Floor).unwrap();
            assert_eq!((t.len(), d.len()), (train, dev));
        }
    }

    #[test]
    fn dev_split_preserves_order() {
        let full = synthetic("en", 37);
        let (t, d) = split_dev(&full, SplitRounding::Floor).unwrap();
        let joined: Vec<_> = t.examples().iter().chain(d.examples()).cloned().collect();
        assert_eq!(joined, full.examples());
    }

    #[test]
    fn mixing() {
        let src = synthetic("en", 1800);
        let tgt = synthetic("es", 50);
        let zero = few_shot_mix(MixRecipe {
            source: &src,
            target: &tgt,
            n_target: 0,
        })
        .unwrap();
        assert_eq!(zero, src);
        let ten = few_shot_mix(MixRecipe {
            source: &src,
            target: &tgt,
            n_target: 10,
        })
        .unwrap();
        assert_eq!(ten.len(), 1810);
        assert_eq!(ten.examples().iter().filter(|e| e.language == "es").count(), 10);
        assert!(ten.examples()[1800..].iter().all(|e| e.language == "es"));
        assert!(matches!(
            few_shot_mix(MixRecipe {
                source: &src,
                target: &tgt,
                n_target: 51
            }),
            Err(CorpusError::NTooLarge {
                requested: 51,
                available: 50
            })
        ));
    }

    #[test]
    fn empty_stats() {
        assert_eq!(stats(&synthetic("en", 0)), DatasetStats::default());
    }
}
