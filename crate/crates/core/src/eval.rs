//! Exact-match scoring, run aggregation and error classification.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::domain::{dedup_tuples, AspectTerm, TaskTuple};

/// Critical value used for confidence half-widths.
pub const NORMAL_95: f64 = 1.96;
/// Recorded alongside aggregates so they can be re-derived with other
/// critical values.
pub const CI_METHOD: &str = "normal-1.96";
/// Maximum normalized edit distance for a term to count as a typo of a
/// sentence word.
pub const TYPO_THRESHOLD: f64 = 0.34;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("{predictions} prediction sets for {golds} gold sets")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("no scores to aggregate")]
    EmptyScores,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_pred: usize,
    pub n_gold: usize,
    pub n_correct: usize,
}

impl RunScore {
    pub fn from_counts(n_pred: usize, n_gold: usize, n_correct: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(n_correct, n_pred);
        let recall = ratio(n_correct, n_gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        RunScore {
            precision,
            recall,
            f1,
            n_pred,
            n_gold,
            n_correct,
        }
    }
}

/// Micro-averaged exact-match P/R/F1. Each example's tuples are treated as
/// a set; a prediction is correct only if every element matches a gold tuple.
/// Counts are summed as integers before dividing.
pub fn micro_f1(predictions: &[Vec<TaskTuple>], golds: &[Vec<TaskTuple>]) -> Result<RunScore, EvalError> {
    if predictions.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    let (mut n_pred, mut n_gold, mut n_correct) = (0, 0, 0);
    for (pred, gold) in predictions.iter().zip(golds) {
        let pred: HashSet<_> = pred.iter().map(TaskTuple::key).collect();
        let gold: HashSet<_> = gold.iter().map(TaskTuple::key).collect();
        n_pred += pred.len();
        n_gold += gold.len();
        n_correct += pred.intersection(&gold).count();
    }
    Ok(RunScore::from_counts(n_pred, n_gold, n_correct))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub half_width: f64,
    pub n_runs: usize,
}

/// Mean and 95% normal-approximation half-width `1.96 s / sqrt(n)` with the
/// sample standard deviation.
pub fn aggregate(scores: &[f64]) -> Result<Aggregate, EvalError> {
    let n = scores.len();
    if n == 0 {
        return Err(EvalError::EmptyScores);
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    let half_width = if n == 1 {
        0.0
    } else {
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        NORMAL_95 * var.sqrt() / (n as f64).sqrt()
    };
    Ok(Aggregate {
        mean,
        half_width,
        n_runs: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorKind {
    Missing,
    Spurious,
    TermNotInInput,
    TermPartialOverlap,
    TermTypoLike,
    /// The predicted term occurs in the sentence but is the wrong one.
    TermMismatch,
    CategoryConfusion,
    PolarityConfusion,
    MultiElement,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 9] = [
        ErrorKind::Missing,
        ErrorKind::Spurious,
        ErrorKind::TermNotInInput,
        ErrorKind::TermPartialOverlap,
        ErrorKind::TermTypoLike,
        ErrorKind::TermMismatch,
        ErrorKind::CategoryConfusion,
        ErrorKind::PolarityConfusion,
        ErrorKind::MultiElement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Missing => "missing",
            ErrorKind::Spurious => "spurious",
            ErrorKind::TermNotInInput => "term_not_in_input",
            ErrorKind::TermPartialOverlap => "term_partial_overlap",
            ErrorKind::TermTypoLike => "term_typo_like",
            ErrorKind::TermMismatch => "term_mismatch",
            ErrorKind::CategoryConfusion => "category_confusion",
            ErrorKind::PolarityConfusion => "polarity_confusion",
            ErrorKind::MultiElement => "multi_element",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorRecord {
    pub kind: ErrorKind,
    pub pred: Option<TaskTuple>,
    pub gold: Option<TaskTuple>,
}

/// Plain Levenshtein distance over characters.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance divided by the longer length.
pub fn normalized_edit_distance(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        0.0
    } else {
        edit_distance(a, b) as f64 / longest as f64
    }
}

/// Shared characters (as multisets) per mille of the longer text.
fn char_overlap(a: &str, b: &str) -> usize {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0;
    }
    let mut counts: HashMap<char, usize> = HashMap::new();
    for c in a.chars() {
        *counts.entry(c).or_default() += 1;
    }
    let mut shared = 0;
    for c in b.chars() {
        if let Some(n) = counts.get_mut(&c).filter(|n| **n > 0) {
            *n -= 1;
            shared += 1;
        }
    }
    shared * 1000 / longest
}

fn sentence_words(sentence: &str) -> Vec<&str> {
    sentence
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .collect()
}

/// Alignment preference: term overlap, then category, then polarity.
fn similarity(pred: &TaskTuple, gold: &TaskTuple) -> (usize, bool, bool) {
    let term = match (&pred.term, &gold.term) {
        (Some(p), Some(g)) if p.label() == g.label() => 1000,
        (Some(AspectTerm::Explicit { text: p, .. }), Some(AspectTerm::Explicit { text: g, .. })) => char_overlap(p, g),
        _ => 0,
    };
    let category = pred.category.is_some() && pred.category == gold.category;
    let polarity = pred.polarity.is_some() && pred.polarity == gold.polarity;
    (term, category, polarity)
}

fn classify_term(pred: &AspectTerm, gold: &AspectTerm, sentence: &str) -> ErrorKind {
    let words = sentence_words(sentence);
    let in_input = |text: &str| text.split_whitespace().any(|w| words.contains(&w));
    match (pred, gold) {
        (AspectTerm::Explicit { text: p, span: ps }, AspectTerm::Explicit { text: g, span: gs }) => {
            let spans_overlap = matches!((ps, gs), (Some(a), Some(b)) if a.from < b.to && b.from < a.to);
            let shares_word = p.split_whitespace().any(|w| g.split_whitespace().any(|v| v == w));
            if spans_overlap || shares_word || p.contains(g.as_str()) || g.contains(p.as_str()) {
                return ErrorKind::TermPartialOverlap;
            }
            if !sentence.contains(p.as_str()) {
                // compare against sentence n-grams with as many words as the term
                let n = p.split_whitespace().count().max(1);
                let typo = words
                    .windows(n)
                    .any(|w| normalized_edit_distance(p, &w.join(" ")) <= TYPO_THRESHOLD);
                if typo {
                    return ErrorKind::TermTypoLike;
                }
            }
            if in_input(p) {
                ErrorKind::TermMismatch
            } else {
                ErrorKind::TermNotInInput
            }
        }
        (AspectTerm::Explicit { text: p, .. }, AspectTerm::Implicit) if !in_input(p) => ErrorKind::TermNotInInput,
        _ => ErrorKind::TermMismatch,
    }
}

fn classify_pair(pred: &TaskTuple, gold: &TaskTuple, sentence: &str) -> ErrorKind {
    let term_differs = pred.term.as_ref().map(AspectTerm::label) != gold.term.as_ref().map(AspectTerm::label);
    let category_differs = pred.category != gold.category;
    let polarity_differs = pred.polarity != gold.polarity;
    match (term_differs, category_differs, polarity_differs) {
        (true, false, false) => match (&pred.term, &gold.term) {
            (Some(p), Some(g)) => classify_term(p, g, sentence),
            _ => ErrorKind::MultiElement,
        },
        (false, true, false) => ErrorKind::CategoryConfusion,
        (false, false, true) => ErrorKind::PolarityConfusion,
        _ => ErrorKind::MultiElement,
    }
}

/// Explains the difference between a predicted and a gold tuple set.
///
/// Exact matches are removed first. The remaining tuples are paired
/// greedily by similarity (term character overlap, then category, then
/// polarity agreement); pairs that share nothing are not aligned. Each
/// aligned pair yields one record classified by what differs; leftover
/// predictions are spurious and leftover gold tuples missing.
pub fn classify_errors(pred: &[TaskTuple], gold: &[TaskTuple], sentence: &str) -> Vec<ErrorRecord> {
    let all_pred = dedup_tuples(pred.iter().cloned());
    let all_gold = dedup_tuples(gold.iter().cloned());
    let mut pred: Vec<TaskTuple> = all_pred.iter().filter(|p| !all_gold.contains(p)).cloned().collect();
    let mut gold: Vec<TaskTuple> = all_gold.iter().filter(|g| !all_pred.contains(g)).cloned().collect();

    let mut records = Vec::new();
    loop {
        let mut best: Option<((usize, bool, bool), usize, usize)> = None;
        for (i, p) in pred.iter().enumerate() {
            for (j, g) in gold.iter().enumerate() {
                let sim = similarity(p, g);
                if sim == (0, false, false) {
                    continue;
                }
                if best.as_ref().is_none_or(|(b, _, _)| sim > *b) {
                    best = Some((sim, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        let p = pred.remove(i);
        let g = gold.remove(j);
        records.push(ErrorRecord {
            kind: classify_pair(&p, &g, sentence),
            pred: Some(p),
            gold: Some(g),
        });
    }
    records.extend(pred.into_iter().map(|p| ErrorRecord {
        kind: ErrorKind::Spurious,
        pred: Some(p),
        gold: None,
    }));
    records.extend(gold.into_iter().map(|g| ErrorRecord {
        kind: ErrorKind::Missing,
        pred: None,
        gold: Some(g),
    }));
    records
}

/// Per-kind counts in [`ErrorKind::ALL`] order.
pub fn count_errors<'a>(records: impl IntoIterator<Item = &'a ErrorRecord>) -> Vec<(ErrorKind, usize)> {
    let mut counts: HashMap<ErrorKind, usize> = HashMap::new();
    for r in records {
        *counts.entry(r.kind).or_default() += 1;
    }
    ErrorKind::ALL
        .iter()
        .map(|&k| (k, counts.get(&k).copied().unwrap_or(0)))
        .collect()
}
