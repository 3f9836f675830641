#![allow(dead_code)]

pub mod bridge_stub;

use std::collections::HashSet;

use markabsa_core::domain::dedup_tuples;
use markabsa_core::{AspectTerm, Category, CategoryInventory, Example, Polarity, SentimentTuple, Task, TaskTuple};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ENTITIES: [&str; 8] = [
    "food",
    "drinks",
    "service",
    "ambience",
    "location",
    "restaurant",
    "staff",
    "menu",
];
pub const ATTRIBUTES: [&str; 6] = [
    "quality",
    "prices",
    "general",
    "style_options",
    "miscellaneous",
    "speed",
];

pub const WORDS: [&str; 24] = [
    "The", "soup", "was", "cold", "but", "waiter", "friendly", "la", "sopa", "estaba", "fría", "pero", "el",
    "camarero", "amable", "très", "bon", "vin", "rouge", "Kellner", "war", "nett", "und", "schnell",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` distinct categories whose surfaces are also distinct.
pub fn random_inventory(rng: &mut impl Rng, n: usize) -> CategoryInventory {
    let mut pairs: Vec<(&str, &str)> = ENTITIES
        .iter()
        .flat_map(|e| ATTRIBUTES.iter().map(move |a| (*e, *a)))
        .collect();
    pairs.shuffle(rng);
    let mut surfaces = HashSet::new();
    let cats: Vec<Category> = pairs
        .into_iter()
        .map(|(e, a)| Category::new(e, a).unwrap())
        .filter(|c| surfaces.insert(c.surface()))
        .take(n)
        .collect();
    assert_eq!(cats.len(), n);
    CategoryInventory::new(cats)
}

pub fn random_sentence(rng: &mut impl Rng) -> String {
    let len = rng.random_range(3..=10);
    (0..len)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// A contiguous run of one to three words from the sentence, or implicit.
pub fn random_term(rng: &mut impl Rng, sentence: &str) -> AspectTerm {
    if rng.random_bool(0.2) {
        return AspectTerm::Implicit;
    }
    let words: Vec<&str> = sentence.split(' ').collect();
    let start = rng.random_range(0..words.len());
    let len = rng.random_range(1..=3.min(words.len() - start));
    AspectTerm::explicit(words[start..start + len].join(" "))
}

pub fn random_polarity(rng: &mut impl Rng) -> Polarity {
    *Polarity::ALL.choose(rng).unwrap()
}

pub fn random_full_tuple(rng: &mut impl Rng, sentence: &str, inv: &CategoryInventory) -> SentimentTuple {
    let cats: Vec<&Category> = inv.iter().collect();
    SentimentTuple::new(
        random_term(rng, sentence),
        (*cats.choose(rng).unwrap()).clone(),
        random_polarity(rng),
    )
}

/// Up to `max` distinct task tuples over `sentence`.
pub fn random_task_tuples(
    rng: &mut impl Rng,
    task: Task,
    sentence: &str,
    inv: &CategoryInventory,
    max: usize,
) -> Vec<TaskTuple> {
    let n = rng.random_range(0..=max);
    dedup_tuples((0..n).map(|_| TaskTuple::project(&random_full_tuple(rng, sentence, inv), task)))
}

pub fn random_example(rng: &mut impl Rng, id: &str, lang: &str, inv: &CategoryInventory) -> Example {
    let text = random_sentence(rng);
    let n = rng.random_range(1..=3);
    let mut gold: Vec<SentimentTuple> = Vec::new();
    for _ in 0..n {
        let t = random_full_tuple(rng, &text, inv);
        if !gold.contains(&t) {
            gold.push(t);
        }
    }
    Example::new(id, lang, text, gold).unwrap()
}

/// Brute-force exact-match counter: every predicted tuple is looked up in
/// the gold list by comparing each element separately.
pub fn brute_force_counts(preds: &[Vec<TaskTuple>], golds: &[Vec<TaskTuple>]) -> (usize, usize, usize) {
    fn same(a: &TaskTuple, b: &TaskTuple) -> bool {
        let term = match (&a.term, &b.term) {
            (None, None) => true,
            (Some(x), Some(y)) => x.label() == y.label(),
            _ => false,
        };
        let cat = match (&a.category, &b.category) {
            (None, None) => true,
            (Some(x), Some(y)) => x.label().eq_ignore_ascii_case(&y.label()),
            _ => false,
        };
        term && cat && a.polarity == b.polarity
    }
    fn unique(list: &[TaskTuple]) -> Vec<&TaskTuple> {
        let mut out: Vec<&TaskTuple> = Vec::new();
        for t in list {
            if !out.iter().any(|u| same(u, t)) {
                out.push(t);
            }
        }
        out
    }
    let (mut np, mut ng, mut nc) = (0, 0, 0);
    for (p, g) in preds.iter().zip(golds) {
        let (p, g) = (unique(p), unique(g));
        np += p.len();
        ng += g.len();
        nc += p.iter().filter(|t| g.iter().any(|u| same(t, u))).count();
    }
    (np, ng, nc)
}

/// Mean and 1.96-sigma half width computed directly from the definitions.
pub fn reference_interval(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * var.sqrt() / n.sqrt())
}
