//! Sentiment tuples, task definitions, and the mapping between label space
//! and the natural-language phrases a sequence model reads and writes.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Label used for implicit aspect terms in annotated corpora.
pub const NULL_TERM: &str = "NULL";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("malformed category label {0:?}; expected ENTITY#ATTRIBUTE")]
    MalformedCategory(String),
    #[error("unknown polarity label {0:?}")]
    UnknownPolarityLabel(String),
    #[error("unknown task {0:?}; expected one of acsa, e2e, acte, tasd")]
    UnknownTask(String),
    #[error("inventory line {line}: {message}")]
    Inventory { line: usize, message: String },
    #[error("lexicalization is invalid: {0}")]
    Lexicalization(String),
    #[error("span ({from}, {to}) does not select {text:?} in the sentence")]
    BadSpan { text: String, from: usize, to: usize },
    #[error("explicit aspect term must not be empty")]
    EmptyTerm,
    #[error("duplicate tuple in gold annotations: {0}")]
    DuplicateTuple(String),
}

/// Unrecoverable-for-this-phrase resolution failures. These are reported as
/// diagnostics by the output parser, never as hard errors.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DelexError {
    #[error("phrase {0:?} is not a category in the inventory")]
    UnknownCategory(String),
    #[error("phrase {0:?} is not a polarity word")]
    UnknownPolarity(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Positive,
    Neutral,
    Negative,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Neutral, Polarity::Negative];

    /// Corpus label form.
    pub fn label(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Neutral => "neutral",
            Polarity::Negative => "negative",
        }
    }
}

impl FromStr for Polarity {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive" => Ok(Polarity::Positive),
            "neutral" => Ok(Polarity::Neutral),
            "negative" => Ok(Polarity::Negative),
            other => Err(DomainError::UnknownPolarityLabel(other.to_string())),
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// An aspect category such as `SERVICE#GENERAL`.
///
/// Both parts are stored lowercase, so equality is case-insensitive with
/// respect to the label it was parsed from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Category {
    entity: String,
    attribute: String,
}

fn valid_category_part(part: &str) -> bool {
    !part.is_empty() && !part.chars().any(|c| c.is_whitespace() || c == '#')
}

impl Category {
    pub fn new(entity: &str, attribute: &str) -> Result<Self, DomainError> {
        if !valid_category_part(entity) || !valid_category_part(attribute) {
            return Err(DomainError::MalformedCategory(format!("{entity}#{attribute}")));
        }
        Ok(Category {
            entity: entity.to_lowercase(),
            attribute: attribute.to_lowercase(),
        })
    }

    /// Parses the `ENTITY#ATTRIBUTE` label form.
    pub fn parse_label(label: &str) -> Result<Self, DomainError> {
        let (entity, attribute) = label
            .split_once('#')
            .ok_or_else(|| DomainError::MalformedCategory(label.to_string()))?;
        Category::new(entity, attribute).map_err(|_| DomainError::MalformedCategory(label.to_string()))
    }

    pub fn entity(&self) -> &str {
        &self.entity
    }

    pub fn attribute(&self) -> &str {
        &self.attribute
    }

    /// `ENTITY#ATTRIBUTE`
    pub fn label(&self) -> String {
        format!("{}#{}", self.entity.to_uppercase(), self.attribute.to_uppercase())
    }

    /// `entity attribute`, the phrase form used in target sequences.
    pub fn surface(&self) -> String {
        format!("{} {}", self.entity, self.attribute)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Character offsets `[from, to)` into a sentence, counted in Unicode scalar
/// values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub from: usize,
    pub to: usize,
}

impl Span {
    pub fn slice<'a>(&self, sentence: &'a str) -> Option<&'a str> {
        if self.from > self.to {
            return None;
        }
        let start = char_to_byte(sentence, self.from)?;
        let end = char_to_byte(sentence, self.to)?;
        Some(&sentence[start..end])
    }
}

fn char_to_byte(s: &str, char_idx: usize) -> Option<usize> {
    if char_idx == s.chars().count() {
        return Some(s.len());
    }
    s.char_indices().nth(char_idx).map(|(b, _)| b)
}

/// First occurrence of `needle` in `haystack`, as a character span.
pub fn find_span(haystack: &str, needle: &str) -> Option<Span> {
    if needle.is_empty() {
        return None;
    }
    let byte = haystack.find(needle)?;
    let from = haystack[..byte].chars().count();
    Some(Span {
        from,
        to: from + needle.chars().count(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AspectTerm {
    Implicit,
    Explicit { text: String, span: Option<Span> },
}

impl AspectTerm {
    pub fn explicit(text: impl Into<String>) -> Self {
        AspectTerm::Explicit {
            text: text.into(),
            span: None,
        }
    }

    /// Explicit term whose span is checked against the sentence.
    pub fn explicit_at(text: &str, span: Span, sentence: &str) -> Result<Self, DomainError> {
        if text.is_empty() {
            return Err(DomainError::EmptyTerm);
        }
        if span.slice(sentence) != Some(text) {
            return Err(DomainError::BadSpan {
                text: text.to_string(),
                from: span.from,
                to: span.to,
            });
        }
        Ok(AspectTerm::Explicit {
            text: text.to_string(),
            span: Some(span),
        })
    }

    /// `NULL` for implicit terms, the term text otherwise.
    pub fn label(&self) -> &str {
        match self {
            AspectTerm::Implicit => NULL_TERM,
            AspectTerm::Explicit { text, .. } => text,
        }
    }

    pub fn is_implicit(&self) -> bool {
        matches!(self, AspectTerm::Implicit)
    }

    pub fn span(&self) -> Option<Span> {
        match self {
            AspectTerm::Implicit => None,
            AspectTerm::Explicit { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SentimentTuple {
    pub term: AspectTerm,
    pub category: Category,
    pub polarity: Polarity,
}

impl SentimentTuple {
    pub fn new(term: AspectTerm, category: Category, polarity: Polarity) -> Self {
        SentimentTuple {
            term,
            category,
            polarity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    Aspect,
    Category,
    Polarity,
}

impl Element {
    pub fn marker(self) -> &'static str {
        match self {
            Element::Aspect => "[A]",
            Element::Category => "[C]",
            Element::Polarity => "[P]",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    Acsa,
    E2e,
    Acte,
    Tasd,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Acsa, Task::E2e, Task::Acte, Task::Tasd];

    /// Predicted elements in marker order.
    pub fn elements(self) -> &'static [Element] {
        match self {
            Task::Acsa => &[Element::Category, Element::Polarity],
            Task::E2e => &[Element::Aspect, Element::Polarity],
            Task::Acte => &[Element::Aspect, Element::Category],
            Task::Tasd => &[Element::Aspect, Element::Category, Element::Polarity],
        }
    }

    pub fn has(self, element: Element) -> bool {
        self.elements().contains(&element)
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Acsa => "acsa",
            Task::E2e => "e2e",
            Task::Acte => "acte",
            Task::Tasd => "tasd",
        }
    }
}

impl FromStr for Task {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "acsa" => Ok(Task::Acsa),
            "e2e" | "e2e-absa" => Ok(Task::E2e),
            "acte" => Ok(Task::Acte),
            "tasd" => Ok(Task::Tasd),
            _ => Err(DomainError::UnknownTask(s.to_string())),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A tuple restricted to the elements of one task.
///
/// Equality, hashing and ordering use the label forms only; spans are
/// carried along for information and ignored when comparing.
#[derive(Debug, Clone)]
pub struct TaskTuple {
    pub term: Option<AspectTerm>,
    pub category: Option<Category>,
    pub polarity: Option<Polarity>,
}

/// Comparable label form of a [`TaskTuple`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TupleKey {
    pub term: Option<String>,
    pub category: Option<Category>,
    pub polarity: Option<Polarity>,
}

impl TaskTuple {
    pub fn project(tuple: &SentimentTuple, task: Task) -> Self {
        TaskTuple {
            term: task.has(Element::Aspect).then(|| tuple.term.clone()),
            category: task.has(Element::Category).then(|| tuple.category.clone()),
            polarity: task.has(Element::Polarity).then_some(tuple.polarity),
        }
    }

    pub fn key(&self) -> TupleKey {
        TupleKey {
            term: self.term.as_ref().map(|t| t.label().to_string()),
            category: self.category.clone(),
            polarity: self.polarity,
        }
    }
}

impl PartialEq for TaskTuple {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for TaskTuple {}

impl std::hash::Hash for TaskTuple {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

impl fmt::Display for TaskTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(t) = &self.term {
            parts.push(format!("{:?}", t.label()));
        }
        if let Some(c) = &self.category {
            parts.push(c.label());
        }
        if let Some(p) = self.polarity {
            parts.push(p.label().to_string());
        }
        write!(f, "({})", parts.join(", "))
    }
}

/// Drops repeated tuples, keeping first occurrences in order.
pub fn dedup_tuples(tuples: impl IntoIterator<Item = TaskTuple>) -> Vec<TaskTuple> {
    let mut seen = HashSet::new();
    tuples.into_iter().filter(|t| seen.insert(t.key())).collect()
}

/// One annotated sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub language: String,
    pub text: String,
    gold: Vec<SentimentTuple>,
}

impl Example {
    /// Rejects gold lists with repeated (term, category, polarity) labels.
    pub fn new(
        id: impl Into<String>,
        language: impl Into<String>,
        text: impl Into<String>,
        gold: Vec<SentimentTuple>,
    ) -> Result<Self, DomainError> {
        let mut seen = HashSet::new();
        for t in &gold {
            let key = TaskTuple::project(t, Task::Tasd).key();
            if !seen.insert(key) {
                return Err(DomainError::DuplicateTuple(
                    TaskTuple::project(t, Task::Tasd).to_string(),
                ));
            }
        }
        Ok(Example {
            id: id.into(),
            language: language.into(),
            text: text.into(),
            gold,
        })
    }

    pub fn gold(&self) -> &[SentimentTuple] {
        &self.gold
    }
}

/// Projects an example's gold tuples onto a task's elements, dropping
/// duplicates created by the projection.
pub fn project(example: &Example, task: Task) -> Vec<TaskTuple> {
    dedup_tuples(example.gold.iter().map(|t| TaskTuple::project(t, task)))
}

/// Phrases used in place of polarity labels and implicit terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicalization {
    positive: String,
    neutral: String,
    negative: String,
    implicit_term: String,
}

impl Default for Lexicalization {
    fn default() -> Self {
        Lexicalization {
            positive: "great".into(),
            neutral: "ok".into(),
            negative: "bad".into(),
            implicit_term: "it".into(),
        }
    }
}

impl Lexicalization {
    pub fn new(positive: &str, neutral: &str, negative: &str, implicit_term: &str) -> Result<Self, DomainError> {
        let phrases = [positive, neutral, negative, implicit_term];
        if phrases.iter().any(|p| p.trim().is_empty() || p.trim() != *p) {
            return Err(DomainError::Lexicalization(
                "phrases must be non-empty and trimmed".into(),
            ));
        }
        let distinct: HashSet<_> = phrases.iter().collect();
        if distinct.len() != phrases.len() {
            return Err(DomainError::Lexicalization("phrases must be pairwise distinct".into()));
        }
        Ok(Lexicalization {
            positive: positive.into(),
            neutral: neutral.into(),
            negative: negative.into(),
            implicit_term: implicit_term.into(),
        })
    }

    pub fn polarity_word(&self, p: Polarity) -> &str {
        match p {
            Polarity::Positive => &self.positive,
            Polarity::Neutral => &self.neutral,
            Polarity::Negative => &self.negative,
        }
    }

    pub fn implicit_word(&self) -> &str {
        &self.implicit_term
    }

    pub fn polarity_from_word(&self, word: &str) -> Option<Polarity> {
        Polarity::ALL.into_iter().find(|&p| self.polarity_word(p) == word)
    }

    pub fn term_phrase<'a>(&'a self, term: &'a AspectTerm) -> &'a str {
        match term {
            AspectTerm::Implicit => &self.implicit_term,
            AspectTerm::Explicit { text, .. } => text,
        }
    }

    /// Term phrase back to a term; the implicit word means implicit.
    pub fn term_from_phrase(&self, phrase: &str, sentence: &str) -> AspectTerm {
        if phrase == self.implicit_term {
            AspectTerm::Implicit
        } else {
            AspectTerm::Explicit {
                text: phrase.to_string(),
                span: find_span(sentence, phrase),
            }
        }
    }

    /// Every phrase this lexicalization can emit outside of terms and
    /// categories.
    pub fn control_words(&self) -> [&str; 4] {
        [&self.positive, &self.neutral, &self.negative, &self.implicit_term]
    }
}

/// Returns `(e_a, e_c, e_p)`.
pub fn lexicalize(tuple: &SentimentTuple, lex: &Lexicalization) -> (String, String, String) {
    (
        lex.term_phrase(&tuple.term).to_string(),
        tuple.category.surface(),
        lex.polarity_word(tuple.polarity).to_string(),
    )
}

pub fn delexicalize(
    term_phrase: &str,
    category_phrase: &str,
    polarity_phrase: &str,
    sentence: &str,
    lex: &Lexicalization,
    inventory: &CategoryInventory,
) -> Result<SentimentTuple, DelexError> {
    let category = inventory
        .resolve_surface(category_phrase)
        .ok_or_else(|| DelexError::UnknownCategory(category_phrase.to_string()))?;
    let polarity = lex
        .polarity_from_word(polarity_phrase)
        .ok_or_else(|| DelexError::UnknownPolarity(polarity_phrase.to_string()))?;
    Ok(SentimentTuple {
        term: lex.term_from_phrase(term_phrase, sentence),
        category: category.clone(),
        polarity,
    })
}

/// The set of categories a dataset uses, in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CategoryInventory {
    categories: Vec<Category>,
}

const RESTAURANT_CATEGORIES: &str = include_str!("../data/restaurant_categories.txt");

impl CategoryInventory {
    pub fn new(categories: impl IntoIterator<Item = Category>) -> Self {
        let mut out: Vec<Category> = Vec::new();
        for c in categories {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        CategoryInventory { categories: out }
    }

    /// One `ENTITY#ATTRIBUTE` label per line; blank lines are skipped.
    /// Lines starting with `#` are rejected since `#` is the separator.
    pub fn parse(text: &str) -> Result<Self, DomainError> {
        let mut categories = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: &str| DomainError::Inventory {
                line: idx + 1,
                message: message.to_string(),
            };
            if line.starts_with('#') {
                return Err(err("comment lines are not allowed"));
            }
            if line.matches('#').count() != 1 {
                return Err(err("expected exactly one '#'"));
            }
            categories.push(Category::parse_label(line).map_err(|e| err(&e.to_string()))?);
        }
        Ok(CategoryInventory::new(categories))
    }

    /// The twelve SemEval-2016 restaurant categories.
    pub fn semeval_restaurants() -> Self {
        CategoryInventory::parse(RESTAURANT_CATEGORIES).expect("bundled inventory is valid")
    }

    pub fn from_examples<'a>(examples: impl IntoIterator<Item = &'a Example>) -> Self {
        CategoryInventory::new(
            examples
                .into_iter()
                .flat_map(|e| e.gold().iter().map(|t| t.category.clone())),
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = &Category> {
        self.categories.iter()
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn contains(&self, c: &Category) -> bool {
        self.categories.contains(c)
    }

    /// Case-insensitive lookup by surface form.
    pub fn resolve_surface(&self, phrase: &str) -> Option<&Category> {
        let wanted = phrase.to_lowercase();
        self.categories.iter().find(|c| c.surface() == wanted)
    }

    /// Fails when a lexicalization phrase equals a category surface form,
    /// which would make generated text ambiguous.
    pub fn check_against(&self, lex: &Lexicalization) -> Result<(), DomainError> {
        for word in lex.control_words() {
            if let Some(c) = self.resolve_surface(word) {
                return Err(DomainError::Lexicalization(format!(
                    "phrase {word:?} collides with category {}",
                    c.label()
                )));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.categories {
            out.push_str(&c.label());
            out.push('\n');
        }
        out
    }
}
