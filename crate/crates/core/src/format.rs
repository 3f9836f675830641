//! The marker serialization shared by model inputs, training targets and
//! generated outputs:
//!
//! ```text
//! [A] soup [C] food quality [P] great [;] [A] coffee [C] drinks prices [P] bad
//! ```
//!
//! Markers are ordinary text. Building is exact; parsing accepts any string
//! and reports what it could not use as [`ParseDiagnostic`]s.

use thiserror::Error;

use crate::domain::{dedup_tuples, CategoryInventory, Element, Lexicalization, Task, TaskTuple};

pub const SEPARATOR: &str = "[;]";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("sentence is empty")]
    EmptySentence,
    #[error("tuple {index} has no value for {marker}", marker = element.marker())]
    MissingElement { index: usize, element: Element },
}

/// Marker string appended to inputs, e.g. `[A] [C] [P]` for TASD.
pub fn task_marker_string(task: Task) -> String {
    task.elements().iter().map(|e| e.marker()).collect::<Vec<_>>().join(" ")
}

pub fn build_input(sentence: &str, task: Task) -> Result<String, FormatError> {
    if sentence.trim().is_empty() {
        return Err(FormatError::EmptySentence);
    }
    Ok(format!("{sentence} {}", task_marker_string(task)))
}

/// Serializes task tuples; an empty list gives the empty string.
pub fn build_target(tuples: &[TaskTuple], task: Task, lex: &Lexicalization) -> Result<String, FormatError> {
    let mut segments = Vec::with_capacity(tuples.len());
    for (index, tuple) in tuples.iter().enumerate() {
        let mut parts = Vec::with_capacity(task.elements().len() * 2);
        for &element in task.elements() {
            let missing = || FormatError::MissingElement { index, element };
            let phrase = match element {
                Element::Aspect => lex.term_phrase(tuple.term.as_ref().ok_or_else(missing)?).to_string(),
                Element::Category => tuple.category.as_ref().ok_or_else(missing)?.surface(),
                Element::Polarity => lex.polarity_word(tuple.polarity.ok_or_else(missing)?).to_string(),
            };
            parts.push(element.marker().to_string());
            parts.push(phrase);
        }
        segments.push(parts.join(" "));
    }
    Ok(segments.join(&format!(" {SEPARATOR} ")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    UnknownCategory,
    UnknownPolarity,
    MissingElement,
    StrayText,
    EmptyTerm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub kind: DiagnosticKind,
    /// Offending text, always a substring of the parsed output. For
    /// `MissingElement` this is the whole segment.
    pub fragment: String,
    /// Index of the `[;]`-separated segment.
    pub position: usize,
    /// The element concerned, when there is one.
    pub element: Option<Element>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedOutput {
    pub tuples: Vec<TaskTuple>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

impl ParsedOutput {
    pub fn is_clean(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

/// Byte offset and element of the earliest task marker at or after `from`.
fn next_marker(segment: &str, from: usize, task: Task) -> Option<(usize, Element)> {
    task.elements()
        .iter()
        .filter_map(|&e| segment[from..].find(e.marker()).map(|i| (from + i, e)))
        .min_by_key(|&(i, _)| i)
}

/// Parses generated text back into task tuples.
///
/// Segments are split on `[;]`; inside a segment each task marker's value
/// runs to the next marker. Segments that lack an element or hold an
/// unresolvable category, polarity or empty term are dropped with a
/// diagnostic. Text before the first marker and repeated markers are
/// reported as stray text and ignored. Repeated tuples are removed.
pub fn parse_output(
    text: &str,
    task: Task,
    sentence: &str,
    lex: &Lexicalization,
    inventory: &CategoryInventory,
) -> ParsedOutput {
    let mut out = ParsedOutput::default();
    if text.trim().is_empty() {
        return out;
    }
    let mut tuples = Vec::new();
    for (position, segment) in text.split(SEPARATOR).enumerate() {
        let mut diag = |kind, fragment: &str, element| {
            out.diagnostics.push(ParseDiagnostic {
                kind,
                fragment: fragment.to_string(),
                position,
                element,
            })
        };

        let mut values: Vec<(Element, &str)> = Vec::new();
        let mut cursor = 0;
        let mut current: Option<(Element, usize)> = None;
        loop {
            let found = next_marker(segment, cursor, task);
            let end = found.map_or(segment.len(), |(i, _)| i);
            let chunk = &segment[cursor..end];
            match current {
                None => {
                    if !chunk.trim().is_empty() {
                        diag(DiagnosticKind::StrayText, chunk.trim(), None);
                    }
                }
                Some((element, marker_at)) => {
                    if values.iter().any(|&(e, _)| e == element) {
                        diag(DiagnosticKind::StrayText, segment[marker_at..end].trim(), Some(element));
                    } else {
                        values.push((element, chunk.trim()));
                    }
                }
            }
            match found {
                Some((i, element)) => {
                    current = Some((element, i));
                    cursor = i + element.marker().len();
                }
                None => break,
            }
        }

        let value = |e: Element| values.iter().find(|&&(v, _)| v == e).map(|&(_, s)| s);
        if let Some(&missing) = task.elements().iter().find(|&&e| value(e).is_none()) {
            diag(DiagnosticKind::MissingElement, segment.trim(), Some(missing));
            continue;
        }

        let mut tuple = TaskTuple {
            term: None,
            category: None,
            polarity: None,
        };
        let mut ok = true;
        for &element in task.elements() {
            let phrase = value(element).unwrap_or_default();
            match element {
                Element::Aspect => {
                    if phrase.is_empty() {
                        diag(DiagnosticKind::EmptyTerm, phrase, Some(element));
                        ok = false;
                    } else {
                        tuple.term = Some(lex.term_from_phrase(phrase, sentence));
                    }
                }
                Element::Category => match inventory.resolve_surface(phrase) {
                    Some(c) => tuple.category = Some(c.clone()),
                    None => {
                        diag(DiagnosticKind::UnknownCategory, phrase, Some(element));
                        ok = false;
                    }
                },
                Element::Polarity => match lex.polarity_from_word(phrase) {
                    Some(p) => tuple.polarity = Some(p),
                    None => {
                        diag(DiagnosticKind::UnknownPolarity, phrase, Some(element));
                        ok = false;
                    }
                },
            }
        }
        if ok {
            tuples.push(tuple);
        }
    }
    out.tuples = dedup_tuples(tuples);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AspectTerm, Category, Polarity, SentimentTuple};

    fn tuple(term: &str, cat: &str, p: Polarity) -> TaskTuple {
        let term = if term == "NULL" {
            AspectTerm::Implicit
        } else {
            AspectTerm::explicit(term)
        };
        TaskTuple::project(
            &SentimentTuple::new(term, Category::parse_label(cat).unwrap(), p),
            Task::Tasd,
        )
    }

    fn parse(text: &str, task: Task, sentence: &str) -> ParsedOutput {
        parse_output(
            text,
            task,
            sentence,
            &Lexicalization::default(),
            &CategoryInventory::semeval_restaurants(),
        )
    }

    #[test]
    fn inputs_carry_task_markers() {
        assert_eq!(
            build_input("The staff was very helpful", Task::Tasd).unwrap(),
            "The staff was very helpful [A] [C] [P]"
        );
        assert_eq!(build_input("Great soup", Task::Acsa).unwrap(), "Great soup [C] [P]");
        assert_eq!(build_input("x", Task::E2e).unwrap(), "x [A] [P]");
        assert_eq!(build_input("x", Task::Acte).unwrap(), "x [A] [C]");
        assert_eq!(build_input("  ", Task::Tasd), Err(FormatError::EmptySentence));
    }

    #[test]
    fn targets() {
        let lex = Lexicalization::default();
        let staff = tuple("staff", "SERVICE#GENERAL", Polarity::Positive);
        assert_eq!(
            build_target(&[staff], Task::Tasd, &lex).unwrap(),
            "[A] staff [C] service general [P] great"
        );
        let two = [
            tuple("soup", "FOOD#QUALITY", Polarity::Positive),
            tuple("coffee", "DRINKS#PRICES", Polarity::Negative),
        ];
        assert_eq!(
            build_target(&two, Task::Tasd, &lex).unwrap(),
            "[A] soup [C] food quality [P] great [;] [A] coffee [C] drinks prices [P] bad"
        );
        assert_eq!(build_target(&[], Task::Tasd, &lex).unwrap(), "");
        let implicit = tuple("NULL", "RESTAURANT#GENERAL", Polarity::Neutral);
        assert_eq!(
            build_target(&[implicit], Task::Tasd, &lex).unwrap(),
            "[A] it [C] restaurant general [P] ok"
        );
    }

    #[test]
    fn build_target_requires_task_elements() {
        let lex = Lexicalization::default();
        let mut t = tuple("soup", "FOOD#QUALITY", Polarity::Positive);
        t.category = None;
        assert_eq!(
            build_target(&[t.clone()], Task::Tasd, &lex),
            Err(FormatError::MissingElement {
                index: 0,
                element: Element::Category
            })
        );
        assert_eq!(build_target(&[t], Task::E2e, &lex).unwrap(), "[A] soup [P] great");
    }

    #[test]
    fn parse_reference_string() {
        let out = parse(
            "[A] staff [C] service general [P] great",
            Task::Tasd,
            "The staff was very helpful",
        );
        assert!(out.is_clean());
        assert_eq!(out.tuples, vec![tuple("staff", "SERVICE#GENERAL", Polarity::Positive)]);
        assert_eq!(
            out.tuples[0].term.as_ref().unwrap().span().map(|s| (s.from, s.to)),
            Some((4, 9))
        );
    }

    #[test]
    fn parse_empty() {
        assert_eq!(parse("", Task::Tasd, "x"), ParsedOutput::default());
        assert_eq!(parse("   ", Task::Acsa, "x"), ParsedOutput::default());
    }

    #[test]
    fn missing_element_drops_segment() {
        let out = parse("[A] soup [P] great", Task::Tasd, "Great soup");
        assert!(out.tuples.is_empty());
        assert_eq!(out.diagnostics.len(), 1);
        let d = &out.diagnostics[0];
        assert_eq!(d.kind, DiagnosticKind::MissingElement);
        assert_eq!(d.element.map(|e| e.marker()), Some("[C]"));
        assert_eq!(d.fragment, "[A] soup [P] great");
    }

    #[test]
    fn stray_text_is_ignored() {
        let out = parse("sure: [C] food quality [P] great", Task::Acsa, "Great soup");
        assert_eq!(out.tuples.len(), 1);
        assert_eq!(out.diagnostics.len(), 1);
        assert_eq!(out.diagnostics[0].kind, DiagnosticKind::StrayText);
        assert_eq!(out.diagnostics[0].fragment, "sure:");
    }

    #[test]
    fn unknown_phrases_drop_segment_only() {
        let out = parse(
            "[A] soup [C] meals [P] great [;] [A] coffee [C] drinks prices [P] awful [;] [A] soup [C] food quality [P] great",
            Task::Tasd,
            "Great soup, expensive coffee",
        );
        assert_eq!(out.tuples, vec![tuple("soup", "FOOD#QUALITY", Polarity::Positive)]);
        let kinds: Vec<_> = out.diagnostics.iter().map(|d| (d.kind, d.position)).collect();
        assert_eq!(
            kinds,
            vec![
                (DiagnosticKind::UnknownCategory, 0),
                (DiagnosticKind::UnknownPolarity, 1)
            ]
        );
    }

    #[test]
    fn empty_term_and_duplicates() {
        let out = parse(
            "[A] [P] great [;] [A] soup [P] bad [;] [A] soup [P] bad [;]",
            Task::E2e,
            "soup",
        );
        assert_eq!(out.tuples.len(), 1);
        let kinds: Vec<_> = out.diagnostics.iter().map(|d| d.kind).collect();
        assert_eq!(kinds, vec![DiagnosticKind::EmptyTerm, DiagnosticKind::MissingElement]);
    }

    #[test]
    fn markers_in_any_order() {
        let out = parse("[P] bad [C] drinks prices [A] coffee", Task::Tasd, "coffee");
        assert!(out.is_clean());
        assert_eq!(out.tuples, vec![tuple("coffee", "DRINKS#PRICES", Polarity::Negative)]);
    }

    #[test]
    fn repeated_marker_keeps_first_value() {
        let out = parse("[C] food quality [P] great [P] bad", Task::Acsa, "x");
        assert_eq!(out.tuples[0].polarity, Some(Polarity::Positive));
        assert_eq!(out.diagnostics[0].kind, DiagnosticKind::StrayText);
        assert_eq!(out.diagnostics[0].fragment, "[P] bad");
    }

    #[test]
    fn foreign_markers_are_plain_text() {
        // [A] is not part of ACSA, so it is stray text in front of [C].
        let out = parse("[A] soup [C] food quality [P] great", Task::Acsa, "soup");
        assert_eq!(out.tuples.len(), 1);
        assert_eq!(out.diagnostics[0].kind, DiagnosticKind::StrayText);
    }
}
