//! Constrained greedy decoding over the marker grammar.
//!
//! A [`Grammar`] is built once per input sentence. It holds the token
//! encodings of every marker, a token trie over category surface forms and
//! another over polarity words, and the set of tokens a copied aspect term
//! may use. [`DecoderState`] tracks where in the grammar a partial output
//! sits; [`Grammar::allowed`] gives the tokens that keep it well formed.
//!
//! Markers, phrases and separators are encoded as separate fragments and
//! concatenated, so the grammar accepts exactly the token sequences whose
//! fragments tokenize that way.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::domain::{CategoryInventory, Element, Lexicalization, Task};
use crate::format::{build_input, SEPARATOR};
use crate::token::{BackendError, Scorer, TokenId, TokenSet, Tokenizer};

pub const DEFAULT_MAX_LEN: usize = 128;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("sentence is empty")]
    EmptySentence,
    #[error("category inventory is empty")]
    EmptyInventory,
    #[error("{0:?} encodes to no tokens")]
    EmptyEncoding(String),
    #[error("token {token} is not allowed in phase {phase:?}")]
    DisallowedToken { token: TokenId, phase: Phase },
    #[error("scorer failure: {0}")]
    ScorerFailure(#[from] BackendError),
    #[error("max_len must be at least 1")]
    ZeroMaxLen,
}

/// Tokens an aspect term may be built from: everything the sentence
/// tokenizes into, plus the implicit word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermTokenSet {
    pub allowed_ids: TokenSet,
}

/// Collects ids from the full sentence, every whitespace-delimited word on
/// its own and with a leading space, and the implicit word both ways.
pub fn term_token_set<T: Tokenizer + ?Sized>(
    sentence: &str,
    tok: &T,
    lex: &Lexicalization,
) -> Result<TermTokenSet, DecodeError> {
    if sentence.trim().is_empty() {
        return Err(DecodeError::EmptySentence);
    }
    let mut ids = TokenSet::new();
    ids.extend(tok.encode(sentence)?);
    let implicit = lex.implicit_word();
    for word in sentence.split_whitespace().chain(std::iter::once(implicit)) {
        ids.extend(tok.encode(word)?);
        ids.extend(tok.encode(&format!(" {word}"))?);
    }
    Ok(TermTokenSet { allowed_ids: ids })
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: BTreeMap<TokenId, usize>,
    terminal: bool,
}

#[derive(Debug, Clone)]
struct PhraseTrie {
    nodes: Vec<TrieNode>,
}

impl PhraseTrie {
    const ROOT: usize = 0;

    fn build<'a, T: Tokenizer + ?Sized>(
        tok: &T,
        phrases: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, DecodeError> {
        let mut nodes = vec![TrieNode::default()];
        for phrase in phrases {
            let ids = tok.encode(phrase)?;
            if ids.is_empty() {
                return Err(DecodeError::EmptyEncoding(phrase.to_string()));
            }
            let mut at = Self::ROOT;
            for id in ids {
                at = match nodes[at].children.get(&id) {
                    Some(&next) => next,
                    None => {
                        nodes.push(TrieNode::default());
                        let next = nodes.len() - 1;
                        nodes[at].children.insert(id, next);
                        next
                    }
                };
            }
            nodes[at].terminal = true;
        }
        Ok(PhraseTrie { nodes })
    }

    fn node(&self, idx: usize) -> &TrieNode {
        &self.nodes[idx]
    }
}

/// Position inside the marker grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Emitting the marker for `element`; `consumed` of its tokens are out.
    ExpectMarker {
        element: Element,
        consumed: usize,
    },
    /// Copying an aspect term; `tokens` non-blank tokens emitted so far.
    InTerm {
        tokens: usize,
    },
    InCategory {
        node: usize,
    },
    InPolarity {
        node: usize,
    },
    /// A tuple is complete: separator or end.
    AtSeparatorChoice,
    /// Emitting the separator after its first token.
    InSeparator {
        consumed: usize,
    },
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoderState {
    pub task: Task,
    pub phase: Phase,
    pub emitted: Vec<TokenId>,
    pub tuples_complete: usize,
}

impl DecoderState {
    pub fn is_finished(&self) -> bool {
        self.phase == Phase::Finished
    }
}

/// Immutable per-sentence grammar; shareable across threads.
#[derive(Debug, Clone)]
pub struct Grammar {
    task: Task,
    end_id: TokenId,
    markers: Vec<Vec<TokenId>>,
    separator: Vec<TokenId>,
    term_set: TermTokenSet,
    term_tokens: TokenSet,
    blank_tokens: TokenSet,
    categories: PhraseTrie,
    polarities: PhraseTrie,
}

/// What may follow a completed element.
enum Continuation {
    Marker(usize),
    SeparatorOrEnd,
}

impl Grammar {
    pub fn new<T: Tokenizer + ?Sized>(
        task: Task,
        inventory: &CategoryInventory,
        lex: &Lexicalization,
        tok: &T,
        sentence: &str,
    ) -> Result<Self, DecodeError> {
        if inventory.is_empty() {
            return Err(DecodeError::EmptyInventory);
        }
        let encode_nonempty = |text: &str| -> Result<Vec<TokenId>, DecodeError> {
            let ids = tok.encode(text)?;
            if ids.is_empty() {
                Err(DecodeError::EmptyEncoding(text.to_string()))
            } else {
                Ok(ids)
            }
        };
        let markers = task
            .elements()
            .iter()
            .map(|e| encode_nonempty(e.marker()))
            .collect::<Result<Vec<_>, _>>()?;
        let separator = encode_nonempty(SEPARATOR)?;
        let term_set = term_token_set(sentence, tok, lex)?;
        let end_id = tok.end_id();

        // Tokens that open a marker or the separator, or end the output,
        // decide grammar transitions and cannot also extend a term.
        let mut term_tokens = term_set.allowed_ids.clone();
        for first in markers.iter().chain(std::iter::once(&separator)).map(|m| m[0]) {
            term_tokens.remove(first);
        }
        term_tokens.remove(end_id);
        // A token whose text spells a marker would split the term on parsing;
        // whitespace-only tokens may pad a term but not make one up.
        let reserved = [
            Element::Aspect.marker(),
            Element::Category.marker(),
            Element::Polarity.marker(),
            SEPARATOR,
        ];
        let mut blank_tokens = TokenSet::new();
        for id in term_tokens.iter().collect::<Vec<_>>() {
            let text = tok.decode(&[id])?;
            if reserved.iter().any(|m| text.contains(m)) {
                term_tokens.remove(id);
            } else if text.trim().is_empty() {
                blank_tokens.insert(id);
            }
        }

        let surfaces: Vec<String> = inventory.iter().map(|c| c.surface()).collect();
        let categories = PhraseTrie::build(tok, surfaces.iter().map(String::as_str))?;
        let polarities = PhraseTrie::build(tok, crate::domain::Polarity::ALL.iter().map(|&p| lex.polarity_word(p)))?;
        Ok(Grammar {
            task,
            end_id,
            markers,
            separator,
            term_set,
            term_tokens,
            blank_tokens,
            categories,
            polarities,
        })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn term_set(&self) -> &TermTokenSet {
        &self.term_set
    }

    pub fn start(&self) -> DecoderState {
        DecoderState {
            task: self.task,
            phase: Phase::ExpectMarker {
                element: self.task.elements()[0],
                consumed: 0,
            },
            emitted: Vec::new(),
            tuples_complete: 0,
        }
    }

    fn slot(&self, element: Element) -> usize {
        self.task
            .elements()
            .iter()
            .position(|&e| e == element)
            .expect("phase element belongs to the task")
    }

    fn continuation(&self, element: Element) -> Continuation {
        let slot = self.slot(element);
        if slot + 1 == self.markers.len() {
            Continuation::SeparatorOrEnd
        } else {
            Continuation::Marker(slot + 1)
        }
    }

    fn continuation_tokens(&self, element: Element, out: &mut TokenSet) {
        match self.continuation(element) {
            Continuation::Marker(slot) => {
                out.insert(self.markers[slot][0]);
            }
            Continuation::SeparatorOrEnd => {
                out.insert(self.separator[0]);
                out.insert(self.end_id);
            }
        }
    }

    fn trie(&self, element: Element) -> &PhraseTrie {
        match element {
            Element::Category => &self.categories,
            _ => &self.polarities,
        }
    }

    pub fn allowed(&self, state: &DecoderState) -> TokenSet {
        let mut out = TokenSet::new();
        match state.phase {
            Phase::ExpectMarker { element, consumed } => {
                out.insert(self.markers[self.slot(element)][consumed]);
                if state.emitted.is_empty() {
                    out.insert(self.end_id);
                }
            }
            Phase::InTerm { tokens } => {
                out.union_with(&self.term_tokens);
                if tokens > 0 {
                    self.continuation_tokens(Element::Aspect, &mut out);
                }
            }
            Phase::InCategory { node } | Phase::InPolarity { node } => {
                let element = phase_element(state.phase);
                let n = self.trie(element).node(node);
                out.extend(n.children.keys().copied());
                if n.terminal {
                    self.continuation_tokens(element, &mut out);
                }
            }
            Phase::AtSeparatorChoice => {
                out.insert(self.separator[0]);
                out.insert(self.end_id);
            }
            Phase::InSeparator { consumed } => {
                out.insert(self.separator[consumed]);
            }
            Phase::Finished => {}
        }
        out
    }

    fn enter_element(&self, element: Element) -> Phase {
        match element {
            Element::Aspect => Phase::InTerm { tokens: 0 },
            Element::Category => Phase::InCategory { node: PhraseTrie::ROOT },
            Element::Polarity => Phase::InPolarity { node: PhraseTrie::ROOT },
        }
    }

    fn after_marker_token(&self, slot: usize, consumed: usize) -> Phase {
        let element = self.task.elements()[slot];
        if consumed == self.markers[slot].len() {
            self.enter_element(element)
        } else {
            Phase::ExpectMarker { element, consumed }
        }
    }

    fn after_separator_token(&self, consumed: usize) -> Phase {
        if consumed == self.separator.len() {
            Phase::ExpectMarker {
                element: self.task.elements()[0],
                consumed: 0,
            }
        } else {
            Phase::InSeparator { consumed }
        }
    }

    /// Applies a continuation token after `element`'s value is complete.
    fn continue_after(&self, element: Element, token: TokenId, state: &mut DecoderState) {
        match self.continuation(element) {
            Continuation::Marker(slot) => state.phase = self.after_marker_token(slot, 1),
            Continuation::SeparatorOrEnd => {
                state.tuples_complete += 1;
                state.phase = if token == self.end_id {
                    Phase::Finished
                } else {
                    self.after_separator_token(1)
                };
            }
        }
    }

    pub fn advance(&self, mut state: DecoderState, token: TokenId) -> Result<DecoderState, DecodeError> {
        if !self.allowed(&state).contains(token) {
            return Err(DecodeError::DisallowedToken {
                token,
                phase: state.phase,
            });
        }
        match state.phase {
            Phase::ExpectMarker { element, consumed } => {
                if state.emitted.is_empty() && token == self.end_id && self.markers[self.slot(element)][0] != token {
                    state.phase = Phase::Finished;
                } else {
                    state.phase = self.after_marker_token(self.slot(element), consumed + 1);
                }
            }
            Phase::InTerm { tokens } => {
                if self.term_tokens.contains(token) {
                    let counted = usize::from(!self.blank_tokens.contains(token));
                    state.phase = Phase::InTerm {
                        tokens: tokens + counted,
                    };
                } else {
                    self.continue_after(Element::Aspect, token, &mut state);
                }
            }
            Phase::InCategory { node } | Phase::InPolarity { node } => {
                let element = phase_element(state.phase);
                let trie = self.trie(element);
                match trie.node(node).children.get(&token) {
                    Some(&next) => {
                        let n = trie.node(next);
                        state.phase = if n.terminal && n.children.is_empty() {
                            match self.continuation(element) {
                                Continuation::Marker(slot) => Phase::ExpectMarker {
                                    element: self.task.elements()[slot],
                                    consumed: 0,
                                },
                                Continuation::SeparatorOrEnd => {
                                    state.tuples_complete += 1;
                                    Phase::AtSeparatorChoice
                                }
                            }
                        } else if element == Element::Category {
                            Phase::InCategory { node: next }
                        } else {
                            Phase::InPolarity { node: next }
                        };
                    }
                    None => self.continue_after(element, token, &mut state),
                }
            }
            Phase::AtSeparatorChoice => {
                state.phase = if token == self.end_id {
                    Phase::Finished
                } else {
                    self.after_separator_token(1)
                };
            }
            Phase::InSeparator { consumed } => {
                state.phase = self.after_separator_token(consumed + 1);
            }
            Phase::Finished => unreachable!("nothing is allowed once finished"),
        }
        if token != self.end_id || !state.is_finished() {
            state.emitted.push(token);
        }
        Ok(state)
    }
}

fn phase_element(phase: Phase) -> Element {
    match phase {
        Phase::InCategory { .. } => Element::Category,
        _ => Element::Polarity,
    }
}

/// Builds the grammar for one sentence in its initial state.
pub fn automaton_init<T: Tokenizer + ?Sized>(
    task: Task,
    inventory: &CategoryInventory,
    lex: &Lexicalization,
    tok: &T,
    sentence: &str,
) -> Result<(Grammar, DecoderState), DecodeError> {
    let grammar = Grammar::new(task, inventory, lex, tok, sentence)?;
    let state = grammar.start();
    Ok((grammar, state))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeConfig {
    pub constrained: bool,
    pub max_len: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            constrained: true,
            max_len: DEFAULT_MAX_LEN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    EndToken,
    MaxLenReached,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutput {
    pub text: String,
    /// Emitted tokens, without the end token.
    pub tokens: Vec<TokenId>,
    pub stop: StopReason,
}

/// Decoding context for one sentence: its encoded input and, when
/// constrained decoding is possible, its grammar.
pub struct Session<'a, T: Tokenizer + ?Sized> {
    tok: &'a T,
    input: Vec<TokenId>,
    grammar: Grammar,
}

impl<'a, T: Tokenizer + ?Sized> Session<'a, T> {
    pub fn new(
        tok: &'a T,
        sentence: &str,
        task: Task,
        inventory: &CategoryInventory,
        lex: &Lexicalization,
    ) -> Result<Self, DecodeError> {
        let input_text = build_input(sentence, task).map_err(|_| DecodeError::EmptySentence)?;
        let input = tok.encode(&input_text)?;
        let grammar = Grammar::new(task, inventory, lex, tok, sentence)?;
        Ok(Session { tok, input, grammar })
    }

    pub fn input(&self) -> &[TokenId] {
        &self.input
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    /// Greedy decoding. Constrained mode restricts every step to the
    /// grammar's allowed set; unconstrained mode never consults it.
    pub fn decode<S: Scorer + ?Sized>(&self, scorer: &mut S, cfg: DecodeConfig) -> Result<DecodeOutput, DecodeError> {
        if cfg.max_len == 0 {
            return Err(DecodeError::ZeroMaxLen);
        }
        let end = self.tok.end_id();
        let mut tokens = Vec::new();
        let mut state = self.grammar.start();
        let stop = loop {
            let next = if cfg.constrained {
                let allowed = self.grammar.allowed(&state);
                let id = scorer.choose(&self.input, &tokens, Some(&allowed))?;
                if !allowed.contains(id) {
                    return Err(BackendError::Failure(format!("scorer chose disallowed token {id}")).into());
                }
                state = self.grammar.advance(state, id)?;
                id
            } else {
                scorer.choose(&self.input, &tokens, None)?
            };
            if next == end {
                break StopReason::EndToken;
            }
            tokens.push(next);
            if tokens.len() >= cfg.max_len {
                break StopReason::MaxLenReached;
            }
        };
        Ok(DecodeOutput {
            text: self.tok.decode(&tokens)?,
            tokens,
            stop,
        })
    }
}

/// One-shot convenience over [`Session`].
#[allow(clippy::too_many_arguments)]
pub fn decode<T: Tokenizer + ?Sized, S: Scorer + ?Sized>(
    scorer: &mut S,
    tok: &T,
    sentence: &str,
    task: Task,
    inventory: &CategoryInventory,
    lex: &Lexicalization,
    cfg: DecodeConfig,
) -> Result<DecodeOutput, DecodeError> {
    Session::new(tok, sentence, task, inventory, lex)?.decode(scorer, cfg)
}
