//! In-process tokenizers and scorers. Scores are integers so that argmax is
//! exact on every platform.

use std::collections::{BTreeMap, HashMap};
use std::hash::{DefaultHasher, Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::domain::{CategoryInventory, Element, Example, Lexicalization};
use crate::format::SEPARATOR;
use crate::token::{BackendError, Scorer, TokenId, Tokenizer};

pub const END_TOKEN: &str = "</s>";
pub const UNKNOWN_TOKEN: &str = "<unk>";
/// Score gap between the preferred token(s) and everything else.
pub const DEFAULT_OFF_SCRIPT_PENALTY: i64 = 1_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScorerBuildError {
    #[error("target {0:?} contains text the tokenizer cannot encode")]
    UnencodableTarget(String),
    #[error("substitution step {step} is beyond the target length {len}")]
    BadSubstitutionStep { step: usize, len: usize },
    #[error("substitution at step {step} uses invalid token {token}")]
    BadSubstitutionToken { step: usize, token: TokenId },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

fn marker_and_control_words(lex: &Lexicalization) -> Vec<String> {
    let mut words: Vec<String> = [Element::Aspect, Element::Category, Element::Polarity]
        .iter()
        .map(|e| e.marker().to_string())
        .collect();
    words.push(SEPARATOR.to_string());
    words.extend(lex.control_words().iter().map(|w| w.to_string()));
    words
}

/// Whitespace tokenizer over a closed vocabulary. Id 0 is the end token and
/// id 1 the unknown token.
#[derive(Debug, Clone)]
pub struct WordTokenizer {
    vocab: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl WordTokenizer {
    /// Vocabulary from the words of `texts`, in first-seen order after the
    /// markers.
    pub fn new<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut tok = WordTokenizer {
            vocab: Vec::new(),
            index: HashMap::new(),
        };
        tok.add(END_TOKEN);
        tok.add(UNKNOWN_TOKEN);
        for e in [Element::Aspect, Element::Category, Element::Polarity] {
            tok.add(e.marker());
        }
        tok.add(SEPARATOR);
        for text in texts {
            for word in text.split_whitespace() {
                tok.add(word);
            }
        }
        tok
    }

    /// Everything needed to encode inputs and targets for these examples.
    pub fn for_corpus<'a>(
        examples: impl IntoIterator<Item = &'a Example>,
        inventory: &CategoryInventory,
        lex: &Lexicalization,
    ) -> Self {
        let mut texts = marker_and_control_words(lex);
        texts.extend(inventory.iter().map(|c| c.surface()));
        for e in examples {
            texts.push(e.text.clone());
            for t in e.gold() {
                texts.push(lex.term_phrase(&t.term).to_string());
                texts.push(t.category.surface());
            }
        }
        WordTokenizer::new(texts.iter().map(String::as_str))
    }

    fn add(&mut self, word: &str) -> TokenId {
        if let Some(&id) = self.index.get(word) {
            return id;
        }
        let id = self.vocab.len() as TokenId;
        self.vocab.push(word.to_string());
        self.index.insert(word.to_string(), id);
        id
    }

    pub fn id(&self, word: &str) -> Option<TokenId> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: TokenId) -> Option<&str> {
        self.vocab.get(id as usize).map(String::as_str)
    }
}

impl Tokenizer for WordTokenizer {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn end_id(&self) -> TokenId {
        0
    }

    fn unknown_id(&self) -> Option<TokenId> {
        Some(1)
    }

    fn encode(&self, text: &str) -> Result<Vec<TokenId>, BackendError> {
        Ok(text.split_whitespace().map(|w| self.id(w).unwrap_or(1)).collect())
    }

    fn decode(&self, ids: &[TokenId]) -> Result<String, BackendError> {
        let mut words = Vec::with_capacity(ids.len());
        for &id in ids {
            if id == self.end_id() {
                continue;
            }
            words.push(self.word(id).ok_or(BackendError::UnknownId(id))?);
        }
        Ok(words.join(" "))
    }
}

/// Word-initial piece prefix, as in SentencePiece vocabularies.
pub const WORD_START: char = '\u{2581}';

/// Greedy longest-match subword tokenizer. Pieces that begin a word carry a
/// leading [`WORD_START`]. Runs of whitespace decode to a single space.
#[derive(Debug, Clone)]
pub struct PieceTokenizer {
    pieces: Vec<String>,
    index: HashMap<String, TokenId>,
    longest: usize,
}

impl PieceTokenizer {
    pub fn new<'a>(pieces: impl IntoIterator<Item = &'a str>) -> Self {
        let mut tok = PieceTokenizer {
            pieces: Vec::new(),
            index: HashMap::new(),
            longest: 1,
        };
        for p in [END_TOKEN, UNKNOWN_TOKEN].into_iter().chain(pieces) {
            if !tok.index.contains_key(p) {
                tok.index.insert(p.to_string(), tok.pieces.len() as TokenId);
                tok.pieces.push(p.to_string());
                tok.longest = tok.longest.max(p.chars().count());
            }
        }
        tok
    }

    pub fn id(&self, piece: &str) -> Option<TokenId> {
        self.index.get(piece).copied()
    }

    fn encode_word(&self, word: &str, out: &mut Vec<TokenId>) {
        let chars: Vec<char> = std::iter::once(WORD_START).chain(word.chars()).collect();
        let mut at = 0;
        while at < chars.len() {
            let mut matched = None;
            for len in (1..=self.longest.min(chars.len() - at)).rev() {
                let candidate: String = chars[at..at + len].iter().collect();
                if let Some(&id) = self.index.get(&candidate) {
                    matched = Some((id, len));
                    break;
                }
            }
            match matched {
                Some((id, len)) => {
                    out.push(id);
                    at += len;
                }
                None => {
                    // A bare word-start with no matching piece is dropped.
                    if at != 0 || chars.len() == 1 {
                        out.push(1);
                    }
                    at += 1;
                }
            }
        }
    }
}

impl Tokenizer for PieceTokenizer {
    fn vocab_size(&self) -> usize {
        self.pieces.len()
    }

    fn end_id(&self) -> TokenId {
        0
    }

    fn unknown_id(&self) -> Option<TokenId> {
        Some(1)
    }

    fn encode(&self, text: &str) -> Result<Vec<TokenId>, BackendError> {
        let mut out = Vec::new();
        for word in text.split_whitespace() {
            self.encode_word(word, &mut out);
        }
        Ok(out)
    }

    fn decode(&self, ids: &[TokenId]) -> Result<String, BackendError> {
        let mut text = String::new();
        for &id in ids {
            if id == self.end_id() {
                continue;
            }
            let piece = self.pieces.get(id as usize).ok_or(BackendError::UnknownId(id))?;
            text.push_str(&piece.replace(WORD_START, " "));
        }
        Ok(text.trim_start().to_string())
    }
}

fn encode_checked<T: Tokenizer + ?Sized>(text: &str, tok: &T) -> Result<Vec<TokenId>, ScorerBuildError> {
    let ids = tok.encode(text)?;
    if tok.unknown_id().is_some_and(|unk| ids.contains(&unk)) {
        return Err(ScorerBuildError::UnencodableTarget(text.to_string()));
    }
    Ok(ids)
}

/// Follows a fixed target: while the prefix matches, the next target token
/// ranks strictly first; after the target, or once off script, the end
/// token does.
#[derive(Debug, Clone)]
pub struct ScriptedScorer {
    target: Vec<TokenId>,
    end_id: TokenId,
    vocab_size: usize,
    off_script_penalty: i64,
}

impl ScriptedScorer {
    pub fn new<T: Tokenizer + ?Sized>(target_text: &str, tok: &T) -> Result<Self, ScorerBuildError> {
        Ok(ScriptedScorer {
            target: encode_checked(target_text, tok)?,
            end_id: tok.end_id(),
            vocab_size: tok.vocab_size(),
            off_script_penalty: DEFAULT_OFF_SCRIPT_PENALTY,
        })
    }

    pub fn with_penalty(mut self, penalty: i64) -> Self {
        self.off_script_penalty = penalty.max(2);
        self
    }

    pub fn target(&self) -> &[TokenId] {
        &self.target
    }

    fn on_script(&self, prefix: &[TokenId], accept: impl Fn(usize, TokenId) -> bool) -> bool {
        prefix.len() <= self.target.len() && prefix.iter().enumerate().all(|(i, &t)| accept(i, t))
    }

    /// The scripted token for step `prefix.len()`, or end when off script.
    fn scripted_next(&self, prefix: &[TokenId], on_script: bool) -> TokenId {
        if on_script {
            self.target.get(prefix.len()).copied().unwrap_or(self.end_id)
        } else {
            self.end_id
        }
    }

    fn base_scores(&self, favored: TokenId) -> Vec<i64> {
        let mut scores = vec![-self.off_script_penalty; self.vocab_size];
        scores[favored as usize] = 0;
        scores
    }
}

impl Scorer for ScriptedScorer {
    fn next_scores(&mut self, _input: &[TokenId], prefix: &[TokenId]) -> Result<Vec<i64>, BackendError> {
        let on_script = self.on_script(prefix, |i, t| self.target[i] == t);
        let next = self.scripted_next(prefix, on_script);
        Ok(self.base_scores(next))
    }
}

/// A scripted scorer that, at chosen steps, prefers a wrong token and ranks
/// the scripted one second. Emitting the wrong token keeps it on script.
#[derive(Debug, Clone)]
pub struct AdversarialScorer {
    base: ScriptedScorer,
    substitutions: BTreeMap<usize, TokenId>,
}

impl AdversarialScorer {
    pub fn new(base: ScriptedScorer, substitutions: BTreeMap<usize, TokenId>) -> Result<Self, ScorerBuildError> {
        let len = base.target.len();
        for (&step, &token) in &substitutions {
            if step > len {
                return Err(ScorerBuildError::BadSubstitutionStep { step, len });
            }
            let scripted = base.target.get(step).copied().unwrap_or(base.end_id);
            if token as usize >= base.vocab_size || token == scripted {
                return Err(ScorerBuildError::BadSubstitutionToken { step, token });
            }
        }
        Ok(AdversarialScorer { base, substitutions })
    }

    pub fn base(&self) -> &ScriptedScorer {
        &self.base
    }

    pub fn substitutions(&self) -> &BTreeMap<usize, TokenId> {
        &self.substitutions
    }
}

impl Scorer for AdversarialScorer {
    fn next_scores(&mut self, _input: &[TokenId], prefix: &[TokenId]) -> Result<Vec<i64>, BackendError> {
        let base = &self.base;
        let on_script = base.on_script(prefix, |i, t| {
            base.target[i] == t || self.substitutions.get(&i) == Some(&t)
        });
        let next = base.scripted_next(prefix, on_script);
        let mut scores = base.base_scores(next);
        if on_script {
            if let Some(&wrong) = self.substitutions.get(&prefix.len()) {
                scores[next as usize] = -1;
                scores[wrong as usize] = 0;
            }
        }
        Ok(scores)
    }
}

/// Pseudo-random scores that depend only on `(seed, input, prefix)`.
#[derive(Debug, Clone)]
pub struct NoiseScorer {
    seed: u64,
    vocab_size: usize,
}

impl NoiseScorer {
    pub fn new(seed: u64, vocab_size: usize) -> Self {
        NoiseScorer { seed, vocab_size }
    }
}

impl Scorer for NoiseScorer {
    fn next_scores(&mut self, input: &[TokenId], prefix: &[TokenId]) -> Result<Vec<i64>, BackendError> {
        let mut h = DefaultHasher::new();
        (self.seed, input, prefix).hash(&mut h);
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
        Ok((0..self.vocab_size).map(|_| rng.random_range(0..1_000_000)).collect())
    }
}

/// First vocabulary word that is not in the sentence and is not a marker or
/// lexicalization word. Used to build term-substitution suites.
pub fn out_of_input_word<'a>(tok: &'a WordTokenizer, sentence: &str, lex: &Lexicalization) -> Option<&'a str> {
    let words: std::collections::HashSet<&str> = sentence.split_whitespace().collect();
    let reserved = marker_and_control_words(lex);
    tok.vocab
        .iter()
        .skip(2)
        .map(String::as_str)
        .find(|w| !words.contains(w) && !reserved.iter().any(|r| r == w) && !w.contains('['))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::masked_argmax;

    fn tok() -> WordTokenizer {
        WordTokenizer::new(["Great soup sopa great bad ok it food quality"])
    }

    fn greedy(scorer: &mut dyn Scorer, end: TokenId, limit: usize) -> Vec<TokenId> {
        let mut out = Vec::new();
        while out.len() < limit {
            let scores = scorer.next_scores(&[], &out).unwrap();
            let id = masked_argmax(&scores, None).unwrap();
            if id == end {
                break;
            }
            out.push(id);
        }
        out
    }

    #[test]
    fn word_tokenizer_round_trip() {
        let t = tok();
        let ids = t.encode("[A] soup  [P] great").unwrap();
        assert_eq!(t.decode(&ids).unwrap(), "[A] soup [P] great");
        assert_eq!(t.encode("zebra").unwrap(), vec![1]);
        assert_eq!(t.id("[A]"), Some(2));
        assert!(t.decode(&[999]).is_err());
    }

    #[test]
    fn piece_tokenizer_splits_words() {
        let t = PieceTokenizer::new(["▁so", "up", "▁Great", "▁[", "A", "]"]);
        let ids = t.encode("Great soup").unwrap();
        assert_eq!(
            ids,
            vec![t.id("▁Great").unwrap(), t.id("▁so").unwrap(), t.id("up").unwrap()]
        );
        assert_eq!(t.decode(&ids).unwrap(), "Great soup");
        assert_eq!(t.encode("[A]").unwrap().len(), 3);
        assert_eq!(t.decode(&t.encode("[A] soup").unwrap()).unwrap(), "[A] soup");
        // "x" has no piece: one unknown id
        assert_eq!(t.encode("x").unwrap(), vec![1]);
    }

    #[test]
    fn scripted_follows_target() {
        let t = tok();
        let mut s = ScriptedScorer::new("[A] soup [P] great", &t).unwrap();
        let out = greedy(&mut s, t.end_id(), 50);
        assert_eq!(t.decode(&out).unwrap(), "[A] soup [P] great");
        // off script: end ranks first
        let scores = s.next_scores(&[], &[t.id("soup").unwrap()]).unwrap();
        assert_eq!(masked_argmax(&scores, None), Some(t.end_id()));
    }

    #[test]
    fn scripted_rejects_unknown_words() {
        assert!(matches!(
            ScriptedScorer::new("[A] zebra", &tok()),
            Err(ScorerBuildError::UnencodableTarget(_))
        ));
    }

    #[test]
    fn scripted_empty_target_ends_immediately() {
        let t = tok();
        let mut s = ScriptedScorer::new("", &t).unwrap();
        assert!(greedy(&mut s, t.end_id(), 5).is_empty());
    }

    #[test]
    fn adversarial_differs_only_at_substituted_steps() {
        let t = tok();
        let base = ScriptedScorer::new("[A] soup [P] great", &t).unwrap();
        let sopa = t.id("sopa").unwrap();
        let mut adv = AdversarialScorer::new(base.clone(), BTreeMap::from([(1, sopa)])).unwrap();
        let mut base_mut = base.clone();
        let target = base.target().to_vec();
        for step in 0..=target.len() {
            let prefix = &target[..step];
            let a = adv.next_scores(&[], prefix).unwrap();
            let b = base_mut.next_scores(&[], prefix).unwrap();
            if step == 1 {
                assert_ne!(a, b);
                assert_eq!(masked_argmax(&a, None), Some(sopa));
                assert_eq!(a[target[1] as usize], -1);
            } else {
                assert_eq!(a, b, "step {step}");
            }
        }
        let out = greedy(&mut adv, t.end_id(), 50);
        assert_eq!(t.decode(&out).unwrap(), "[A] sopa [P] great");
    }

    #[test]
    fn adversarial_empty_is_base() {
        let t = tok();
        let base = ScriptedScorer::new("[A] soup [P] great", &t).unwrap();
        let mut adv = AdversarialScorer::new(base.clone(), BTreeMap::new()).unwrap();
        let mut b = base;
        assert_eq!(greedy(&mut adv, 0, 50), greedy(&mut b, 0, 50));
    }

    #[test]
    fn adversarial_validation() {
        let t = tok();
        let base = ScriptedScorer::new("[A] soup", &t).unwrap();
        assert!(matches!(
            AdversarialScorer::new(base.clone(), BTreeMap::from([(5, 3)])),
            Err(ScorerBuildError::BadSubstitutionStep { step: 5, len: 2 })
        ));
        assert!(matches!(
            AdversarialScorer::new(base.clone(), BTreeMap::from([(0, 10_000)])),
            Err(ScorerBuildError::BadSubstitutionToken { .. })
        ));
        let scripted = base.target()[1];
        assert!(AdversarialScorer::new(base, BTreeMap::from([(1, scripted)])).is_err());
    }

    #[test]
    fn noise_is_deterministic() {
        let mut a = NoiseScorer::new(7, 50);
        let mut b = NoiseScorer::new(7, 50);
        assert_eq!(
            a.next_scores(&[1, 2], &[3]).unwrap(),
            b.next_scores(&[1, 2], &[3]).unwrap()
        );
        assert_ne!(
            a.next_scores(&[1, 2], &[3]).unwrap(),
            a.next_scores(&[1, 2], &[4]).unwrap()
        );
    }

    #[test]
    fn out_of_input_word_skips_sentence_and_controls() {
        let t = tok();
        let lex = Lexicalization::default();
        let w = out_of_input_word(&t, "Great soup", &lex).unwrap();
        assert_eq!(w, "sopa");
    }
}
