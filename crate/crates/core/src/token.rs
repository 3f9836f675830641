//! Tokenizer and scorer contracts consumed by the decoder.

use std::collections::BTreeSet;

use thiserror::Error;

pub type TokenId = u32;

/// Failure reported by a tokenizer or scorer backend.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("token id {0} is outside the vocabulary")]
    UnknownId(TokenId),
    #[error("backend does not support {0}")]
    Unsupported(&'static str),
    #[error("allowed set is empty")]
    EmptyMask,
    #[error("backend failure: {0}")]
    Failure(String),
}

/// Ordered set of token ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSet(BTreeSet<TokenId>);

impl TokenSet {
    pub fn new() -> Self {
        TokenSet::default()
    }

    pub fn insert(&mut self, id: TokenId) -> bool {
        self.0.insert(id)
    }

    pub fn remove(&mut self, id: TokenId) -> bool {
        self.0.remove(&id)
    }

    pub fn contains(&self, id: TokenId) -> bool {
        self.0.contains(&id)
    }

    pub fn extend(&mut self, ids: impl IntoIterator<Item = TokenId>) {
        self.0.extend(ids)
    }

    pub fn union_with(&mut self, other: &TokenSet) {
        self.0.extend(other.0.iter().copied())
    }

    pub fn is_subset(&self, other: &TokenSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Ascending order.
    pub fn iter(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<TokenId> for TokenSet {
    fn from_iter<I: IntoIterator<Item = TokenId>>(iter: I) -> Self {
        TokenSet(iter.into_iter().collect())
    }
}

pub trait Tokenizer {
    fn vocab_size(&self) -> usize;

    fn end_id(&self) -> TokenId;

    /// Id that stands in for out-of-vocabulary text, if the tokenizer has one.
    fn unknown_id(&self) -> Option<TokenId> {
        None
    }

    fn encode(&self, text: &str) -> Result<Vec<TokenId>, BackendError>;

    /// Inverse of `encode` up to whitespace normalization. The end id
    /// decodes to nothing.
    fn decode(&self, ids: &[TokenId]) -> Result<String, BackendError>;
}

/// Next-token preferences of a model, conditioned on the encoded input and
/// the tokens emitted so far. Must be deterministic for a fixed
/// `(input, prefix)`.
pub trait Scorer {
    /// One score per vocabulary entry; higher is better.
    fn next_scores(&mut self, input: &[TokenId], prefix: &[TokenId]) -> Result<Vec<i64>, BackendError>;

    /// Highest-scoring token, restricted to `allowed` when given. Ties go to
    /// the lowest id.
    fn choose(
        &mut self,
        input: &[TokenId],
        prefix: &[TokenId],
        allowed: Option<&TokenSet>,
    ) -> Result<TokenId, BackendError> {
        let scores = self.next_scores(input, prefix)?;
        masked_argmax(&scores, allowed).ok_or(BackendError::EmptyMask)
    }
}

impl<S: Scorer + ?Sized> Scorer for &mut S {
    fn next_scores(&mut self, input: &[TokenId], prefix: &[TokenId]) -> Result<Vec<i64>, BackendError> {
        (**self).next_scores(input, prefix)
    }

    fn choose(
        &mut self,
        input: &[TokenId],
        prefix: &[TokenId],
        allowed: Option<&TokenSet>,
    ) -> Result<TokenId, BackendError> {
        (**self).choose(input, prefix, allowed)
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn next_scores(&mut self, input: &[TokenId], prefix: &[TokenId]) -> Result<Vec<i64>, BackendError> {
        (**self).next_scores(input, prefix)
    }

    fn choose(
        &mut self,
        input: &[TokenId],
        prefix: &[TokenId],
        allowed: Option<&TokenSet>,
    ) -> Result<TokenId, BackendError> {
        (**self).choose(input, prefix, allowed)
    }
}

/// Argmax over `scores`, optionally restricted to `allowed`; ties resolve to
/// the lowest id. Ids outside the score vector are ignored.
pub fn masked_argmax(scores: &[i64], allowed: Option<&TokenSet>) -> Option<TokenId> {
    let best = |ids: &mut dyn Iterator<Item = TokenId>| {
        let mut best: Option<(TokenId, i64)> = None;
        for id in ids {
            let Some(&s) = scores.get(id as usize) else {
                continue;
            };
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((id, s));
            }
        }
        best.map(|(id, _)| id)
    };
    match allowed {
        Some(set) => best(&mut set.iter()),
        None => best(&mut (0..scores.len() as TokenId)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_low() {
        let scores = [3, 7, 7, 1];
        assert_eq!(masked_argmax(&scores, None), Some(1));
        let allowed: TokenSet = [0, 3].into_iter().collect();
        assert_eq!(masked_argmax(&scores, Some(&allowed)), Some(0));
        let allowed: TokenSet = [2, 9].into_iter().collect();
        assert_eq!(masked_argmax(&scores, Some(&allowed)), Some(2));
        assert_eq!(masked_argmax(&scores, Some(&TokenSet::new())), None);
        assert_eq!(masked_argmax(&[], None), None);
    }
}
