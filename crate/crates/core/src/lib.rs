//! Marker-based structured generation for cross-lingual aspect-based
//! sentiment analysis.
//!
//! The crate covers the whole offline pipeline: the tuple data model and its
//! lexicalization ([`domain`]), the `[A] … [C] … [P] …` serialization
//! ([`format`]), corpus ingestion and few-shot mixing ([`corpus`]),
//! grammar-constrained greedy decoding ([`decode`]) over abstract
//! tokenizers and scorers ([`token`], [`scorers`], [`bridge`]), exact-match
//! evaluation ([`eval`]) and sweep orchestration ([`experiment`]).

pub mod bridge;
pub mod corpus;
pub mod decode;
pub mod domain;
pub mod eval;
pub mod experiment;
pub mod format;
pub mod scorers;
pub mod token;

pub use domain::{
    AspectTerm, Category, CategoryInventory, Element, Example, Lexicalization, Polarity, SentimentTuple, Span, Task,
    TaskTuple,
};
