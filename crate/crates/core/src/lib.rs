//! Sentiment classification toolkit for Spanish-English code-switched tweets:
//! SentiMix-style corpus handling, social-media text normalization, static
//! word embeddings, from-scratch CNN and bidirectional GRU classifiers, and
//! class-wise evaluation.

pub mod analysis;
pub mod autograd;
pub mod checkpoint;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod normalizer;
pub mod training;
pub mod verification;

pub use error::{Error, Result};
