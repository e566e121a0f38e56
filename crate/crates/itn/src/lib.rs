//! Streaming inverse text normalization (ITN).
//!
//! Converts lexical ASR-style token streams ("four thirty") into display
//! format ("4:30"). A chunk-attention transformer tagger labels each token
//! with an ITN category; closed tagged spans are then transduced by a
//! per-category weighted finite-state transducer compiled from a small
//! rewrite-rule language. Also included: a tag-outputting TN direction for
//! training-data generation, an n-gram-rescored full-utterance WFST
//! baseline, and evaluation / benchmark tooling.

pub mod datagen;
pub mod error;
pub mod eval;
pub mod fst;
pub mod ngram;
pub mod pipeline;
pub mod rules;
pub mod synth;
pub mod tagger;

pub use error::{Error, Result};
