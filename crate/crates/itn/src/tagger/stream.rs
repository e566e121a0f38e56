//! Streaming inference: tags are emitted chunk by chunk with explicit
//! latency accounting, and agree exactly with an offline forward pass
//! because the chunk-visible set is a strict prefix.

use super::TaggerModel;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedToken {
    pub token: String,
    pub tag: String,
    /// Tokens that arrived after this one before its tag was emitted.
    pub emit_latency: usize,
}

/// Incremental tagging state over one utterance.
pub struct StreamSession<'a> {
    model: &'a TaggerModel,
    tokens: Vec<String>,
    emitted: usize,
}

impl<'a> StreamSession<'a> {
    pub fn new(model: &'a TaggerModel) -> StreamSession<'a> {
        StreamSession {
            model,
            tokens: Vec::new(),
            emitted: 0,
        }
    }

    /// Feeds one token; returns the tags released by a completed chunk
    /// (empty until the chunk boundary).
    pub fn push(&mut self, token: &str) -> Result<Vec<TaggedToken>> {
        self.tokens.push(token.to_string());
        if self.tokens.len() % self.model.config.chunk_size == 0 {
            self.emit()
        } else {
            Ok(Vec::new())
        }
    }

    /// End of stream: releases any partial final chunk.
    pub fn flush(&mut self) -> Result<Vec<TaggedToken>> {
        self.emit()
    }

    pub fn reset(&mut self) {
        self.tokens.clear();
        self.emitted = 0;
    }

    fn emit(&mut self) -> Result<Vec<TaggedToken>> {
        if self.emitted == self.tokens.len() {
            return Ok(Vec::new());
        }
        // Recompute over the full buffered prefix; chunk causality makes
        // this identical to an offline pass over the final sequence.
        let tags = self.model.tag_tokens(&self.tokens)?;
        let chunk_len = self.tokens.len() - self.emitted;
        let out = (self.emitted..self.tokens.len())
            .map(|i| TaggedToken {
                token: self.tokens[i].clone(),
                tag: tags[i].clone(),
                emit_latency: chunk_len - 1 - (i - self.emitted),
            })
            .collect();
        self.emitted = self.tokens.len();
        Ok(out)
    }
}
