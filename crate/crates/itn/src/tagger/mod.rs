//! Chunk-attention transformer tagger.
//!
//! Assigns an ITN-category tag (`blank`, `cat`, `_cat`) to every lexical
//! token. Attention is restricted so position `i` sees exactly the positions
//! `j < (floor(i/C)+1)·C`: everything through the end of its own chunk.
//! Because that visible set is a prefix, attention is computed by slicing
//! rather than masking, which makes chunk causality and streaming/offline
//! equivalence exact rather than approximate.
//!
//! All math runs in f64; trained parameters are quantized through f32 once
//! at the end of training so checkpoints round-trip bit-exactly.

mod io;
mod model;
mod stream;
mod train;

pub use stream::{StreamSession, TaggedToken};
pub use train::{gradient_check, span_f1, tag_spans, train, TrainConfig, TrainReport};

use crate::{Error, Result};
use model::Params;
use ndarray::Array2;
use std::collections::HashMap;

pub const UNK_TOKEN: &str = "<unk>";

/// Ordered tag list: `blank` at 0, then `cat`, `_cat` per category in
/// sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct TagInventory {
    tags: Vec<String>,
}

impl TagInventory {
    pub fn from_categories<I: IntoIterator<Item = S>, S: Into<String>>(cats: I) -> TagInventory {
        let mut names: Vec<String> = cats.into_iter().map(|c| c.into()).collect();
        names.sort();
        names.dedup();
        let mut tags = vec![crate::datagen::BLANK_TAG.to_string()];
        for c in &names {
            tags.push(c.clone());
            tags.push(format!("_{c}"));
        }
        TagInventory { tags }
    }

    /// Derives the inventory from the categories present in a corpus.
    pub fn from_corpus(corpus: &[crate::datagen::TaggedSentence]) -> TagInventory {
        let mut cats: Vec<String> = Vec::new();
        for s in corpus {
            for t in &s.tags {
                let c = t.strip_prefix('_').unwrap_or(t);
                if c != crate::datagen::BLANK_TAG {
                    cats.push(c.to_string());
                }
            }
        }
        Self::from_categories(cats)
    }

    fn from_tags(tags: Vec<String>) -> TagInventory {
        TagInventory { tags }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn index(&self, tag: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == tag)
    }

    pub fn tag(&self, index: usize) -> &str {
        &self.tags[index]
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    /// Category names covered by this inventory.
    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.tags
            .iter()
            .skip(1)
            .filter(|t| !t.starts_with('_'))
            .map(|t| t.as_str())
    }
}

/// Word-level vocabulary with `<unk>` at id 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn build<'a>(tokens: impl Iterator<Item = &'a str>, min_count: usize) -> Vocab {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *counts.entry(t).or_default() += 1;
        }
        let mut kept: Vec<&str> = counts
            .iter()
            .filter(|(_, &c)| c >= min_count)
            .map(|(&t, _)| t)
            .collect();
        kept.sort();
        let mut items = vec![UNK_TOKEN.to_string()];
        items.extend(kept.into_iter().map(|s| s.to_string()));
        let index = items
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Vocab { items, index }
    }

    fn from_items(items: Vec<String>) -> Vocab {
        let index = items
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Vocab { items, index }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggerConfig {
    pub num_blocks: usize,
    pub model_dim: usize,
    pub num_heads: usize,
    pub ffn_dim: usize,
    pub chunk_size: usize,
    pub dropout: f64,
    pub max_position: usize,
    /// Past chunks visible to attention; 0 means unlimited.
    pub max_history_chunks: usize,
}

impl Default for TaggerConfig {
    /// Desk-scale default; the paper's production model used 6 blocks,
    /// dim 256, 8 heads.
    fn default() -> Self {
        TaggerConfig {
            num_blocks: 2,
            model_dim: 64,
            num_heads: 4,
            ffn_dim: 128,
            chunk_size: 6,
            dropout: 0.1,
            max_position: 512,
            max_history_chunks: 0,
        }
    }
}

impl TaggerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.model_dim == 0 || self.num_heads == 0 || self.model_dim % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "model_dim {} must be a positive multiple of num_heads {}",
                self.model_dim, self.num_heads
            )));
        }
        if self.num_blocks == 0 || self.ffn_dim == 0 || self.chunk_size == 0 {
            return Err(Error::Config(
                "num_blocks, ffn_dim and chunk_size must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0,1)", self.dropout)));
        }
        Ok(())
    }

    /// End (exclusive) of the positions visible from position `i`, capped
    /// to sequence length `t`.
    pub fn visible_end(&self, i: usize, t: usize) -> usize {
        (((i / self.chunk_size) + 1) * self.chunk_size).min(t)
    }

    /// Start of the positions visible from position `i` under the history
    /// cap.
    pub fn visible_start(&self, i: usize) -> usize {
        if self.max_history_chunks == 0 {
            0
        } else {
            let chunk = i / self.chunk_size;
            chunk.saturating_sub(self.max_history_chunks) * self.chunk_size
        }
    }
}

#[derive(Debug, Clone)]
pub struct TaggerModel {
    pub config: TaggerConfig,
    pub vocab: Vocab,
    pub inventory: TagInventory,
    pub(crate) params: Params,
}

impl TaggerModel {
    /// Randomly initialized model (normal 0.02 weights, unit LN gains).
    pub fn init(config: TaggerConfig, vocab: Vocab, inventory: TagInventory, seed: u64) -> Result<TaggerModel> {
        config.validate()?;
        let params = Params::init(&config, vocab.len(), inventory.len(), seed);
        Ok(TaggerModel {
            config,
            vocab,
            inventory,
            params,
        })
    }

    /// Per-token tag log-probability rows for a token-id sequence.
    pub fn forward(&self, ids: &[usize]) -> Result<Array2<f64>> {
        assert!(!ids.is_empty(), "forward requires at least one token");
        if ids.len() > self.config.max_position {
            return Err(Error::OverLength {
                len: ids.len(),
                max: self.config.max_position,
            });
        }
        Ok(model::forward(&self.params, &self.config, ids))
    }

    /// Most likely tag per token, as strings.
    pub fn tag_tokens(&self, tokens: &[String]) -> Result<Vec<String>> {
        let logp = self.forward(&self.vocab.encode(tokens))?;
        Ok(logp
            .rows()
            .into_iter()
            .map(|r| {
                let (best, _) = r
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| {
                        if v > acc.1 {
                            (i, v)
                        } else {
                            acc
                        }
                    });
                self.inventory.tag(best).to_string()
            })
            .collect())
    }

    /// Quantizes every parameter through f32 so that a save/load cycle is
    /// bit-exact.
    pub fn quantize_f32(&mut self) {
        self.params.quantize_f32();
    }
}
