//! The streaming ITN engine: tagger output drives span buffering, closed
//! spans are transduced by their category FST (with an LRU cache in front),
//! and everything else passes through verbatim.
//!
//! Every output token is either an input token unchanged or the product of
//! exactly one category FST applied to one contiguous tagged span; a span
//! the grammar rejects falls back to its original tokens.

use crate::datagen::BLANK_TAG;
use crate::fst::transduce_span;
use crate::rules::GrammarPack;
use crate::tagger::{StreamSession, TaggerModel};
use crate::{Error, Result};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

pub const DEFAULT_MAX_SPAN: usize = 10;
pub const DEFAULT_CACHE_CAPACITY: usize = 1024;

type CacheKey = (String, Vec<String>);

/// Bounded LRU map from (category, lexical span) to its conversion result
/// (None caches a grammar rejection).
pub struct SpanCache {
    capacity: usize,
    stamp: u64,
    entries: HashMap<CacheKey, (u64, Option<Vec<String>>)>,
    hits: u64,
    misses: u64,
}

impl SpanCache {
    pub fn new(capacity: usize) -> SpanCache {
        assert!(capacity >= 1);
        SpanCache {
            capacity,
            stamp: 0,
            entries: HashMap::new(),
            hits: 0,
            misses: 0,
        }
    }

    pub fn get(&mut self, key: &CacheKey) -> Option<Option<Vec<String>>> {
        self.stamp += 1;
        let stamp = self.stamp;
        match self.entries.get_mut(key) {
            Some((used, v)) => {
                *used = stamp;
                self.hits += 1;
                Some(v.clone())
            }
            None => {
                self.misses += 1;
                None
            }
        }
    }

    pub fn put(&mut self, key: CacheKey, value: Option<Vec<String>>) {
        self.stamp += 1;
        self.entries.insert(key, (self.stamp, value));
        if self.entries.len() > self.capacity {
            let oldest = self
                .entries
                .iter()
                .min_by_key(|(_, (used, _))| *used)
                .map(|(k, _)| k.clone())
                .expect("cache non-empty");
            self.entries.remove(&oldest);
        }
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EngineConfig {
    pub max_span_len: usize,
    pub cache_capacity: usize,
    pub cache_enabled: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_span_len: DEFAULT_MAX_SPAN,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            cache_enabled: true,
        }
    }
}

pub struct ItnEngine {
    model: Arc<TaggerModel>,
    pack: RwLock<Arc<GrammarPack>>,
    cache: Arc<Mutex<SpanCache>>,
    config: EngineConfig,
}

impl ItnEngine {
    pub fn new(model: Arc<TaggerModel>, pack: Arc<GrammarPack>, config: EngineConfig) -> Result<ItnEngine> {
        check_inventory(&model, &pack)?;
        Ok(ItnEngine {
            model,
            pack: RwLock::new(pack),
            cache: Arc::new(Mutex::new(SpanCache::new(config.cache_capacity))),
            config,
        })
    }

    pub fn model(&self) -> &Arc<TaggerModel> {
        &self.model
    }

    pub fn pack(&self) -> Arc<GrammarPack> {
        self.pack.read().unwrap().clone()
    }

    /// Atomically replaces the grammar pack. Sessions already running keep
    /// the pack they started with; new sessions see the new one.
    pub fn swap_pack(&self, pack: Arc<GrammarPack>) -> Result<()> {
        check_inventory(&self.model, &pack)?;
        let mut current = self.pack.write().unwrap();
        // Cached conversions belong to the outgoing pack.
        self.cache.lock().unwrap().clear();
        *current = pack;
        Ok(())
    }

    pub fn cache_stats(&self) -> (u64, u64, usize) {
        let c = self.cache.lock().unwrap();
        (c.hits(), c.misses(), c.len())
    }

    pub fn session(&self) -> Session<'_> {
        Session {
            tagger: StreamSession::new(&self.model),
            spans: SpanState::new(
                self.pack(),
                self.config,
                self.config.cache_enabled.then(|| self.cache.clone()),
            ),
        }
    }

    /// Batch conversion: a single forward pass over the whole sentence.
    /// Chunk causality makes this token-for-token identical to streaming
    /// the sentence through a session.
    pub fn convert(&self, tokens: &[String]) -> Result<Vec<String>> {
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        let tags = self.model.tag_tokens(tokens)?;
        self.convert_with_tags(tokens, &tags)
    }

    /// Conversion from externally supplied (oracle) tags, bypassing the
    /// tagger but sharing all span logic.
    pub fn convert_with_tags(&self, tokens: &[String], tags: &[String]) -> Result<Vec<String>> {
        assert_eq!(tokens.len(), tags.len());
        let mut spans = SpanState::new(
            self.pack(),
            self.config,
            self.config.cache_enabled.then(|| self.cache.clone()),
        );
        for (tok, tag) in tokens.iter().zip(tags) {
            spans.on_tagged(tok, tag);
        }
        spans.finish();
        Ok(spans.take_output())
    }
}

fn check_inventory(model: &TaggerModel, pack: &GrammarPack) -> Result<()> {
    for cat in model.inventory.categories() {
        if pack.get(cat).is_none() {
            return Err(Error::Config(format!(
                "tagger inventory category `{cat}` missing from grammar pack"
            )));
        }
    }
    Ok(())
}

/// One streaming conversion in progress.
pub struct Session<'a> {
    tagger: StreamSession<'a>,
    spans: SpanState,
}

impl Session<'_> {
    /// Feeds one lexical token; returns display tokens released by any
    /// completed chunk.
    pub fn push(&mut self, token: &str) -> Result<Vec<String>> {
        for tt in self.tagger.push(token)? {
            self.spans.on_tagged(&tt.token, &tt.tag);
        }
        Ok(self.spans.take_output())
    }

    /// End of utterance: forces tag emission, closes any open span, and
    /// releases all remaining output. The session is reusable afterwards.
    pub fn flush(&mut self) -> Result<Vec<String>> {
        for tt in self.tagger.flush()? {
            self.spans.on_tagged(&tt.token, &tt.tag);
        }
        self.spans.finish();
        self.tagger.reset();
        Ok(self.spans.take_output())
    }

    /// Orphan `_cat` tags seen so far (treated as blank).
    pub fn orphan_continuations(&self) -> usize {
        self.spans.orphans
    }
}

/// Span buffering shared by model-driven and oracle-driven conversion.
struct SpanState {
    pack: Arc<GrammarPack>,
    cache: Option<Arc<Mutex<SpanCache>>>,
    max_span_len: usize,
    open: Option<(String, Vec<String>)>,
    out: Vec<String>,
    orphans: usize,
}

impl SpanState {
    fn new(pack: Arc<GrammarPack>, config: EngineConfig, cache: Option<Arc<Mutex<SpanCache>>>) -> SpanState {
        SpanState {
            pack,
            cache,
            max_span_len: config.max_span_len,
            open: None,
            out: Vec::new(),
            orphans: 0,
        }
    }

    fn on_tagged(&mut self, token: &str, tag: &str) {
        let continuation = tag.strip_prefix('_');
        match (&mut self.open, continuation) {
            (Some((cat, tokens)), Some(cont)) if cont == cat => {
                tokens.push(token.to_string());
                if tokens.len() >= self.max_span_len {
                    self.close_span();
                }
                return;
            }
            _ => {}
        }
        // Any non-continuation (or wrong-category continuation) closes the
        // open span before this token is handled.
        if self.open.is_some() {
            self.close_span();
        }
        if tag == BLANK_TAG {
            self.out.push(token.to_string());
        } else if continuation.is_some() {
            // Orphan continuation: treated as blank.
            self.orphans += 1;
            self.out.push(token.to_string());
        } else {
            self.open = Some((tag.to_string(), vec![token.to_string()]));
            if 1 >= self.max_span_len {
                self.close_span();
            }
        }
    }

    fn close_span(&mut self) {
        let Some((cat, tokens)) = self.open.take() else {
            return;
        };
        let converted = self.convert_span(&cat, &tokens);
        match converted {
            Some(display) => self.out.extend(display),
            None => self.out.extend(tokens),
        }
    }

    fn convert_span(&mut self, cat: &str, tokens: &[String]) -> Option<Vec<String>> {
        let key = (cat.to_string(), tokens.to_vec());
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.lock().unwrap().get(&key) {
                return hit;
            }
        }
        let value = transduce(&self.pack, cat, tokens);
        if let Some(cache) = &self.cache {
            cache.lock().unwrap().put(key, value.clone());
        }
        value
    }

    fn finish(&mut self) {
        self.close_span();
    }

    fn take_output(&mut self) -> Vec<String> {
        std::mem::take(&mut self.out)
    }
}

/// Uncached span transduction through a pack.
pub fn transduce(pack: &GrammarPack, category: &str, tokens: &[String]) -> Option<Vec<String>> {
    let cat = pack.get(category)?;
    let open = format!("<{category}>");
    let close = format!("</{category}>");
    let mut span: Vec<&str> = Vec::with_capacity(tokens.len() + 2);
    span.push(&open);
    span.extend(tokens.iter().map(|t| t.as_str()));
    span.push(&close);
    transduce_span(&span, &cat.itn)
}
