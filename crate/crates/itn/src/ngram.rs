//! Count-based n-gram language model with stupid backoff.
//!
//! Used to rescore written-form candidates in the WFST baseline and to pick
//! contextually appropriate verbalizations during TN data generation.
//! Scoring backs off from the highest-order observed context, multiplying a
//! fixed discount per backoff level, with a uniform 1/|V| floor so every
//! sequence gets a finite score.

use crate::{Error, Result};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

pub const DEFAULT_ORDER: usize = 4;
pub const DEFAULT_ALPHA: f64 = 0.4;
pub const DEFAULT_LAMBDA: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    alpha: f64,
    /// context tokens -> next token -> count. Contexts have length < order.
    counts: HashMap<Vec<String>, HashMap<String, u64>>,
    /// Sum of counts per context (continuation total).
    totals: HashMap<Vec<String>, u64>,
    vocab: HashSet<String>,
}

impl NGramModel {
    /// Counts all k-grams, k ≤ order, over the corpus with `<s>`/`</s>`
    /// sentence padding.
    pub fn train(corpus: &[Vec<String>], order: usize) -> Result<NGramModel> {
        Self::train_with_alpha(corpus, order, DEFAULT_ALPHA)
    }

    pub fn train_with_alpha(corpus: &[Vec<String>], order: usize, alpha: f64) -> Result<NGramModel> {
        assert!(order >= 1);
        assert!(alpha > 0.0 && alpha < 1.0);
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut model = NGramModel {
            order,
            alpha,
            counts: HashMap::new(),
            totals: HashMap::new(),
            vocab: HashSet::new(),
        };
        for sentence in corpus {
            let mut padded: Vec<&str> = Vec::with_capacity(sentence.len() + order);
            for _ in 0..order.saturating_sub(1) {
                padded.push(BOS);
            }
            padded.extend(sentence.iter().map(|s| s.as_str()));
            padded.push(EOS);
            let first_real = order - 1;
            for target in first_real..padded.len() {
                model.vocab.insert(padded[target].to_string());
                for k in 1..=order {
                    if k > target + 1 {
                        break;
                    }
                    let ctx: Vec<String> = padded[target + 1 - k..target]
                        .iter()
                        .map(|s| s.to_string())
                        .collect();
                    let tok = padded[target].to_string();
                    *model
                        .counts
                        .entry(ctx.clone())
                        .or_default()
                        .entry(tok)
                        .or_default() += 1;
                    *model.totals.entry(ctx).or_default() += 1;
                }
            }
        }
        Ok(model)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn cond_prob(&self, context: &[&str], token: &str) -> f64 {
        let mut discount = 1.0;
        let mut lo = 0;
        loop {
            let ctx: Vec<String> = context[lo..].iter().map(|s| s.to_string()).collect();
            if let Some(next) = self.counts.get(&ctx) {
                if let Some(&c) = next.get(token) {
                    let total = self.totals[&ctx];
                    return discount * (c as f64) / (total as f64);
                }
            }
            if lo == context.len() {
                // Unseen even as a unigram: uniform floor.
                return discount * self.alpha / (self.vocab.len() as f64);
            }
            discount *= self.alpha;
            lo += 1;
        }
    }

    /// Total log-probability (natural log, ≤ 0) of `tokens` as a sentence,
    /// including the end-of-sentence transition.
    pub fn score(&self, tokens: &[&str]) -> f64 {
        let mut padded: Vec<&str> = Vec::with_capacity(tokens.len() + self.order);
        for _ in 0..self.order - 1 {
            padded.push(BOS);
        }
        padded.extend_from_slice(tokens);
        padded.push(EOS);
        let mut total = 0.0;
        for target in self.order - 1..padded.len() {
            let lo = target + 1 - self.order.min(target + 1);
            total += self.cond_prob(&padded[lo..target], padded[target]).ln();
        }
        total
    }

    /// Log-probability of a token window without sentence boundaries.
    /// Used for local context comparisons during data generation.
    pub fn score_window(&self, tokens: &[&str]) -> f64 {
        let mut total = 0.0;
        for target in 0..tokens.len() {
            let lo = target.saturating_sub(self.order - 1);
            total += self.cond_prob(&tokens[lo..target], tokens[target]).ln();
        }
        total
    }

    pub fn perplexity(&self, tokens: &[&str]) -> f64 {
        (-self.score(tokens) / (tokens.len() + 1) as f64).exp()
    }

    /// Index of the candidate minimizing `fst_cost − λ·score`; ties go to
    /// the lowest index.
    pub fn rerank(&self, candidates: &[(Vec<String>, f64)], lambda: f64) -> usize {
        assert!(!candidates.is_empty());
        let mut best = 0;
        let mut best_obj = f64::INFINITY;
        for (i, (tokens, fst_cost)) in candidates.iter().enumerate() {
            let refs: Vec<&str> = tokens.iter().map(|s| s.as_str()).collect();
            let obj = fst_cost - lambda * self.score(&refs);
            if obj < best_obj {
                best_obj = obj;
                best = i;
            }
        }
        best
    }

    /// Sorted text persistence: a header with order and alpha, then one
    /// `count<TAB>context<TAB>token` line per stored gram, grouped by order.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "order\t{}", self.order)?;
        writeln!(w, "alpha\t{}", self.alpha)?;
        let mut lines: BTreeMap<(usize, String, String), u64> = BTreeMap::new();
        for (ctx, next) in &self.counts {
            for (tok, &c) in next {
                lines.insert((ctx.len() + 1, ctx.join(" "), tok.clone()), c);
            }
        }
        for ((_, ctx, tok), c) in lines {
            writeln!(w, "{c}\t{ctx}\t{tok}")?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl BufRead) -> Result<NGramModel> {
        let mut lines = r.lines();
        let header = |line: Option<std::io::Result<String>>, key: &str| -> Result<String> {
            let line = line
                .transpose()
                .map_err(|e| Error::Format(e.to_string()))?
                .ok_or_else(|| Error::Format("truncated model header".into()))?;
            let (k, v) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format("bad model header".into()))?;
            if k != key {
                return Err(Error::Format(format!("expected `{key}` header, got `{k}`")));
            }
            Ok(v.to_string())
        };
        let order: usize = header(lines.next(), "order")?
            .parse()
            .map_err(|_| Error::Format("bad order".into()))?;
        let alpha: f64 = header(lines.next(), "alpha")?
            .parse()
            .map_err(|_| Error::Format("bad alpha".into()))?;
        let mut model = NGramModel {
            order,
            alpha,
            counts: HashMap::new(),
            totals: HashMap::new(),
            vocab: HashSet::new(),
        };
        for line in lines {
            let line = line.map_err(|e| Error::Format(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, '\t');
            let (c, ctx, tok) = (
                parts.next().ok_or_else(|| Error::Format("bad gram line".into()))?,
                parts.next().ok_or_else(|| Error::Format("bad gram line".into()))?,
                parts.next().ok_or_else(|| Error::Format("bad gram line".into()))?,
            );
            let count: u64 = c.parse().map_err(|_| Error::Format("bad count".into()))?;
            let ctx: Vec<String> = if ctx.is_empty() {
                Vec::new()
            } else {
                ctx.split(' ').map(|s| s.to_string()).collect()
            };
            if tok != BOS {
                model.vocab.insert(tok.to_string());
            }
            *model
                .counts
                .entry(ctx.clone())
                .or_default()
                .entry(tok.to_string())
                .or_default() += count;
            *model.totals.entry(ctx).or_default() += count;
        }
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<NGramModel> {
        let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut raw.as_slice())
    }
}
