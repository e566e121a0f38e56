//! Training loop: cross-entropy with AdamW and a Noam learning-rate
//! schedule, best checkpoint selected by held-out span F1.

use super::model::{loss_and_grad, Params};
use super::{TagInventory, TaggerConfig, TaggerModel, Vocab};
use crate::datagen::TaggedSentence;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub warmup_steps: usize,
    /// Peak learning-rate scale of the Noam schedule.
    pub peak_lr: f64,
    pub weight_decay: f64,
    pub min_count: usize,
    pub seed: u64,
    /// Fraction of sentences held out for checkpoint selection.
    pub holdout: f64,
    /// Stop early once held-out span F1 reaches this value (1.0+ disables).
    pub target_f1: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 16,
            warmup_steps: 200,
            peak_lr: 3e-3,
            weight_decay: 0.01,
            min_count: 1,
            seed: 0,
            holdout: 0.1,
            target_f1: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub holdout_f1: Vec<f64>,
    pub best_epoch: usize,
    pub best_f1: f64,
    /// Corpus indices of the held-out split, so callers can score the
    /// returned model on exactly the sentences it never trained on.
    pub holdout_indices: Vec<usize>,
}

fn noam_lr(step: usize, warmup: usize, peak: f64) -> f64 {
    let s = step.max(1) as f64;
    let w = warmup.max(1) as f64;
    // Normalized so the maximum of the schedule equals `peak` at s == w.
    peak * w.sqrt() * (s.powf(-0.5)).min(s * w.powf(-1.5))
}

struct AdamW {
    m: Params,
    v: Params,
    step: usize,
}

const ADAM_B1: f64 = 0.9;
const ADAM_B2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl AdamW {
    fn new(p: &Params) -> AdamW {
        AdamW {
            m: p.zeros_like(),
            v: p.zeros_like(),
            step: 0,
        }
    }

    fn update(&mut self, p: &mut Params, grads: &Params, lr: f64, weight_decay: f64) {
        self.step += 1;
        let bc1 = 1.0 - ADAM_B1.powi(self.step as i32);
        let bc2 = 1.0 - ADAM_B2.powi(self.step as i32);
        for (((_, theta), (_, g)), ((_, m), (_, v))) in p
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut().into_iter().zip(self.v.tensors_mut()))
        {
            ndarray::Zip::from(theta)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|t, &g, m, v| {
                    *m = ADAM_B1 * *m + (1.0 - ADAM_B1) * g;
                    *v = ADAM_B2 * *v + (1.0 - ADAM_B2) * g * g;
                    let mh = *m / bc1;
                    let vh = *v / bc2;
                    *t -= lr * (mh / (vh.sqrt() + ADAM_EPS) + weight_decay * *t);
                });
        }
    }
}

/// (category, start, end) spans implied by a tag sequence.
pub fn tag_spans(tags: &[String]) -> Vec<(String, usize, usize)> {
    let mut spans = Vec::new();
    let mut open: Option<(String, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let continues = open
            .as_ref()
            .map(|(c, _)| tag.strip_prefix('_') == Some(c.as_str()))
            .unwrap_or(false);
        if continues {
            continue;
        }
        if let Some((c, start)) = open.take() {
            spans.push((c, start, i));
        }
        if tag != crate::datagen::BLANK_TAG {
            // An orphan continuation still opens a (spurious) span so that
            // it costs precision rather than vanishing.
            let cat = tag.strip_prefix('_').unwrap_or(tag);
            open = Some((cat.to_string(), i));
        }
    }
    if let Some((c, start)) = open {
        spans.push((c, start, tags.len()));
    }
    spans
}

/// Span-level F1 of predicted vs reference tag sequences (exact span
/// matches over category and boundaries).
pub fn span_f1(pairs: &[(Vec<String>, Vec<String>)]) -> f64 {
    let mut tp = 0usize;
    let mut pred = 0usize;
    let mut gold = 0usize;
    for (reference, hypothesis) in pairs {
        let r = tag_spans(reference);
        let h = tag_spans(hypothesis);
        gold += r.len();
        pred += h.len();
        for span in &h {
            if r.contains(span) {
                tp += 1;
            }
        }
    }
    if pred == 0 && gold == 0 {
        return 1.0;
    }
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / pred as f64;
    let r = tp as f64 / gold as f64;
    2.0 * p * r / (p + r)
}

fn holdout_score(model: &TaggerModel, held: &[&TaggedSentence]) -> f64 {
    let pairs: Vec<(Vec<String>, Vec<String>)> = held
        .iter()
        .map(|s| (s.tags.clone(), model.tag_tokens(&s.tokens).unwrap()))
        .collect();
    span_f1(&pairs)
}

/// Trains a tagger on a TSV corpus. The returned model is f32-quantized so
/// checkpoints round-trip exactly.
pub fn train(
    corpus: &[TaggedSentence],
    cfg: TaggerConfig,
    hyper: &TrainConfig,
) -> Result<(TaggerModel, TrainReport)> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let inventory = TagInventory::from_corpus(corpus);
    for s in corpus {
        for tag in &s.tags {
            if inventory.index(tag).is_none() {
                return Err(Error::UnknownTag(tag.clone()));
            }
        }
        if s.tokens.len() > cfg.max_position {
            return Err(Error::OverLength {
                len: s.tokens.len(),
                max: cfg.max_position,
            });
        }
    }

    // Fixed-seed 90/10 split (holdout fraction configurable).
    let mut indices: Vec<usize> = (0..corpus.len()).collect();
    let mut split_rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ 0x5eed_5911);
    indices.shuffle(&mut split_rng);
    let held_n = ((corpus.len() as f64 * hyper.holdout).round() as usize)
        .min(corpus.len().saturating_sub(1));
    let (held_idx, train_idx) = indices.split_at(held_n);
    let held: Vec<&TaggedSentence> = held_idx.iter().map(|&i| &corpus[i]).collect();
    let train_set: Vec<&TaggedSentence> = train_idx.iter().map(|&i| &corpus[i]).collect();

    let vocab = Vocab::build(
        train_set
            .iter()
            .flat_map(|s| s.tokens.iter().map(|t| t.as_str())),
        hyper.min_count,
    );
    let mut model = TaggerModel::init(cfg, vocab, inventory, hyper.seed)?;

    let encoded: Vec<(Vec<usize>, Vec<usize>)> = train_set
        .iter()
        .map(|s| {
            let ids = model.vocab.encode(&s.tokens);
            let tags = s
                .tags
                .iter()
                .map(|t| model.inventory.index(t).unwrap())
                .collect();
            (ids, tags)
        })
        .collect();

    let mut opt = AdamW::new(&model.params);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut report = TrainReport {
        epoch_losses: Vec::new(),
        holdout_f1: Vec::new(),
        best_epoch: 0,
        best_f1: -1.0,
        holdout_indices: held_idx.to_vec(),
    };
    let mut best_params = model.params.clone();

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0usize;
        for batch in order.chunks(hyper.batch_size) {
            let tokens: usize = batch.iter().map(|&i| encoded[i].0.len()).sum();
            let mut grads = model.params.zeros_like();
            let mut loss = 0.0;
            for &i in batch {
                let (ids, tags) = &encoded[i];
                let mut drop_rng = ChaCha8Rng::seed_from_u64(rng.gen());
                let rng_opt = (model.config.dropout > 0.0).then_some(&mut drop_rng);
                loss += loss_and_grad(
                    &model.params,
                    &model.config,
                    ids,
                    tags,
                    tokens as f64,
                    &mut grads,
                    rng_opt,
                );
            }
            let lr = noam_lr(opt.step + 1, hyper.warmup_steps, hyper.peak_lr);
            opt.update(&mut model.params, &grads, lr, hyper.weight_decay);
            epoch_loss += loss;
            epoch_tokens += tokens;
        }
        report.epoch_losses.push(epoch_loss / epoch_tokens as f64);

        let f1 = if held.is_empty() {
            1.0
        } else {
            holdout_score(&model, &held)
        };
        report.holdout_f1.push(f1);
        if f1 > report.best_f1 {
            report.best_f1 = f1;
            report.best_epoch = epoch;
            best_params = model.params.clone();
        }
        if f1 >= hyper.target_f1 {
            break;
        }
    }

    model.params = best_params;
    model.quantize_f32();
    Ok((model, report))
}

/// Compares analytic gradients against central finite differences on
/// `samples` randomly chosen parameters; returns the max relative error.
pub fn gradient_check(
    model: &TaggerModel,
    tokens: &[usize],
    tags: &[usize],
    samples: usize,
    seed: u64,
) -> f64 {
    let mut params = model.params.clone();
    let cfg = model.config;
    let scale = tokens.len() as f64;
    let mut grads = params.zeros_like();
    loss_and_grad(&params, &cfg, tokens, tags, scale, &mut grads, None);

    let shapes: Vec<(usize, usize)> = params
        .tensors()
        .iter()
        .map(|(_, t)| (t.nrows(), t.ncols()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel = 0.0f64;
    let eps = 1e-5;
    for _ in 0..samples {
        let ti = rng.gen_range(0..shapes.len());
        // Restrict embedding rows to ones actually touched by the input.
        let (r, c) = loop {
            let (rows, cols) = shapes[ti];
            let r = rng.gen_range(0..rows);
            let c = rng.gen_range(0..cols);
            let name = params.tensors()[ti].0.clone();
            if name == "tok_emb" && !tokens.contains(&r) {
                continue;
            }
            if name == "pos_emb" && r >= tokens.len() {
                continue;
            }
            break (r, c);
        };
        let orig = params.tensors()[ti].1[[r, c]];
        let probe = |params: &mut Params, value: f64| {
            params.tensors_mut()[ti].1[[r, c]] = value;
            let mut sink = params.zeros_like();
            loss_and_grad(params, &cfg, tokens, tags, scale, &mut sink, None) / scale
        };
        let up = probe(&mut params, orig + eps);
        let down = probe(&mut params, orig - eps);
        params.tensors_mut()[ti].1[[r, c]] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let analytic = grads.tensors()[ti].1[[r, c]];
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max((numeric - analytic).abs() / denom);
    }
    max_rel
}
