//! Evaluation: ITN instance extraction by token alignment, instance-level
//! precision/recall/F1, token error rate, the full-utterance WFST + n-gram
//! baseline, and the runtime-scaling benchmark.

use crate::fst::{compile_linear, compose, shortest_paths, Arc as FstArc, Fst, Label, SharedTable, EPSILON, SEP_SYM, UNK_SYM};
use crate::ngram::NGramModel;
use crate::pipeline::ItnEngine;
use crate::rules::GrammarPack;
use crate::{Error, Result};
use serde::Serialize;
use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

/// One converted region: the half-open lexical token span it replaces and
/// the display text it produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItnInstance {
    pub start: usize,
    pub end: usize,
    pub display: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Equal,
    Substitute,
    Delete, // consumes a source token only
    Insert, // consumes a target token only
}

/// Minimal-edit alignment of `source` to `target`; among minimal
/// alignments substitutions are preferred over deletions over insertions,
/// so the result is deterministic.
fn align(source: &[String], target: &[String]) -> Vec<Op> {
    let n = source.len();
    let m = target.len();
    let mut d = vec![vec![0u32; m + 1]; n + 1];
    for i in 0..=n {
        d[i][0] = i as u32;
    }
    for j in 0..=m {
        d[0][j] = j as u32;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + u32::from(source[i - 1] != target[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    let mut ops = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let sub_cost = u32::from(i > 0 && j > 0 && source[i - 1] != target[j - 1]);
        if i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + sub_cost {
            ops.push(if sub_cost == 0 { Op::Equal } else { Op::Substitute });
            i -= 1;
            j -= 1;
        } else if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            ops.push(Op::Delete);
            i -= 1;
        } else {
            ops.push(Op::Insert);
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

/// Extracts ITN instances by aligning the lexical sentence with a display
/// rendering: each maximal run of non-matching alignment operations
/// becomes one instance spanning the lexical tokens it consumed.
pub fn extract_instances(lexical: &[String], display: &[String]) -> Vec<ItnInstance> {
    let ops = align(lexical, display);
    let mut out = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    let mut run: Option<(usize, Vec<String>)> = None;
    for op in ops {
        if op == Op::Equal {
            if let Some((start, toks)) = run.take() {
                out.push(ItnInstance { start, end: i, display: toks.join(" ") });
            }
        } else if run.is_none() {
            run = Some((i, Vec::new()));
        }
        match op {
            Op::Equal => {
                i += 1;
                j += 1;
            }
            Op::Substitute => {
                run.as_mut().unwrap().1.push(display[j].clone());
                i += 1;
                j += 1;
            }
            Op::Delete => i += 1,
            Op::Insert => {
                run.as_mut().unwrap().1.push(display[j].clone());
                j += 1;
            }
        }
    }
    if let Some((start, toks)) = run {
        out.push(ItnInstance { start, end: i, display: toks.join(" ") });
    }
    out
}

fn overlaps(a: &ItnInstance, b: &ItnInstance) -> bool {
    let lo = a.start.max(b.start);
    let hi = a.end.min(b.end);
    if a.start == a.end || b.start == b.end {
        lo <= hi
    } else {
        lo < hi
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Greedy position-order matching for one sentence: a hypothesis instance
/// is a true positive when an unmatched reference instance has the same
/// display string and an overlapping lexical span.
pub fn match_instances(refs: &[ItnInstance], hyps: &[ItnInstance]) -> Counts {
    let mut used = vec![false; refs.len()];
    let mut c = Counts::default();
    for h in hyps {
        let hit = refs
            .iter()
            .enumerate()
            .find(|(k, r)| !used[*k] && r.display == h.display && overlaps(r, h));
        match hit {
            Some((k, _)) => {
                used[k] = true;
                c.tp += 1;
            }
            None => c.fp += 1,
        }
    }
    c.fn_ = used.iter().filter(|u| !**u).count();
    c
}

pub fn prf1(c: &Counts) -> (f64, f64, f64) {
    if c.tp + c.fp + c.fn_ == 0 {
        return (1.0, 1.0, 1.0);
    }
    let p = if c.tp + c.fp == 0 { 0.0 } else { c.tp as f64 / (c.tp + c.fp) as f64 };
    let r = if c.tp + c.fn_ == 0 { 0.0 } else { c.tp as f64 / (c.tp + c.fn_) as f64 };
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

fn edit_distance(a: &[String], b: &[String]) -> usize {
    align(a, b).iter().filter(|op| **op != Op::Equal).count()
}

/// Token error rate in percent: edits / max(1, reference length) * 100.
pub fn ter(hyp: &[String], reference: &[String]) -> f64 {
    100.0 * edit_distance(hyp, reference) as f64 / reference.len().max(1) as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub sentences: usize,
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Corpus-level TER: total edits over total reference tokens.
    pub ter: f64,
}

/// One test pair: lexical tokens and the reference display tokens.
pub type TestPair = (Vec<String>, Vec<String>);

/// Reads a `lexical<TAB>display` TSV test set.
pub fn read_testset(path: &Path) -> Result<Vec<TestPair>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in raw.lines().filter(|l| !l.trim().is_empty()) {
        let (lex, disp) = line
            .split_once('\t')
            .ok_or_else(|| Error::Format(format!("test set row needs two columns: `{line}`")))?;
        out.push((
            lex.split_whitespace().map(str::to_string).collect(),
            disp.split_whitespace().map(str::to_string).collect(),
        ));
    }
    if out.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(out)
}

/// Scores any sentence converter against a test set.
pub fn evaluate(
    mut convert: impl FnMut(&[String]) -> Result<Vec<String>>,
    testset: &[TestPair],
) -> Result<EvalReport> {
    let mut counts = Counts::default();
    let mut edits = 0usize;
    let mut ref_tokens = 0usize;
    for (lexical, reference) in testset {
        let hyp = convert(lexical)?;
        let refs = extract_instances(lexical, reference);
        let hyps = extract_instances(lexical, &hyp);
        let c = match_instances(&refs, &hyps);
        counts.tp += c.tp;
        counts.fp += c.fp;
        counts.fn_ += c.fn_;
        edits += edit_distance(&hyp, reference);
        ref_tokens += reference.len().max(1);
    }
    let (precision, recall, f1) = prf1(&counts);
    Ok(EvalReport {
        sentences: testset.len(),
        counts,
        precision,
        recall,
        f1,
        ter: 100.0 * edits as f64 / ref_tokens as f64,
    })
}

/// Cost of leaving one token unconverted, so conversions are preferred by
/// the search and the language model arbitrates among the n best.
const IDENTITY_COST: f32 = 0.01;
/// Cost of opening a span, so one long conversion beats two short ones
/// covering the same tokens.
const SPAN_COST: f32 = 0.001;

/// The non-streaming baseline: one utterance-level transducer that unions
/// every category grammar (baseline direction) with identity self-loops,
/// decoded by n-best search and reranked with an n-gram model over display
/// text.
pub struct BaselineConverter {
    hub: Fst,
    syms: SharedTable,
    sep: Label,
    unk: Label,
}

impl BaselineConverter {
    /// Builds the utterance transducer. `lexicon` lists extra words the
    /// input may contain beyond the grammar alphabet; anything still
    /// unknown at conversion time passes through via `<unk>`.
    pub fn new<I, S>(pack: &GrammarPack, lexicon: I) -> BaselineConverter
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut table = (**pack.symbols()).clone();
        for w in lexicon {
            table.add(w.as_ref());
        }
        let syms: SharedTable = std::sync::Arc::new(table);
        let sep = syms.label(SEP_SYM).unwrap();
        let unk = syms.label(UNK_SYM).unwrap();

        let mut hub = Fst::new(syms.clone(), syms.clone());
        hub.set_final(0, 0.0);
        // Identity self-loops (word then a token boundary) for every plain
        // symbol plus <unk>.
        for (label, sym) in syms.symbols().enumerate().skip(1) {
            let label = label as Label;
            let reserved = sym.starts_with('<') && sym.ends_with('>');
            if reserved && label != unk {
                continue;
            }
            let s = hub.add_state();
            hub.add_arc(0, FstArc::new(label, label, IDENTITY_COST, s));
            hub.add_arc(s, FstArc::new(EPSILON, sep, 0.0, 0));
        }
        // Embed each category's baseline-direction transducer.
        for cat in pack.categories() {
            let g = &cat.untagged;
            let off = hub.num_states();
            for _ in 0..g.num_states() {
                hub.add_state();
            }
            for s in 0..g.num_states() {
                for a in g.arcs(s) {
                    hub.add_arc(off + s, FstArc::new(a.ilabel, a.olabel, a.weight, off + a.nextstate));
                }
            }
            hub.add_arc(0, FstArc::new(EPSILON, EPSILON, SPAN_COST, off + g.start()));
            for (f, w) in g.finals().collect::<Vec<_>>() {
                hub.add_arc(off + f, FstArc::new(EPSILON, sep, w, 0));
            }
        }
        BaselineConverter { hub, syms, sep, unk }
    }

    /// Converts one sentence: n-best decode, then pick the candidate
    /// minimizing `cost - lambda * lm_score` (pure min-cost when `lm` is
    /// absent or `nbest` is 1).
    pub fn convert(
        &self,
        tokens: &[String],
        lm: Option<&NGramModel>,
        lambda: f64,
        nbest: usize,
    ) -> Result<Vec<String>> {
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        let toks: Vec<&str> = tokens.iter().map(|s| s.as_str()).collect();
        let linear = compile_linear(&toks, &self.syms);
        let lattice = compose(&linear, &self.hub)?;
        let paths = shortest_paths(&lattice, nbest.max(1))?;
        if paths.is_empty() {
            // Cannot happen: the identity loops accept everything.
            return Ok(tokens.to_vec());
        }
        let mut seen = HashSet::new();
        let mut candidates: Vec<(Vec<String>, f64)> = Vec::new();
        for p in &paths {
            let display = self.render(&p.olabels, tokens);
            if seen.insert(display.clone()) {
                candidates.push((display, p.weight as f64));
            }
        }
        let winner = match lm {
            Some(lm) => lm.rerank(&candidates, lambda),
            None => 0,
        };
        Ok(candidates.swap_remove(winner).0)
    }

    /// Glues a path's output labels into display tokens: tags are dropped,
    /// `<sp>` closes a token, `<unk>` recovers the original input word.
    fn render(&self, olabels: &[Label], tokens: &[String]) -> Vec<String> {
        let mut out = Vec::new();
        let mut buf = String::new();
        let mut next_oov = tokens
            .iter()
            .filter(|t| self.syms.label(t).is_none())
            .cloned()
            .collect::<Vec<_>>()
            .into_iter();
        for &l in olabels {
            if l == self.sep {
                if !buf.is_empty() {
                    out.push(std::mem::take(&mut buf));
                }
                continue;
            }
            if l == self.unk {
                buf.push_str(&next_oov.next().unwrap_or_else(|| UNK_SYM.to_string()));
                continue;
            }
            let sym = self.syms.symbol(l).unwrap();
            if sym.starts_with('<') && sym.ends_with('>') {
                continue;
            }
            buf.push_str(sym);
        }
        if !buf.is_empty() {
            out.push(buf);
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub len: usize,
    pub engine_secs: f64,
    pub baseline_secs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of log(time) against log(length).
    pub engine_exponent: f64,
    pub baseline_exponent: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn log_log_slope(rows: &[(usize, f64)]) -> f64 {
    let n = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|(l, _)| (*l as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|(_, t)| t.max(1e-12).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// Times engine and baseline conversion at each sentence length (5 warmup
/// runs, then the median of `trials` timed runs) and fits the growth
/// exponents on a log-log scale.
pub fn bench_runtime(
    engine: &ItnEngine,
    baseline: &BaselineConverter,
    lm: Option<&NGramModel>,
    lambda: f64,
    nbest: usize,
    lengths: &[usize],
    trials: usize,
    seed: u64,
) -> Result<BenchReport> {
    assert!(lengths.len() >= 2, "need at least two lengths to fit a slope");
    let trials = trials.max(1);
    let mut rows = Vec::new();
    for &len in lengths {
        let tokens = crate::synth::bench_tokens(len, seed ^ len as u64);
        for _ in 0..5 {
            engine.convert(&tokens)?;
            baseline.convert(&tokens, lm, lambda, nbest)?;
        }
        let mut et = Vec::with_capacity(trials);
        let mut bt = Vec::with_capacity(trials);
        for _ in 0..trials {
            let t0 = Instant::now();
            engine.convert(&tokens)?;
            et.push(t0.elapsed().as_secs_f64());
            let t0 = Instant::now();
            baseline.convert(&tokens, lm, lambda, nbest)?;
            bt.push(t0.elapsed().as_secs_f64());
        }
        rows.push(BenchRow {
            len,
            engine_secs: median(et),
            baseline_secs: median(bt),
        });
    }
    let engine_exponent = log_log_slope(
        &rows.iter().map(|r| (r.len, r.engine_secs)).collect::<Vec<_>>(),
    );
    let baseline_exponent = log_log_slope(
        &rows.iter().map(|r| (r.len, r.baseline_secs)).collect::<Vec<_>>(),
    );
    Ok(BenchReport { rows, engine_exponent, baseline_exponent })
}
