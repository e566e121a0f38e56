//! Tagger training-data generation.
//!
//! Written-form text is scanned with the tag-outputting TN transducers:
//! matched spans are replaced by a verbalization wrapped in `<cat> … </cat>`
//! tags, and the tagged text is flattened into per-token tag rows. Span
//! detection is greedy longest-match, leftmost-first; among equal-length
//! matches the n-gram model picks the category, and `~alt`-marked
//! verbalizations within the winner are sampled pseudorandomly.

use crate::fst::transduce_text;
use crate::ngram::NGramModel;
use crate::rules::GrammarPack;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

pub const BLANK_TAG: &str = "blank";

/// Lexical text with inline `<cat> … </cat>` spans, space-joined.
#[derive(Debug, Clone, PartialEq)]
pub struct XmlTaggedText(pub String);

/// Parallel lexical tokens and per-token tags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaggedSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

/// One candidate verbalization of a written span.
struct Reading {
    category: String,
    lexical: Vec<String>,
    alt: bool,
    weight: f32,
}

fn span_readings(pack: &GrammarPack, window: &str, width: usize) -> Vec<Reading> {
    let mut out = Vec::new();
    for cat in pack.categories() {
        if cat.max_written_tokens < width {
            continue;
        }
        for p in transduce_text(&cat.tn, window) {
            let lexical: Vec<String> = p
                .olabels
                .iter()
                .map(|&l| cat.tn.osyms().symbol(l).unwrap().to_string())
                .filter(|s| !(s.starts_with('<') && s.ends_with('>')))
                .collect();
            out.push(Reading {
                category: cat.name.clone(),
                lexical,
                alt: p.alt,
                weight: p.weight,
            });
        }
    }
    out
}

/// Applies TN normalization to one written sentence.
pub fn normalize(
    written: &[&str],
    pack: &GrammarPack,
    lm: &NGramModel,
    seed: u64,
) -> XmlTaggedText {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_width = pack
        .categories()
        .map(|c| c.max_written_tokens)
        .max()
        .unwrap_or(1);
    let mut out: Vec<String> = Vec::new();
    let mut lexical_tail: Vec<String> = Vec::new();
    let mut i = 0;
    while i < written.len() {
        let mut matched = false;
        for width in (1..=max_width.min(written.len() - i)).rev() {
            let window = written[i..i + width].join(" ");
            let readings = span_readings(pack, &window, width);
            if readings.is_empty() {
                continue;
            }
            let chosen = choose(&readings, lm, &lexical_tail, &written[i + width..], &mut rng);
            out.push(format!("<{}>", chosen.category));
            out.extend(chosen.lexical.iter().cloned());
            out.push(format!("</{}>", chosen.category));
            lexical_tail.extend(chosen.lexical.iter().cloned());
            i += width;
            matched = true;
            break;
        }
        if !matched {
            out.push(written[i].to_string());
            lexical_tail.push(written[i].to_string());
            i += 1;
        }
    }
    XmlTaggedText(out.join(" "))
}

/// Picks one reading: category by n-gram score of the local lexical
/// context, then pseudorandom among the winner's `~alt` verbalizations.
fn choose<'a>(
    readings: &'a [Reading],
    lm: &NGramModel,
    before: &[String],
    after: &[&str],
    rng: &mut ChaCha8Rng,
) -> &'a Reading {
    let context_score = |r: &Reading| {
        let mut window: Vec<&str> = Vec::new();
        let start = before.len().saturating_sub(lm.order() - 1);
        window.extend(before[start..].iter().map(|s| s.as_str()));
        window.extend(r.lexical.iter().map(|s| s.as_str()));
        window.extend(after.iter().take(2));
        lm.score_window(&window)
    };
    // Best score per category decides the category; FST weight then
    // lexicographic order break exact score ties deterministically.
    let mut best: Option<(&Reading, f64)> = None;
    for r in readings {
        let s = context_score(r);
        let better = match &best {
            None => true,
            Some((b, bs)) => {
                s > *bs
                    || (s == *bs
                        && (r.weight < b.weight || (r.weight == b.weight && r.lexical < b.lexical)))
            }
        };
        if better {
            best = Some((r, s));
        }
    }
    let (winner, _) = best.expect("non-empty readings");
    let mut alts: Vec<&Reading> = readings
        .iter()
        .filter(|r| r.alt && r.category == winner.category)
        .collect();
    if alts.len() >= 2 {
        alts.sort_by(|a, b| a.lexical.cmp(&b.lexical));
        alts.dedup_by(|a, b| a.lexical == b.lexical);
        alts[rng.gen_range(0..alts.len())]
    } else {
        winner
    }
}

/// Flattens tagged text into per-token tags: span-initial tokens get `cat`,
/// continuations `_cat`, everything else `blank`.
pub fn to_training_pairs(x: &XmlTaggedText) -> Result<TaggedSentence> {
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    let mut open: Option<String> = None;
    let mut first = false;
    for tok in x.0.split_whitespace() {
        if let Some(cat) = tok.strip_prefix("</").and_then(|t| t.strip_suffix('>')) {
            match open.take() {
                Some(o) if o == cat => {}
                _ => return Err(Error::MalformedSpan(tok.to_string())),
            }
        } else if let Some(cat) = tok.strip_prefix('<').and_then(|t| t.strip_suffix('>')) {
            if open.is_some() {
                return Err(Error::MalformedSpan(tok.to_string()));
            }
            open = Some(cat.to_string());
            first = true;
        } else {
            tokens.push(tok.to_string());
            match &open {
                Some(cat) if first => {
                    tags.push(cat.clone());
                    first = false;
                }
                Some(cat) => tags.push(format!("_{cat}")),
                None => tags.push(BLANK_TAG.to_string()),
            }
        }
    }
    if let Some(cat) = open {
        return Err(Error::MalformedSpan(format!("<{cat}>")));
    }
    Ok(TaggedSentence { tokens, tags })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CorpusStats {
    pub sentences: usize,
    pub spans: BTreeMap<String, usize>,
}

/// Normalizes a written corpus (one sentence per line) into TSV
/// `token<TAB>tag` rows with blank-line sentence separators.
///
/// Line `k` is normalized with `seed ^ k`, so output is byte-identical for
/// a fixed seed regardless of any sharding of the input.
pub fn generate_corpus(
    written_corpus: &Path,
    pack: &GrammarPack,
    lm: &NGramModel,
    seed: u64,
    out: &Path,
) -> Result<CorpusStats> {
    let file = std::fs::File::open(written_corpus).map_err(|e| Error::io(written_corpus, e))?;
    let mut sink = std::io::BufWriter::new(
        std::fs::File::create(out).map_err(|e| Error::io(out, e))?,
    );
    let mut stats = CorpusStats {
        sentences: 0,
        spans: BTreeMap::new(),
    };
    for (k, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(written_corpus, e))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let tagged = normalize(&tokens, pack, lm, seed ^ k as u64);
        let pairs = to_training_pairs(&tagged)?;
        if stats.sentences > 0 {
            writeln!(sink).map_err(|e| Error::io(out, e))?;
        }
        for (tok, tag) in pairs.tokens.iter().zip(&pairs.tags) {
            writeln!(sink, "{tok}\t{tag}").map_err(|e| Error::io(out, e))?;
            if tag != BLANK_TAG && !tag.starts_with('_') {
                *stats.spans.entry(tag.clone()).or_default() += 1;
            }
        }
        stats.sentences += 1;
    }
    sink.flush().map_err(|e| Error::io(out, e))?;
    Ok(stats)
}

/// Reads a TSV corpus written by [`generate_corpus`].
pub fn read_corpus(path: &Path) -> Result<Vec<TaggedSentence>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut cur = TaggedSentence {
        tokens: Vec::new(),
        tags: Vec::new(),
    };
    for line in raw.lines() {
        if line.is_empty() {
            if !cur.tokens.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            continue;
        }
        let (tok, tag) = line
            .split_once('\t')
            .ok_or_else(|| Error::Format(format!("bad corpus row `{line}`")))?;
        cur.tokens.push(tok.to_string());
        cur.tags.push(tag.to_string());
    }
    if !cur.tokens.is_empty() {
        out.push(cur);
    }
    Ok(out)
}
