//! Synthetic paired corpora for training and benchmarks.
//!
//! Generates display-form sentences (carrier words around written spans)
//! together with a matching spoken-form rendering. The written side feeds
//! training-data generation and display-side language models; the lexical
//! side trains the disambiguation language model. A slice of the corpus is
//! deliberately ambiguous: spans like "four fifty" whose category (time vs
//! cardinal) is only decidable from the words that follow them.

use crate::fst::transduce_text;
use crate::rules::GrammarPack;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Parallel display-form and spoken-form sentences, line for line.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub written: Vec<String>,
    pub lexical: Vec<String>,
}

const CARRIERS: &[&str] = &[
    "the", "a", "i", "we", "they", "he", "she", "is", "was", "are", "see", "you", "on",
    "in", "by", "for", "with", "then", "please", "meet", "me", "about", "around",
    "after", "before", "that", "this", "there", "here", "home", "back", "again", "soon",
    "later", "okay",
];

/// Category-indicative words that precede a span, mirroring how real
/// speech cues categories from the left ("pay twenty dollars", "dial five
/// five five"). Left context is visible at every chunk size, unlike
/// lookahead, so these keep span starts decidable wherever they fall.
fn lead_ins(cat: &str) -> &'static [&'static str] {
    match cat {
        "num" => &["total", "count"],
        "time" => &["at", "until", "toward"],
        "money" => &["pay", "costs"],
        "phone" => &["call", "dial"],
        "alnum" => &["code", "room"],
        "postalcode" => &["zip", "postal"],
        "ordinal" => &["ranked", "finished"],
        "date" => &["since", "due"],
        "fraction" => &["nearly", "split"],
        "measure" => &["weighs", "spans"],
        "percent" => &["rose", "dropped"],
        "math" => &["compute", "hence"],
        "address" => &["visit", "near"],
        // abbreviation, url, email are lexically self-identifying.
        _ => &[],
    }
}

/// Suffix cue words: which list a span is followed by is the only signal
/// separating the time reading from the cardinal reading of pairs like
/// "four fifty".
const TIME_CUES: &[&str] = &["tonight", "tomorrow", "sharp", "today"];
const NUM_CUES: &[&str] = &["total", "points", "items", "pages"];

const UNITS: [&str; 10] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];
const TENS: [&str; 10] = [
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];

const CATEGORIES: &[&str] = &[
    "abbreviation", "address", "alnum", "date", "email", "fraction", "math", "measure",
    "money", "num", "ordinal", "percent", "phone", "postalcode", "time", "url",
];

pub fn synth_corpus(pack: &GrammarPack, n: usize, seed: u64) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = SynthCorpus {
        written: Vec::with_capacity(n),
        lexical: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let (w, l) = sentence(pack, &mut rng);
        corpus.written.push(w.join(" "));
        corpus.lexical.push(l.join(" "));
    }
    corpus
}

fn sentence(pack: &GrammarPack, rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<String>) {
    match rng.gen_range(0..10u32) {
        0 | 1 => {
            let words = carriers(rng, 3, 8);
            (words.clone(), words)
        }
        2..=5 => single_span(pack, rng),
        6 | 7 => ambiguous(rng),
        8 => collocation(rng),
        _ => {
            let (mut w1, mut l1) = single_span(pack, rng);
            let (w2, l2) = single_span(pack, rng);
            w1.extend(w2);
            l1.extend(l2);
            (w1, l1)
        }
    }
}

fn carriers(rng: &mut ChaCha8Rng, min: usize, max: usize) -> Vec<String> {
    let n = rng.gen_range(min..=max);
    (0..n)
        .map(|_| CARRIERS.choose(rng).unwrap().to_string())
        .collect()
}

fn single_span(pack: &GrammarPack, rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<String>) {
    let cat = CATEGORIES[rng.gen_range(0..CATEGORIES.len())];
    let span = sample_written(cat, rng);
    let reading = sample_reading(pack, cat, &span, rng);
    let mut pre = carriers(rng, 0, 2);
    let leads = lead_ins(cat);
    if !leads.is_empty() && rng.gen_bool(0.85) {
        pre.push(leads.choose(rng).unwrap().to_string());
    } else if pre.is_empty() {
        pre = carriers(rng, 1, 2);
    }
    let post = carriers(rng, 0, 3);
    let mut written = pre.clone();
    written.extend(span.split(' ').map(str::to_string));
    written.extend(post.clone());
    let mut lexical = pre;
    lexical.extend(reading);
    lexical.extend(post);
    (written, lexical)
}

/// A sentence whose span reads identically as a time or a cardinal; the
/// category is recoverable only from the cue word after the span.
fn ambiguous(rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<String>) {
    let pre: Vec<String> = ["it", "is"].iter().map(|s| s.to_string()).collect();
    let (span_written, span_lexical, cue) = if rng.gen_bool(0.5) {
        let h = rng.gen_range(1..=9usize);
        // Avoid :30/:45 so the exact reading is the only verbalization.
        let m = loop {
            let m = rng.gen_range(20..=59usize);
            if m != 30 && m != 45 {
                break m;
            }
        };
        let mut lex = vec![UNITS[h].to_string(), TENS[m / 10].to_string()];
        if m % 10 != 0 {
            lex.push(UNITS[m % 10].to_string());
        }
        (
            vec![format!("{h}:{m:02}")],
            lex,
            *TIME_CUES.choose(rng).unwrap(),
        )
    } else {
        let u = rng.gen_range(1..=9usize);
        let t = rng.gen_range(2..=9usize);
        let d = rng.gen_range(0..=9usize);
        let mut lex = vec![UNITS[u].to_string(), TENS[t].to_string()];
        if d != 0 {
            lex.push(UNITS[d].to_string());
        }
        (
            vec![format!("{u}{t}{d}")],
            lex,
            *NUM_CUES.choose(rng).unwrap(),
        )
    };
    let post = carriers(rng, 0, 2);
    let mut written = pre.clone();
    written.extend(span_written);
    written.push(cue.to_string());
    written.extend(post.clone());
    let mut lexical = pre;
    lexical.extend(span_lexical);
    lexical.push(cue.to_string());
    lexical.extend(post);
    (written, lexical)
}

/// Collocations the language model must learn: highway numbers read digit
/// by digit, film-title style cardinals, and zip codes.
fn collocation(rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<String>) {
    match rng.gen_range(0..3u32) {
        0 => {
            let a = rng.gen_range(1..=9usize);
            let b = rng.gen_range(1..=9usize);
            (
                vec!["hwy".into(), format!("{a}0{b}")],
                vec![
                    "hwy".into(),
                    UNITS[a].to_string(),
                    "oh".into(),
                    UNITS[b].to_string(),
                ],
            )
        }
        1 => {
            let a = rng.gen_range(1..=9usize);
            (
                vec![format!("{a}01"), "dalmatians".into()],
                vec![
                    UNITS[a].to_string(),
                    "hundred".into(),
                    "and".into(),
                    "one".into(),
                    "dalmatians".into(),
                ],
            )
        }
        _ => {
            let digits: Vec<usize> = (0..5).map(|_| rng.gen_range(0..=9usize)).collect();
            let mut written = vec!["zip".into(), "code".into()];
            written.push(digits.iter().map(|d| d.to_string()).collect::<String>());
            let mut lexical = vec!["zip".to_string(), "code".to_string()];
            lexical.extend(digits.iter().map(|&d| UNITS[d].to_string()));
            (written, lexical)
        }
    }
}

/// One random display form within the written language of `cat`.
fn sample_written(cat: &str, rng: &mut ChaCha8Rng) -> String {
    match cat {
        // Magnitudes capped so every verbalization stays within the
        // engine's 10-token span limit.
        "num" => rng.gen_range(0..100_000u32).to_string(),
        "time" => format!("{}:{:02}", rng.gen_range(1..=12u32), rng.gen_range(0..60u32)),
        "money" => {
            let d = rng.gen_range(0..1000u32);
            let c = rng.gen_range(0..100u32);
            format!("${d}.{c:02}")
        }
        "phone" => {
            let d = |rng: &mut ChaCha8Rng, n: usize| -> String {
                (0..n).map(|_| rng.gen_range(0..10u32).to_string()).collect()
            };
            if rng.gen_bool(0.5) {
                format!("{}-{}", d(rng, 3), d(rng, 4))
            } else {
                format!("{}-{}-{}", d(rng, 3), d(rng, 3), d(rng, 4))
            }
        }
        "alnum" => {
            let n = rng.gen_range(2..=4usize);
            (0..n).map(|_| rng.gen_range(0..10u32).to_string()).collect()
        }
        "postalcode" => (0..5).map(|_| rng.gen_range(0..10u32).to_string()).collect(),
        "ordinal" => ordinal_written(rng.gen_range(1..=100u32)),
        "url" => format!(
            "www.{}.{}",
            ["example", "openmaps", "news", "weather", "shop"].choose(rng).unwrap(),
            ["com", "org", "net"].choose(rng).unwrap()
        ),
        "email" => format!(
            "{}@{}.{}",
            ["alice", "bob", "carol", "dave", "info", "support"].choose(rng).unwrap(),
            ["example", "mail", "inbox"].choose(rng).unwrap(),
            ["com", "org", "net"].choose(rng).unwrap()
        ),
        "math" => {
            let (a, op, b, c) = match rng.gen_range(0..4u32) {
                0 => {
                    let a = rng.gen_range(0..=49u32);
                    let b = rng.gen_range(0..=49u32);
                    (a, "+", b, a + b)
                }
                1 => {
                    let a = rng.gen_range(0..=99u32);
                    let b = rng.gen_range(0..=a);
                    (a, "-", b, a - b)
                }
                2 => {
                    let a = rng.gen_range(2..=9u32);
                    let b = rng.gen_range(2..=9u32);
                    (a, "x", b, a * b)
                }
                _ => {
                    let q = rng.gen_range(1..=9u32);
                    let b = rng.gen_range(2..=9u32);
                    (q * b, "/", b, q)
                }
            };
            format!("{a} {op} {b} = {c}")
        }
        "address" => {
            let n = rng.gen_range(2..=4usize);
            let digits: String = (0..n).map(|_| rng.gen_range(0..10u32).to_string()).collect();
            format!(
                "{digits} {} {}",
                ["Main", "Oak", "Park", "Elm", "Washington", "Lake"].choose(rng).unwrap(),
                ["St", "Ave", "Rd", "Blvd", "Dr", "Ln"].choose(rng).unwrap()
            )
        }
        "abbreviation" => ["Dr.", "Mr.", "Mrs.", "Prof.", "Jr.", "Sr.", "vs.", "etc."]
            .choose(rng)
            .unwrap()
            .to_string(),
        "date" => {
            let months = [
                "January", "February", "March", "April", "May", "June", "July", "August",
                "September", "October", "November", "December",
            ];
            format!(
                "{} {}",
                months.choose(rng).unwrap(),
                ordinal_written(rng.gen_range(1..=31u32))
            )
        }
        "fraction" => {
            if rng.gen_bool(0.5) {
                ["1/2", "1/3", "2/3", "1/4", "3/4"].choose(rng).unwrap().to_string()
            } else {
                format!("{}/{}", rng.gen_range(1..=9u32), rng.gen_range(1..=9u32))
            }
        }
        "measure" => format!(
            "{} {}",
            rng.gen_range(0..1000u32),
            ["kg", "km", "lb", "ft", "mi", "g"].choose(rng).unwrap()
        ),
        "percent" => format!("{}%", rng.gen_range(0..=100u32)),
        other => panic!("no sampler for category `{other}`"),
    }
}

fn ordinal_written(n: u32) -> String {
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

/// One TN verbalization of `written`, picked uniformly among the category's
/// readings. Panics if the sampler emitted something outside the grammar,
/// which would be a bug in this module.
fn sample_reading(pack: &GrammarPack, cat: &str, written: &str, rng: &mut ChaCha8Rng) -> Vec<String> {
    let c = pack.get(cat).unwrap_or_else(|| panic!("category `{cat}` missing"));
    let readings: Vec<Vec<String>> = transduce_text(&c.tn, written)
        .into_iter()
        .map(|p| {
            p.olabels
                .iter()
                .map(|&l| c.tn.osyms().symbol(l).unwrap().to_string())
                .filter(|s| !(s.starts_with('<') && s.ends_with('>')))
                .collect()
        })
        .collect();
    assert!(!readings.is_empty(), "{cat}: sampler produced `{written}` outside the grammar");
    readings[rng.gen_range(0..readings.len())].clone()
}

/// A spoken-form sentence of exactly `len` tokens with roughly one
/// convertible span per ten tokens; used by the runtime benchmark.
pub fn bench_tokens(len: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        if out.len() % 10 == 5 && out.len() + 2 <= len {
            // A two-word time span: "four thirty".
            out.push(UNITS[rng.gen_range(1..=9usize)].to_string());
            out.push(TENS[rng.gen_range(2..=5usize)].to_string());
        } else {
            out.push(CARRIERS.choose(&mut rng).unwrap().to_string());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::load_pack;
    use std::path::Path;

    fn pack() -> GrammarPack {
        load_pack(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/grammars"))).unwrap()
    }

    #[test]
    fn corpus_is_deterministic_and_paired() {
        let p = pack();
        let a = synth_corpus(&p, 50, 7);
        let b = synth_corpus(&p, 50, 7);
        assert_eq!(a.written, b.written);
        assert_eq!(a.lexical, b.lexical);
        assert_eq!(a.written.len(), 50);
        assert!(a.written.iter().all(|s| !s.is_empty()));
    }

    #[test]
    fn different_seeds_differ() {
        let p = pack();
        let a = synth_corpus(&p, 50, 7);
        let b = synth_corpus(&p, 50, 8);
        assert_ne!(a.written, b.written);
    }

    #[test]
    fn every_category_appears_in_a_large_corpus() {
        let p = pack();
        let c = synth_corpus(&p, 2000, 1);
        for probe in ["$", ":", "%", "@", "www.", "-"] {
            assert!(
                c.written.iter().any(|s| s.contains(probe)),
                "no written form containing `{probe}`"
            );
        }
    }

    #[test]
    fn bench_tokens_exact_length() {
        for len in [10usize, 20, 40, 80, 160] {
            let t = bench_tokens(len, 3);
            assert_eq!(t.len(), len);
        }
        assert_eq!(bench_tokens(40, 5), bench_tokens(40, 5));
    }
}
