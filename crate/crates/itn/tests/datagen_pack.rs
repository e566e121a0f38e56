//! TN data generation against the starter pack: paper examples, seed
//! determinism, and corpus round-trips.

mod common;

use common::*;
use itn::datagen::{generate_corpus, normalize, read_corpus, to_training_pairs};
use itn::ngram::NGramModel;

fn lm(sentences: &[&str]) -> NGramModel {
    let corpus: Vec<Vec<String>> = sentences
        .iter()
        .map(|s| s.split_whitespace().map(|t| t.to_string()).collect())
        .collect();
    NGramModel::train(&corpus, 4).unwrap()
}

fn context_lm() -> NGramModel {
    // Lexical transcriptions giving the LM the collocations the paper's
    // disambiguation examples rely on.
    lm(&[
        "take hwy one oh one north",
        "hwy one oh one is closed",
        "exit hwy one oh one",
        "we watched one hundred and one dalmatians",
        "one hundred and one dalmatians is a film",
        "see you at four thirty",
        "that costs twenty five dollars please",
    ])
}

#[test]
fn money_please_paper_example() {
    let pack = load_starter_pack();
    let x = normalize(&["$25.00", "please"], &pack, &context_lm(), 0);
    assert_eq!(x.0, "<money> twenty five dollars </money> please");
    let pairs = to_training_pairs(&x).unwrap();
    assert_eq!(pairs.tokens, vec!["twenty", "five", "dollars", "please"]);
    assert_eq!(pairs.tags, vec!["money", "_money", "_money", "blank"]);
}

#[test]
fn hwy_101_vs_dalmatians() {
    let pack = load_starter_pack();
    let lm = context_lm();
    for seed in 0..5 {
        let x = normalize(&["hwy", "101"], &pack, &lm, seed);
        assert_eq!(x.0, "hwy <alnum> one oh one </alnum>", "seed {seed}");
        let y = normalize(&["101", "dalmatians"], &pack, &lm, seed);
        assert_eq!(
            y.0, "<num> one hundred and one </num> dalmatians",
            "seed {seed}"
        );
    }
}

#[test]
fn alternates_sampled_across_seeds() {
    let pack = load_starter_pack();
    let lm = context_lm();
    let mut counts = std::collections::HashMap::<String, usize>::new();
    let n = 1000usize;
    for seed in 0..n {
        let x = normalize(&["1:45"], &pack, &lm, seed as u64);
        *counts.entry(x.0).or_default() += 1;
    }
    let exact = counts
        .get("<time> one forty five </time>")
        .copied()
        .unwrap_or(0);
    let special = counts
        .get("<time> quarter to two </time>")
        .copied()
        .unwrap_or(0);
    assert_eq!(exact + special, n, "unexpected variants: {counts:?}");
    assert!(exact >= n / 5, "exact reading too rare: {exact}");
    assert!(special >= n / 5, "special reading too rare: {special}");
}

#[test]
fn untagged_text_passes_through() {
    let pack = load_starter_pack();
    let x = normalize(&["hello", "world"], &pack, &context_lm(), 3);
    assert_eq!(x.0, "hello world");
}

#[test]
fn fixed_seed_is_deterministic_and_seeds_differ_only_in_alternates() {
    let pack = load_starter_pack();
    let lm = context_lm();
    let sent = ["meet", "at", "4:30", "on", "June", "1st"];
    let a = normalize(&sent, &pack, &lm, 9);
    let b = normalize(&sent, &pack, &lm, 9);
    assert_eq!(a, b);
    // Across seeds the tags and span boundaries stay fixed; only the time
    // verbalization may flip between its alternates.
    for seed in 0..20 {
        let x = normalize(&sent, &pack, &lm, seed);
        let pairs = to_training_pairs(&x).unwrap();
        assert_eq!(pairs.tags[0..2], ["blank", "blank"]);
        assert_eq!(pairs.tags.last().unwrap(), "_date");
        assert!(
            x.0.contains("<time> four thirty </time>")
                || x.0.contains("<time> half past four </time>"),
            "{}",
            x.0
        );
        assert!(x.0.contains("<date> june first </date>"), "{}", x.0);
    }
}

#[test]
fn generated_spans_round_trip_through_itn() {
    let pack = load_starter_pack();
    let lm = context_lm();
    let sentences: Vec<Vec<&str>> = vec![
        vec!["call", "555-0123", "now"],
        vec!["pay", "$1,204.50", "by", "June", "21st"],
        vec!["the", "3rd", "of", "12", "at", "11:45"],
        vec!["about", "45%", "of", "150", "lb"],
        vec!["visit", "www.example.com", "or", "alice@example.com"],
        vec!["2", "+", "2", "=", "4", "done"],
    ];
    for (k, sent) in sentences.iter().enumerate() {
        let x = normalize(sent, &pack, &lm, k as u64);
        // Re-apply the category ITN FST to each tagged span; the result must
        // be a written form the written sentence actually contained.
        let toks: Vec<&str> = x.0.split_whitespace().collect();
        let mut i = 0;
        let joined = sent.join(" ");
        while i < toks.len() {
            if let Some(cat) = toks[i].strip_prefix('<').and_then(|t| t.strip_suffix('>')) {
                let close = format!("</{cat}>");
                let end = toks[i..].iter().position(|t| **t == close).unwrap() + i;
                let lex: Vec<String> = toks[i + 1..end].iter().map(|t| t.to_string()).collect();
                let written = itn_convert(&pack, cat, &lex)
                    .unwrap_or_else(|| panic!("span {lex:?} rejected by {cat}"));
                assert!(
                    joined.contains(&written.join(" ")),
                    "span {lex:?} -> {written:?} not in `{joined}`"
                );
                i = end + 1;
            } else {
                i += 1;
            }
        }
    }
}

#[test]
fn corpus_generation_is_byte_deterministic_with_stats() {
    let pack = load_starter_pack();
    let lm = context_lm();
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("written.txt");
    std::fs::write(
        &input,
        "pay $25.00 please\nhello world\nmeet at 4:30\nhwy 101 is closed\n",
    )
    .unwrap();
    let out_a = dir.path().join("a.tsv");
    let out_b = dir.path().join("b.tsv");
    let stats_a = generate_corpus(&input, &pack, &lm, 7, &out_a).unwrap();
    let stats_b = generate_corpus(&input, &pack, &lm, 7, &out_b).unwrap();
    assert_eq!(std::fs::read(&out_a).unwrap(), std::fs::read(&out_b).unwrap());
    assert_eq!(stats_a, stats_b);
    assert_eq!(stats_a.sentences, 4);
    assert_eq!(stats_a.spans.get("money"), Some(&1));
    assert_eq!(stats_a.spans.get("time"), Some(&1));
    assert_eq!(stats_a.spans.get("alnum"), Some(&1));

    let sents = read_corpus(&out_a).unwrap();
    assert_eq!(sents.len(), 4);
    assert_eq!(sents[1].tags, vec!["blank", "blank"]);
    // Every row well-formed: continuation tags only ever follow their own
    // category.
    for s in &sents {
        let mut prev: Option<&str> = None;
        for tag in &s.tags {
            if let Some(cont) = tag.strip_prefix('_') {
                let p = prev.expect("continuation cannot start a sentence");
                assert!(p == cont || p.strip_prefix('_') == Some(cont), "{:?}", s.tags);
            }
            prev = Some(tag);
        }
    }
}
