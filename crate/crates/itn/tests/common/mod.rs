#![allow(dead_code)] // each test binary uses a different subset

//! Shared helpers for integration tests: starter-pack loading, round-trip
//! checks, and independent verbalization oracles (hand-written English
//! number/time/money readers that do not go through the rule compiler).

pub mod oracles;

use itn::fst::{transduce_span, transduce_text};
use itn::rules::{load_pack, GrammarPack};
use std::path::Path;

pub fn grammar_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/grammars"))
}

pub fn load_starter_pack() -> GrammarPack {
    load_pack(grammar_dir()).expect("starter grammars load")
}

/// All TN readings of `written` for one category, as lexical token vectors
/// (tags and markers stripped).
pub fn tn_readings(pack: &GrammarPack, category: &str, written: &str) -> Vec<Vec<String>> {
    let cat = pack.get(category).expect("category exists");
    transduce_text(&cat.tn, written)
        .into_iter()
        .map(|p| {
            p.olabels
                .iter()
                .map(|&l| cat.tn.osyms().symbol(l).unwrap().to_string())
                .filter(|s| !(s.starts_with('<') && s.ends_with('>')))
                .collect()
        })
        .collect()
}

/// Applies the category ITN FST to a lexical token sequence; returns glued
/// display tokens.
pub fn itn_convert(pack: &GrammarPack, category: &str, lexical: &[String]) -> Option<Vec<String>> {
    let cat = pack.get(category).expect("category exists");
    let mut span: Vec<&str> = Vec::with_capacity(lexical.len() + 2);
    let open = format!("<{category}>");
    let close = format!("</{category}>");
    span.push(&open);
    span.extend(lexical.iter().map(|s| s.as_str()));
    span.push(&close);
    transduce_span(&span, &cat.itn)
}

/// Asserts every TN reading of `written` converts back to it exactly.
/// Returns the readings so callers can additionally check oracle coverage.
pub fn assert_round_trip(pack: &GrammarPack, category: &str, written: &str) -> Vec<Vec<String>> {
    let readings = tn_readings(pack, category, written);
    assert!(
        !readings.is_empty(),
        "{category}: no TN reading for `{written}`"
    );
    let expect: Vec<String> = written.split(' ').map(|s| s.to_string()).collect();
    for lex in &readings {
        let back = itn_convert(pack, category, lex);
        assert_eq!(
            back.as_deref(),
            Some(&expect[..]),
            "{category}: `{written}` -> {lex:?} did not round-trip"
        );
    }
    readings
}

const UNITS: [&str; 10] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];
const TEENS: [&str; 10] = [
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
];
const TENS: [&str; 10] = [
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];

fn sub100(n: u32, out: &mut Vec<String>) {
    debug_assert!(n >= 1 && n < 100);
    if n < 10 {
        out.push(UNITS[n as usize].into());
    } else if n < 20 {
        out.push(TEENS[(n - 10) as usize].into());
    } else {
        out.push(TENS[(n / 10) as usize].into());
        if n % 10 != 0 {
            out.push(UNITS[(n % 10) as usize].into());
        }
    }
}

fn sub1000(n: u32, out: &mut Vec<String>) {
    debug_assert!(n >= 1 && n < 1000);
    if n < 100 {
        sub100(n, out);
        return;
    }
    out.push(UNITS[(n / 100) as usize].into());
    out.push("hundred".into());
    if n % 100 != 0 {
        out.push("and".into());
        sub100(n % 100, out);
    }
}

/// Standard English reading of 0 - 999,999 ("four hundred and fifty").
pub fn verbalize_num(n: u32) -> Vec<String> {
    assert!(n < 1_000_000);
    if n == 0 {
        return vec!["zero".into()];
    }
    let mut out = Vec::new();
    if n >= 1000 {
        sub1000(n / 1000, &mut out);
        out.push("thousand".into());
        let rest = n % 1000;
        if rest >= 100 {
            sub1000(rest, &mut out);
        } else if rest > 0 {
            out.push("and".into());
            sub100(rest, &mut out);
        }
    } else {
        sub1000(n, &mut out);
    }
    out
}

/// Exact clock reading of h:mm ("four thirty", "eleven oh five").
pub fn verbalize_time(h: u32, m: u32) -> Vec<String> {
    assert!((1..=12).contains(&h) && m < 60);
    let hour = if h < 10 {
        UNITS[h as usize].to_string()
    } else {
        TEENS[(h - 10) as usize].to_string()
    };
    let mut out = vec![hour];
    if m == 0 {
        out.push("o'clock".into());
    } else if m < 10 {
        out.push("oh".into());
        out.push(UNITS[m as usize].into());
    } else {
        sub100(m, &mut out);
    }
    out
}

/// Standard money reading of a dollars/cents amount ("twenty five dollars
/// and fifty cents").
pub fn verbalize_money(dollars: u32, cents: u32) -> Vec<String> {
    assert!(dollars < 10_000 && cents < 100);
    let mut out = Vec::new();
    if dollars == 1 {
        out.push("one".into());
        out.push("dollar".into());
    } else {
        if dollars == 0 {
            out.push("zero".into());
        } else if dollars >= 1000 {
            out.push(UNITS[(dollars / 1000) as usize].into());
            out.push("thousand".into());
            let rest = dollars % 1000;
            if rest >= 100 {
                sub1000(rest, &mut out);
            } else if rest > 0 {
                out.push("and".into());
                sub100(rest, &mut out);
            }
        } else {
            sub1000(dollars, &mut out);
        }
        out.push("dollars".into());
    }
    if cents == 1 {
        out.extend(["and".into(), "one".into(), "cent".into()]);
    } else if cents > 0 {
        out.push("and".into());
        sub100(cents, &mut out);
        out.push("cents".into());
    }
    out
}

pub fn written_money(dollars: u32, cents: u32) -> String {
    if dollars >= 1000 {
        format!("${},{:03}.{:02}", dollars / 1000, dollars % 1000, cents)
    } else {
        format!("${dollars}.{cents:02}")
    }
}
