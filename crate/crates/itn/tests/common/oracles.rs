//! Brute-force WFST oracles shared by the FST tests and the acceptance
//! suite: random acyclic machines, exhaustive path enumeration, and the
//! tropical relation view.

use itn::fst::{Arc, Fst, Label, SharedTable, SymbolTable, EPSILON};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

pub const TOL: f32 = 1e-6;

pub fn table() -> SharedTable {
    let mut t = SymbolTable::core();
    for s in ["a", "b", "c", "d"] {
        t.add(s);
    }
    std::sync::Arc::new(t)
}

/// Random acyclic machine: arcs only go from lower to higher state ids.
pub fn random_fst(rng: &mut ChaCha8Rng, t: &SharedTable) -> Fst {
    let n = rng.gen_range(2..=8usize);
    let mut f = Fst::new(t.clone(), t.clone());
    for _ in 1..n {
        f.add_state();
    }
    let letters: Vec<Label> = ["a", "b", "c", "d"].iter().map(|s| t.label(s).unwrap()).collect();
    let pick = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.25) {
            EPSILON
        } else {
            letters[rng.gen_range(0..letters.len())]
        }
    };
    let arcs = rng.gen_range(n..=2 * n);
    for _ in 0..arcs {
        let s = rng.gen_range(0..n - 1);
        let d = rng.gen_range(s + 1..n);
        let il = pick(rng);
        let ol = pick(rng);
        let w = rng.gen_range(0.0..2.0f32);
        f.add_arc(s, Arc::new(il, ol, w, d));
    }
    for s in 0..n {
        if rng.gen_bool(0.3) || s == n - 1 {
            f.set_final(s, rng.gen_range(0.0..1.0f32));
        }
    }
    f
}

/// Every accepting path as (input string, output string, weight), epsilons
/// removed, via exhaustive DFS.
pub fn enumerate(f: &Fst) -> Vec<(Vec<Label>, Vec<Label>, f32)> {
    let mut out = Vec::new();
    let mut stack = vec![(f.start(), Vec::new(), Vec::new(), 0.0f32)];
    while let Some((s, is, os, w)) = stack.pop() {
        if let Some(wf) = f.final_weight(s) {
            out.push((is.clone(), os.clone(), w + wf));
        }
        for a in f.arcs(s) {
            let mut is2 = is.clone();
            let mut os2 = os.clone();
            if a.ilabel != EPSILON {
                is2.push(a.ilabel);
            }
            if a.olabel != EPSILON {
                os2.push(a.olabel);
            }
            stack.push((a.nextstate, is2, os2, w + a.weight));
        }
    }
    out
}

/// Tropical relation: (input, output) → min weight.
pub fn relation(paths: &[(Vec<Label>, Vec<Label>, f32)]) -> HashMap<(Vec<Label>, Vec<Label>), f32> {
    let mut rel = HashMap::new();
    for (i, o, w) in paths {
        let e = rel.entry((i.clone(), o.clone())).or_insert(f32::INFINITY);
        if *w < *e {
            *e = *w;
        }
    }
    rel
}
