use super::{compile_linear, compose, Fst, Label, StateId, ALT_SYM, EPSILON, SEP_SYM};
use crate::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// An accepting path: output labels (epsilons removed) and total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub olabels: Vec<Label>,
    pub weight: f32,
}

#[derive(Debug)]
struct Entry {
    /// Cost so far plus exact remaining cost to the cheapest completion.
    f: f32,
    olabels: Vec<Label>,
    g: f32,
    state: StateId,
    complete: bool,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Weights are finite and non-negative; ties break on output labels
        // so results are deterministic.
        self.f
            .partial_cmp(&other.f)
            .unwrap()
            .then_with(|| self.olabels.cmp(&other.olabels))
    }
}

const POP_BUDGET: usize = 5_000_000;

/// Up to `n` accepting paths in nondecreasing weight order, ties broken by
/// lexicographic output-label order. Empty when nothing accepts.
pub fn shortest_paths(f: &Fst, n: usize) -> Result<Vec<Path>> {
    assert!(n >= 1, "n must be positive");
    if f.is_cyclic() {
        return Err(Error::CyclicInput);
    }
    let heuristic = match distance_to_final(f) {
        Some(h) => h,
        None => return Ok(Vec::new()),
    };
    if heuristic[f.start()].is_infinite() {
        return Ok(Vec::new());
    }

    let mut heap: BinaryHeap<std::cmp::Reverse<Entry>> = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<std::cmp::Reverse<Entry>>, e: Entry| {
        heap.push(std::cmp::Reverse(e));
    };
    push(
        &mut heap,
        Entry {
            f: heuristic[f.start()],
            olabels: Vec::new(),
            g: 0.0,
            state: f.start(),
            complete: false,
        },
    );

    let mut out = Vec::new();
    let mut pops = 0usize;
    while let Some(std::cmp::Reverse(e)) = heap.pop() {
        pops += 1;
        if pops > POP_BUDGET {
            return Err(Error::SearchBudget);
        }
        if e.complete {
            out.push(Path {
                olabels: e.olabels,
                weight: e.g,
            });
            if out.len() >= n {
                break;
            }
            continue;
        }
        if let Some(wf) = f.final_weight(e.state) {
            push(
                &mut heap,
                Entry {
                    f: e.g + wf,
                    olabels: e.olabels.clone(),
                    g: e.g + wf,
                    state: e.state,
                    complete: true,
                },
            );
        }
        for a in f.arcs(e.state) {
            let h = heuristic[a.nextstate];
            if h.is_infinite() {
                continue;
            }
            let mut olabels = e.olabels.clone();
            if a.olabel != EPSILON {
                olabels.push(a.olabel);
            }
            let g = e.g + a.weight;
            push(
                &mut heap,
                Entry {
                    f: g + h,
                    olabels,
                    g,
                    state: a.nextstate,
                    complete: false,
                },
            );
        }
    }
    Ok(out)
}

/// Exact minimum cost from each state to acceptance, or None when no state
/// accepts. Requires an acyclic machine.
fn distance_to_final(f: &Fst) -> Option<Vec<f32>> {
    let n = f.num_states();
    let order = topological_order(f)?;
    let mut dist = vec![f32::INFINITY; n];
    for &s in order.iter().rev() {
        let mut best = f.final_weight(s).unwrap_or(f32::INFINITY);
        for a in f.arcs(s) {
            let via = a.weight + dist[a.nextstate];
            if via < best {
                best = via;
            }
        }
        dist[s] = best;
    }
    if dist.iter().all(|d| d.is_infinite()) {
        None
    } else {
        Some(dist)
    }
}

fn topological_order(f: &Fst) -> Option<Vec<StateId>> {
    let n = f.num_states();
    let mut indeg = vec![0usize; n];
    for s in 0..n {
        for a in f.arcs(s) {
            indeg[a.nextstate] += 1;
        }
    }
    let mut stack: Vec<StateId> = (0..n).filter(|&s| indeg[s] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(s) = stack.pop() {
        order.push(s);
        for a in f.arcs(s) {
            indeg[a.nextstate] -= 1;
            if indeg[a.nextstate] == 0 {
                stack.push(a.nextstate);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Applies an ITN transducer to a tag-wrapped span, returning the display
/// tokens of the single best path, or None when the grammar rejects the span.
///
/// Output symbols are concatenated into one display token; the reserved
/// `<sp>` symbol introduces a token boundary.
pub fn transduce_span(span: &[&str], f: &Fst) -> Option<Vec<String>> {
    let lin = compile_linear(span, f.isyms());
    let composed = compose(&lin, f).ok()?;
    let paths = shortest_paths(&composed, 1).ok()?;
    let path = paths.first()?;
    Some(glue_olabels(&path.olabels, f))
}

/// Joins output labels into display tokens under the `<sp>` convention.
pub fn glue_olabels(olabels: &[Label], f: &Fst) -> Vec<String> {
    let osyms = f.osyms();
    let sep = osyms.label(SEP_SYM);
    let alt = osyms.label(ALT_SYM);
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for &l in olabels {
        if Some(l) == alt {
            continue;
        }
        if Some(l) == sep {
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
            continue;
        }
        if let Some(s) = osyms.symbol(l) {
            cur.push_str(s);
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

/// An accepting analysis of raw text by a TN transducer.
#[derive(Debug, Clone)]
pub struct TextPath {
    pub olabels: Vec<Label>,
    pub weight: f32,
    /// True when the path crossed an `<alt>`-marked branch.
    pub alt: bool,
}

const TEXT_PATH_CAP: usize = 10_000;

/// Enumerates every accepting path of `f` whose input-symbol strings,
/// concatenated, spell exactly `text`. The `<sp>` input symbol matches a
/// single space; epsilon consumes nothing. Used to apply tag-outputting TN
/// machines to written-form text.
pub fn transduce_text(f: &Fst, text: &str) -> Vec<TextPath> {
    let isyms = f.isyms();
    let alt_out = f.osyms().label(ALT_SYM);
    let mut results = Vec::new();
    // Explicit DFS; grammar machines are acyclic so this terminates.
    let mut stack: Vec<(StateId, usize, Vec<Label>, f32, bool)> =
        vec![(f.start(), 0, Vec::new(), 0.0, false)];
    while let Some((state, pos, olabels, weight, alt)) = stack.pop() {
        if results.len() >= TEXT_PATH_CAP {
            break;
        }
        if pos == text.len() {
            if let Some(wf) = f.final_weight(state) {
                results.push(TextPath {
                    olabels: olabels.clone(),
                    weight: weight + wf,
                    alt,
                });
            }
        }
        for a in f.arcs(state) {
            let consumed = if a.ilabel == EPSILON {
                Some(0)
            } else {
                let sym = isyms.symbol(a.ilabel).unwrap_or("");
                let piece = if sym == SEP_SYM { " " } else { sym };
                text[pos..].starts_with(piece).then_some(piece.len())
            };
            if let Some(len) = consumed {
                let mut ol = olabels.clone();
                let mut is_alt = alt;
                if a.olabel != EPSILON {
                    if Some(a.olabel) == alt_out {
                        is_alt = true;
                    }
                    ol.push(a.olabel);
                }
                stack.push((a.nextstate, pos + len, ol, weight + a.weight, is_alt));
            }
        }
    }
    results.sort_by(|a, b| {
        a.weight
            .partial_cmp(&b.weight)
            .unwrap()
            .then_with(|| a.olabels.cmp(&b.olabels))
    });
    results
}
