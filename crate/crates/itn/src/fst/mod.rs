//! Weighted finite-state transducers over the tropical semiring.
//!
//! Weights are non-negative costs on a negative-log-probability scale,
//! combined along a path by addition; the best path is the cheapest one.
//! All machines are immutable after construction and safe to share.

mod compose;
mod io;
mod paths;
mod symbol;

pub use compose::compose;
pub use paths::{shortest_paths, transduce_span, transduce_text, Path, TextPath};
pub use symbol::{SymbolTable, ALT_SYM, EPS_SYM, SEP_SYM, UNK_SYM};

use crate::{Error, Result};
use std::collections::BTreeMap;

pub type Label = u32;
pub type StateId = usize;

/// Label 0 is reserved for epsilon in every symbol table.
pub const EPSILON: Label = 0;

/// Shared, frozen symbol table handle.
pub type SharedTable = std::sync::Arc<SymbolTable>;

/// A single weighted transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub ilabel: Label,
    pub olabel: Label,
    pub weight: f32,
    pub nextstate: StateId,
}

impl Arc {
    pub fn new(ilabel: Label, olabel: Label, weight: f32, nextstate: StateId) -> Self {
        Arc {
            ilabel,
            olabel,
            weight,
            nextstate,
        }
    }
}

/// Weighted finite-state transducer. State 0 is always the start state.
#[derive(Debug, Clone)]
pub struct Fst {
    states: Vec<Vec<Arc>>,
    start: StateId,
    finals: BTreeMap<StateId, f32>,
    isyms: SharedTable,
    osyms: SharedTable,
}

impl Fst {
    pub fn new(isyms: SharedTable, osyms: SharedTable) -> Self {
        Fst {
            states: vec![Vec::new()],
            start: 0,
            finals: BTreeMap::new(),
            isyms,
            osyms,
        }
    }

    pub fn add_state(&mut self) -> StateId {
        self.states.push(Vec::new());
        self.states.len() - 1
    }

    pub fn add_arc(&mut self, state: StateId, arc: Arc) {
        debug_assert!(arc.nextstate < self.states.len() || arc.nextstate == self.states.len());
        self.states[state].push(arc);
    }

    pub fn set_final(&mut self, state: StateId, weight: f32) {
        self.finals.insert(state, weight);
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.states.iter().map(|a| a.len()).sum()
    }

    pub fn arcs(&self, state: StateId) -> &[Arc] {
        &self.states[state]
    }

    pub fn final_weight(&self, state: StateId) -> Option<f32> {
        self.finals.get(&state).copied()
    }

    pub fn finals(&self) -> impl Iterator<Item = (StateId, f32)> + '_ {
        self.finals.iter().map(|(&s, &w)| (s, w))
    }

    pub fn isyms(&self) -> &SharedTable {
        &self.isyms
    }

    pub fn osyms(&self) -> &SharedTable {
        &self.osyms
    }

    /// True if some final state is reachable from the start.
    pub fn has_accepting_path(&self) -> bool {
        let mut seen = vec![false; self.states.len()];
        let mut stack = vec![self.start];
        seen[self.start] = true;
        while let Some(s) = stack.pop() {
            if self.finals.contains_key(&s) {
                return true;
            }
            for a in &self.states[s] {
                if !seen[a.nextstate] {
                    seen[a.nextstate] = true;
                    stack.push(a.nextstate);
                }
            }
        }
        false
    }

    /// True if a cycle is reachable from the start state.
    pub fn is_cyclic(&self) -> bool {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            White,
            Grey,
            Black,
        }
        let mut mark = vec![Mark::White; self.states.len()];
        // Iterative DFS with explicit grey/black marking.
        let mut stack: Vec<(StateId, usize)> = vec![(self.start, 0)];
        mark[self.start] = Mark::Grey;
        while let Some(&mut (s, ref mut idx)) = stack.last_mut() {
            if *idx < self.states[s].len() {
                let next = self.states[s][*idx].nextstate;
                *idx += 1;
                match mark[next] {
                    Mark::Grey => return true,
                    Mark::White => {
                        mark[next] = Mark::Grey;
                        stack.push((next, 0));
                    }
                    Mark::Black => {}
                }
            } else {
                mark[s] = Mark::Black;
                stack.pop();
            }
        }
        false
    }
}

fn check_tables(a: &SharedTable, b: &SharedTable) -> Result<()> {
    if std::sync::Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::SymbolTableMismatch)
    }
}

/// Builds a linear chain acceptor for `tokens` with weight 0.
/// Unknown tokens map to the reserved `<unk>` label, never epsilon.
pub fn compile_linear(tokens: &[&str], syms: &SharedTable) -> Fst {
    let mut f = Fst::new(syms.clone(), syms.clone());
    let mut cur = f.start();
    for tok in tokens {
        let label = syms
            .label(tok)
            .or_else(|| syms.label(UNK_SYM))
            .expect("symbol table must register <unk>");
        let next = f.add_state();
        f.add_arc(cur, Arc::new(label, label, 0.0, next));
        cur = next;
    }
    f.set_final(cur, 0.0);
    f
}

/// Union of weighted relations.
pub fn union(fs: &[&Fst]) -> Result<Fst> {
    let first = fs.first().ok_or_else(|| Error::Config("union of zero machines".into()))?;
    for f in &fs[1..] {
        check_tables(first.isyms(), f.isyms())?;
        check_tables(first.osyms(), f.osyms())?;
    }
    let mut out = Fst::new(first.isyms.clone(), first.osyms.clone());
    for f in fs {
        let off = out.num_states();
        for _ in 0..f.num_states() {
            out.add_state();
        }
        out.add_arc(0, Arc::new(EPSILON, EPSILON, 0.0, off + f.start()));
        copy_states(&mut out, f, off);
        for (s, w) in f.finals() {
            out.set_final(off + s, w);
        }
    }
    Ok(out)
}

/// Concatenation of weighted relations.
pub fn concat(a: &Fst, b: &Fst) -> Result<Fst> {
    check_tables(a.isyms(), b.isyms())?;
    check_tables(a.osyms(), b.osyms())?;
    let mut out = Fst::new(a.isyms.clone(), a.osyms.clone());
    // `out` state 0 is a fresh start; embed a then b.
    let off_a = out.num_states();
    for _ in 0..a.num_states() {
        out.add_state();
    }
    let off_b = out.num_states();
    for _ in 0..b.num_states() {
        out.add_state();
    }
    out.add_arc(0, Arc::new(EPSILON, EPSILON, 0.0, off_a + a.start()));
    copy_states(&mut out, a, off_a);
    copy_states(&mut out, b, off_b);
    for (s, w) in a.finals() {
        out.add_arc(off_a + s, Arc::new(EPSILON, EPSILON, w, off_b + b.start()));
    }
    for (s, w) in b.finals() {
        out.set_final(off_b + s, w);
    }
    Ok(out)
}

/// Kleene star: accepts the empty string at weight 0 plus any number
/// of repetitions of `f`.
pub fn closure(f: &Fst) -> Fst {
    let mut out = Fst::new(f.isyms.clone(), f.osyms.clone());
    out.set_final(0, 0.0);
    let off = out.num_states();
    for _ in 0..f.num_states() {
        out.add_state();
    }
    out.add_arc(0, Arc::new(EPSILON, EPSILON, 0.0, off + f.start()));
    copy_states(&mut out, f, off);
    for (s, w) in f.finals() {
        out.add_arc(off + s, Arc::new(EPSILON, EPSILON, w, 0));
    }
    out
}

fn copy_states(out: &mut Fst, f: &Fst, off: usize) {
    for s in 0..f.num_states() {
        for a in f.arcs(s) {
            out.add_arc(off + s, Arc::new(a.ilabel, a.olabel, a.weight, off + a.nextstate));
        }
    }
}
