use super::{Quantifier, RuleExpr, RuleSet};
use crate::fst::{Arc, Fst, Label, SharedTable, StateId, SymbolTable, ALT_SYM, EPSILON, SEP_SYM};

/// Which transducer to compile from a rule set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Direction {
    /// Input `<cat>` lexical `</cat>`, output written pieces.
    Itn,
    /// Input written pieces, output `<cat>` lexical `</cat>`; alternate
    /// branches additionally emit the `<alt>` marker.
    Tn,
    /// Input lexical without tags, output `<cat>` written `</cat>`;
    /// used by the full-utterance baseline.
    Untagged,
}

pub fn open_tag(category: &str) -> String {
    format!("<{category}>")
}

pub fn close_tag(category: &str) -> String {
    format!("</{category}>")
}

/// Registers every symbol a rule set can touch, plus the category tags.
pub fn register_symbols(rs: &RuleSet, category: &str, syms: &mut SymbolTable) {
    syms.add(&open_tag(category));
    syms.add(&close_tag(category));
    for expr in rs.rules.values() {
        walk(expr, &mut |lex, wri| {
            for tok in lex.split_whitespace() {
                syms.add(tok);
            }
            for seg in wri.split(' ') {
                if !seg.is_empty() {
                    syms.add(seg);
                }
            }
        });
    }
}

fn walk(expr: &RuleExpr, visit: &mut impl FnMut(&str, &str)) {
    match expr {
        RuleExpr::Mapping { lex, wri } => visit(lex, wri),
        RuleExpr::Sequence(children) => children.iter().for_each(|c| walk(c, visit)),
        RuleExpr::Alternation(branches) => branches.iter().for_each(|b| walk(&b.expr, visit)),
        RuleExpr::Quantified { child, .. } => walk(child, visit),
        RuleExpr::RuleRef(_) => {}
    }
}

pub fn compile_itn(rs: &RuleSet, syms: &SharedTable) -> Fst {
    compile(rs, syms, Direction::Itn)
}

pub fn compile_tn(rs: &RuleSet, syms: &SharedTable) -> Fst {
    compile(rs, syms, Direction::Tn)
}

/// Baseline-direction compilation; see [`Direction::Untagged`].
pub fn compile_untagged(rs: &RuleSet, syms: &SharedTable) -> Fst {
    compile(rs, syms, Direction::Untagged)
}

struct Builder<'a> {
    fst: Fst,
    rs: &'a RuleSet,
    syms: &'a SharedTable,
    dir: Direction,
}

fn compile(rs: &RuleSet, syms: &SharedTable, dir: Direction) -> Fst {
    let label = |s: &str| syms.label(s).expect("symbols registered before compile");
    let open = label(&open_tag(&rs.category));
    let close = label(&close_tag(&rs.category));
    let mut b = Builder {
        fst: Fst::new(syms.clone(), syms.clone()),
        rs,
        syms,
        dir,
    };
    let entry = b.fst.add_state();
    match dir {
        Direction::Itn => b.fst.add_arc(0, Arc::new(open, EPSILON, 0.0, entry)),
        Direction::Tn | Direction::Untagged => {
            b.fst.add_arc(0, Arc::new(EPSILON, open, 0.0, entry))
        }
    }
    let exit = b.build(rs.root_expr(), entry);
    let end = b.fst.add_state();
    match dir {
        Direction::Itn => b.fst.add_arc(exit, Arc::new(close, EPSILON, 0.0, end)),
        Direction::Tn | Direction::Untagged => {
            b.fst.add_arc(exit, Arc::new(EPSILON, close, 0.0, end))
        }
    }
    b.fst.set_final(end, 0.0);
    b.fst
}

impl Builder<'_> {
    fn build(&mut self, expr: &RuleExpr, from: StateId) -> StateId {
        match expr {
            RuleExpr::Mapping { lex, wri } => self.build_mapping(lex, wri, from),
            RuleExpr::Sequence(children) => children
                .iter()
                .fold(from, |cur, child| self.build(child, cur)),
            RuleExpr::Alternation(branches) => {
                let exit = self.fst.add_state();
                for br in branches {
                    let marker = if br.alt && self.dir == Direction::Tn {
                        self.syms.label(ALT_SYM).unwrap()
                    } else {
                        EPSILON
                    };
                    let entry = self.fst.add_state();
                    self.fst
                        .add_arc(from, Arc::new(EPSILON, marker, br.cost, entry));
                    let end = self.build(&br.expr, entry);
                    self.fst.add_arc(end, Arc::new(EPSILON, EPSILON, 0.0, exit));
                }
                exit
            }
            RuleExpr::Quantified { child, quant } => match quant {
                Quantifier::Optional => self.build_optional(child, from),
                Quantifier::Star(max) => {
                    let mut cur = from;
                    for _ in 0..*max {
                        cur = self.build_optional(child, cur);
                    }
                    cur
                }
                Quantifier::Plus(max) => {
                    let mut cur = self.build(child, from);
                    for _ in 1..*max {
                        cur = self.build_optional(child, cur);
                    }
                    cur
                }
            },
            RuleExpr::RuleRef(name) => {
                let sub = self.rs.rules[name].clone();
                self.build(&sub, from)
            }
        }
    }

    fn build_optional(&mut self, child: &RuleExpr, from: StateId) -> StateId {
        let end = self.build(child, from);
        self.fst.add_arc(from, Arc::new(EPSILON, EPSILON, 0.0, end));
        end
    }

    fn build_mapping(&mut self, lex: &str, wri: &str, from: StateId) -> StateId {
        let lex_labels: Vec<Label> = lex
            .split_whitespace()
            .map(|t| self.syms.label(t).unwrap())
            .collect();
        let wri_labels = written_labels(wri, self.syms);
        let (inputs, outputs) = match self.dir {
            Direction::Itn | Direction::Untagged => (&lex_labels, &wri_labels),
            Direction::Tn => (&wri_labels, &lex_labels),
        };
        let n = inputs.len().max(outputs.len());
        let mut cur = from;
        if n == 0 {
            return cur;
        }
        for i in 0..n {
            let next = self.fst.add_state();
            let il = inputs.get(i).copied().unwrap_or(EPSILON);
            let ol = outputs.get(i).copied().unwrap_or(EPSILON);
            self.fst.add_arc(cur, Arc::new(il, ol, 0.0, next));
            cur = next;
        }
        cur
    }
}

/// Written-side label sequence: pieces concatenate into one display token;
/// a space inside the literal becomes the `<sp>` boundary symbol.
fn written_labels(wri: &str, syms: &SymbolTable) -> Vec<Label> {
    let mut labels = Vec::new();
    if wri.is_empty() {
        return labels;
    }
    let sep = syms.label(SEP_SYM).unwrap();
    for (i, seg) in wri.split(' ').enumerate() {
        if i > 0 {
            labels.push(sep);
        }
        if !seg.is_empty() {
            labels.push(syms.label(seg).unwrap());
        }
    }
    labels
}

/// Largest number of display tokens any path of the rule set can produce;
/// bounds the span window when matching written text.
pub fn max_written_tokens(rs: &RuleSet) -> usize {
    fn max_seps(expr: &RuleExpr, rs: &RuleSet) -> usize {
        match expr {
            RuleExpr::Mapping { wri, .. } => wri.matches(' ').count(),
            RuleExpr::Sequence(children) => children.iter().map(|c| max_seps(c, rs)).sum(),
            RuleExpr::Alternation(branches) => branches
                .iter()
                .map(|b| max_seps(&b.expr, rs))
                .max()
                .unwrap_or(0),
            RuleExpr::Quantified { child, quant } => {
                let per = max_seps(child, rs);
                match quant {
                    Quantifier::Optional => per,
                    Quantifier::Star(max) | Quantifier::Plus(max) => per * *max as usize,
                }
            }
            RuleExpr::RuleRef(name) => max_seps(&rs.rules[name], rs),
        }
    }
    max_seps(rs.root_expr(), rs) + 1
}
