//! The rewrite-rule language and its compiler.
//!
//! A rule file defines one ITN category as a set of named rules:
//!
//! ```text
//! # time.rules
//! root  = hour mins ;
//! hour  = "one":"1" | "two":"2" ;
//! mins  = "thirty":":30" | "oh":":0" unit ;
//! ```
//!
//! Each quoted pair maps a lexical (spoken) side to a written side; either
//! side may be the empty string (insertion / deletion). Operators: `|`
//! alternation with optional `@cost` and `~alt` branch annotations,
//! juxtaposition for sequence, `?`, and bounded repetition `*{max}` /
//! `+{max}`. Rule references must be acyclic. Every category compiles into a
//! tag-consuming ITN transducer and a mirror tag-outputting TN transducer.

mod compile;
mod pack;
mod parser;

pub use compile::{compile_itn, compile_tn, compile_untagged, register_symbols, Direction};
pub use pack::{load_pack, load_pack_from_sources, Category, GrammarPack};
pub use parser::parse_rules;

use indexmap::IndexMap;
use std::fmt;

/// One alternation branch with its cost and alternate marking.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub expr: RuleExpr,
    pub cost: f32,
    /// Marked `~alt`: TN paths through this branch are interchangeable
    /// alternates chosen pseudorandomly during data generation.
    pub alt: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Quantifier {
    Optional,
    /// Zero or more, up to the bound.
    Star(u32),
    /// One or more, up to the bound.
    Plus(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuleExpr {
    /// `"lex":"wri"`; either side may be empty (epsilon).
    Mapping { lex: String, wri: String },
    Sequence(Vec<RuleExpr>),
    Alternation(Vec<Branch>),
    Quantified {
        child: Box<RuleExpr>,
        quant: Quantifier,
    },
    RuleRef(String),
}

/// A parsed, validated rule set for one category.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    pub category: String,
    pub root: String,
    pub rules: IndexMap<String, RuleExpr>,
}

impl RuleSet {
    pub fn root_expr(&self) -> &RuleExpr {
        &self.rules[&self.root]
    }
}

fn fmt_string(s: &str, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "\"")?;
    for c in s.chars() {
        if c == '"' || c == '\\' {
            write!(f, "\\")?;
        }
        write!(f, "{c}")?;
    }
    write!(f, "\"")
}

impl fmt::Display for RuleExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleExpr::Mapping { lex, wri } => {
                fmt_string(lex, f)?;
                write!(f, ":")?;
                fmt_string(wri, f)
            }
            RuleExpr::Sequence(children) => {
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    if matches!(c, RuleExpr::Alternation(_)) {
                        write!(f, "({c})")?;
                    } else {
                        write!(f, "{c}")?;
                    }
                }
                Ok(())
            }
            RuleExpr::Alternation(branches) => {
                for (i, b) in branches.iter().enumerate() {
                    if i > 0 {
                        write!(f, " | ")?;
                    }
                    if matches!(b.expr, RuleExpr::Alternation(_)) {
                        write!(f, "({})", b.expr)?;
                    } else {
                        write!(f, "{}", b.expr)?;
                    }
                    if b.cost != 0.0 {
                        write!(f, " @{}", b.cost)?;
                    }
                    if b.alt {
                        write!(f, " ~alt")?;
                    }
                }
                Ok(())
            }
            RuleExpr::Quantified { child, quant } => {
                if matches!(**child, RuleExpr::Mapping { .. } | RuleExpr::RuleRef(_)) {
                    write!(f, "{child}")?;
                } else {
                    write!(f, "({child})")?;
                }
                match quant {
                    Quantifier::Optional => write!(f, "?"),
                    Quantifier::Star(max) => write!(f, "*{{{max}}}"),
                    Quantifier::Plus(max) => write!(f, "+{{{max}}}"),
                }
            }
            RuleExpr::RuleRef(name) => write!(f, "{name}"),
        }
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, expr) in &self.rules {
            writeln!(f, "{name} = {expr} ;")?;
        }
        Ok(())
    }
}
