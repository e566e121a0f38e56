use super::{Branch, Quantifier, RuleExpr, RuleSet};
use crate::{Error, Result};
use indexmap::IndexMap;
use std::collections::HashSet;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Colon,
    Eq,
    Semi,
    Pipe,
    LParen,
    RParen,
    Question,
    Star,
    Plus,
    LBrace,
    RBrace,
    At,
    TildeAlt,
    Number(f32),
    Int(u32),
}

struct Lexed {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: String::new(),
        line,
        col,
        msg: msg.into(),
    }
}

fn lex(source: &str) -> Result<Vec<Lexed>> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = source.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump(&mut chars);
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    bump(&mut chars);
                    if c == '\n' {
                        break;
                    }
                }
            }
            '"' => {
                bump(&mut chars);
                let mut s = String::new();
                loop {
                    match chars.peek() {
                        None => return Err(err(tl, tc, "unterminated string literal")),
                        Some('"') => {
                            bump(&mut chars);
                            break;
                        }
                        Some('\\') => {
                            bump(&mut chars);
                            match chars.peek() {
                                Some(&e @ ('"' | '\\')) => {
                                    bump(&mut chars);
                                    s.push(e);
                                }
                                _ => return Err(err(tl, tc, "bad escape in string literal")),
                            }
                        }
                        Some('\n') => return Err(err(tl, tc, "unterminated string literal")),
                        Some(_) => {
                            let c = bump(&mut chars);
                            s.push(c);
                        }
                    }
                }
                toks.push(Lexed {
                    tok: Tok::Str(s),
                    line: tl,
                    col: tc,
                });
            }
            ':' | '=' | ';' | '|' | '(' | ')' | '?' | '*' | '+' | '{' | '}' | '@' => {
                bump(&mut chars);
                let tok = match c {
                    ':' => Tok::Colon,
                    '=' => Tok::Eq,
                    ';' => Tok::Semi,
                    '|' => Tok::Pipe,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '?' => Tok::Question,
                    '*' => Tok::Star,
                    '+' => Tok::Plus,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '@' => Tok::At,
                    _ => unreachable!(),
                };
                toks.push(Lexed { tok, line: tl, col: tc });
            }
            '~' => {
                bump(&mut chars);
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        bump(&mut chars);
                        word.push(c);
                    } else {
                        break;
                    }
                }
                if word != "alt" {
                    return Err(err(tl, tc, format!("unknown annotation `~{word}`")));
                }
                toks.push(Lexed {
                    tok: Tok::TildeAlt,
                    line: tl,
                    col: tc,
                });
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut num = String::new();
                let mut is_float = false;
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        bump(&mut chars);
                        num.push(c);
                    } else if c == '.' && !is_float {
                        is_float = true;
                        bump(&mut chars);
                        num.push(c);
                    } else {
                        break;
                    }
                }
                let tok = if is_float {
                    Tok::Number(num.parse().map_err(|_| err(tl, tc, "bad number"))?)
                } else {
                    Tok::Int(num.parse().map_err(|_| err(tl, tc, "bad integer"))?)
                };
                toks.push(Lexed { tok, line: tl, col: tc });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut name = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        bump(&mut chars);
                        name.push(c);
                    } else {
                        break;
                    }
                }
                toks.push(Lexed {
                    tok: Tok::Ident(name),
                    line: tl,
                    col: tc,
                });
            }
            other => return Err(err(tl, tc, format!("unexpected character `{other}`"))),
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|l| &l.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|l| (l.line, l.col))
            .unwrap_or((1, 1))
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|l| l.tok.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let (l, c) = self.here();
        match self.next() {
            Some(t) if t == want => Ok(()),
            _ => Err(err(l, c, format!("expected {what}"))),
        }
    }

    fn parse_file(&mut self) -> Result<IndexMap<String, RuleExpr>> {
        let mut rules = IndexMap::new();
        while self.peek().is_some() {
            let (l, c) = self.here();
            let name = match self.next() {
                Some(Tok::Ident(n)) => n,
                _ => return Err(err(l, c, "expected rule name")),
            };
            self.expect(Tok::Eq, "`=`")?;
            let expr = self.parse_expr()?;
            self.expect(Tok::Semi, "`;`")?;
            if rules.insert(name.clone(), expr).is_some() {
                return Err(err(l, c, format!("duplicate rule `{name}`")));
            }
        }
        Ok(rules)
    }

    fn parse_expr(&mut self) -> Result<RuleExpr> {
        let mut branches = vec![self.parse_branch()?];
        while self.peek() == Some(&Tok::Pipe) {
            self.next();
            branches.push(self.parse_branch()?);
        }
        if branches.len() == 1 && branches[0].cost == 0.0 && !branches[0].alt {
            Ok(branches.pop().unwrap().expr)
        } else {
            Ok(RuleExpr::Alternation(branches))
        }
    }

    fn parse_branch(&mut self) -> Result<Branch> {
        let mut terms = vec![self.parse_term()?];
        while matches!(
            self.peek(),
            Some(Tok::Str(_) | Tok::Ident(_) | Tok::LParen)
        ) {
            terms.push(self.parse_term()?);
        }
        let mut cost = 0.0;
        let mut alt = false;
        loop {
            match self.peek() {
                Some(Tok::At) => {
                    self.next();
                    let (l, c) = self.here();
                    cost = match self.next() {
                        Some(Tok::Number(n)) => n,
                        Some(Tok::Int(n)) => n as f32,
                        _ => return Err(err(l, c, "expected cost after `@`")),
                    };
                    if cost < 0.0 {
                        return Err(err(l, c, "branch cost must be non-negative"));
                    }
                }
                Some(Tok::TildeAlt) => {
                    self.next();
                    alt = true;
                }
                _ => break,
            }
        }
        let expr = if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            RuleExpr::Sequence(terms)
        };
        Ok(Branch { expr, cost, alt })
    }

    fn parse_term(&mut self) -> Result<RuleExpr> {
        let atom = self.parse_atom()?;
        let quant = match self.peek() {
            Some(Tok::Question) => {
                self.next();
                Some(Quantifier::Optional)
            }
            Some(Tok::Star) => {
                self.next();
                Some(Quantifier::Star(self.parse_bound()?))
            }
            Some(Tok::Plus) => {
                self.next();
                Some(Quantifier::Plus(self.parse_bound()?))
            }
            _ => None,
        };
        Ok(match quant {
            None => atom,
            Some(q) => RuleExpr::Quantified {
                child: Box::new(atom),
                quant: q,
            },
        })
    }

    fn parse_bound(&mut self) -> Result<u32> {
        let (l, c) = self.here();
        self.expect(Tok::LBrace, "`{max}` bound on repetition")?;
        let max = match self.next() {
            Some(Tok::Int(n)) => n,
            _ => return Err(err(l, c, "expected integer repetition bound")),
        };
        self.expect(Tok::RBrace, "`}`")?;
        if max == 0 {
            return Err(err(l, c, "repetition bound must be positive"));
        }
        Ok(max)
    }

    fn parse_atom(&mut self) -> Result<RuleExpr> {
        let (l, c) = self.here();
        match self.next() {
            Some(Tok::Str(lex)) => {
                if self.peek() == Some(&Tok::Colon) {
                    self.next();
                    let (l2, c2) = self.here();
                    match self.next() {
                        Some(Tok::Str(wri)) => Ok(RuleExpr::Mapping { lex, wri }),
                        _ => Err(err(l2, c2, "expected written-side string after `:`")),
                    }
                } else {
                    // Bare string is an identity mapping.
                    Ok(RuleExpr::Mapping {
                        lex: lex.clone(),
                        wri: lex,
                    })
                }
            }
            Some(Tok::Ident(name)) => Ok(RuleExpr::RuleRef(name)),
            Some(Tok::LParen) => {
                let e = self.parse_expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(err(l, c, "expected a term")),
        }
    }
}

/// Parses and validates one rule file. The returned set's category name is
/// empty; [`super::load_pack`] fills it in from the file name.
pub fn parse_rules(source: &str) -> Result<RuleSet> {
    let toks = lex(source)?;
    let mut parser = Parser { toks, pos: 0 };
    let rules = parser.parse_file()?;
    let rs = RuleSet {
        category: String::new(),
        root: "root".to_string(),
        rules,
    };
    validate(&rs)?;
    Ok(rs)
}

fn validate(rs: &RuleSet) -> Result<()> {
    if !rs.rules.contains_key(&rs.root) {
        return Err(Error::Parse {
            file: String::new(),
            line: 1,
            col: 1,
            msg: "missing `root` rule".into(),
        });
    }
    // Resolve references and reject cycles.
    let mut visiting = HashSet::new();
    let mut done = HashSet::new();
    fn visit<'a>(
        name: &'a str,
        rs: &'a RuleSet,
        visiting: &mut HashSet<&'a str>,
        done: &mut HashSet<&'a str>,
    ) -> Result<()> {
        if done.contains(name) {
            return Ok(());
        }
        if !visiting.insert(name) {
            return Err(Error::CyclicRef(name.to_string()));
        }
        let expr = rs
            .rules
            .get(name)
            .ok_or_else(|| Error::UnresolvedRef(name.to_string()))?;
        walk(expr, rs, visiting, done)?;
        visiting.remove(name);
        done.insert(name);
        Ok(())
    }
    fn walk<'a>(
        expr: &'a RuleExpr,
        rs: &'a RuleSet,
        visiting: &mut HashSet<&'a str>,
        done: &mut HashSet<&'a str>,
    ) -> Result<()> {
        match expr {
            RuleExpr::Mapping { .. } => Ok(()),
            RuleExpr::Sequence(children) => {
                children.iter().try_for_each(|c| walk(c, rs, visiting, done))
            }
            RuleExpr::Alternation(branches) => branches
                .iter()
                .try_for_each(|b| walk(&b.expr, rs, visiting, done)),
            RuleExpr::Quantified { child, .. } => walk(child, rs, visiting, done),
            RuleExpr::RuleRef(name) => visit(name, rs, visiting, done),
        }
    }
    for name in rs.rules.keys() {
        visit(name, rs, &mut visiting, &mut done)?;
    }
    Ok(())
}
