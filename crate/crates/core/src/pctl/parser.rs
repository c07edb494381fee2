//! Recursive-descent parser for the supported PCTL fragment.
//!
//! ```text
//! state := or
//! or    := and ('|' and)*
//! and   := unary ('&' unary)*
//! unary := '!' unary | primary
//! primary := 'true' | 'false' | ident | '"' ident '"' | ident '=' ident
//!          | '(' state ')' | 'P' bound '[' path ']'
//! bound := '=?' | ('<' | '<=' | '>=' | '>') number
//! path  := 'X' unary | 'F' ['<=' int] unary | 'G' 'F' unary
//!        | unary 'U' ['<=' int] unary
//! ```
//!
//! `F Φ` is sugar for `true U Φ`; `Agent=g` denotes the `goal` label.

use crate::dtmc::GOAL_LABEL;
use crate::error::PctlError;

use super::{Comparison, PathFormula, ProbBound, StateFormula};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Quoted(String),
    Number(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Not,
    And,
    Or,
    Eq,
    Query,
    Lt,
    Le,
    Ge,
    Gt,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Tok)>, PctlError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        while let Some(t) = lx.next_token()? {
            out.push(t);
        }
        Ok(out)
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn next_token(&mut self) -> Result<Option<(usize, Tok)>, PctlError> {
        while self.peek_char().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(c) = self.peek_char() else {
            return Ok(None);
        };
        let rest = &self.src[self.pos..];
        let (tok, len) = if rest.starts_with("=?") {
            (Tok::Query, 2)
        } else if rest.starts_with("<=") {
            (Tok::Le, 2)
        } else if rest.starts_with(">=") {
            (Tok::Ge, 2)
        } else {
            match c {
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '[' => (Tok::LBracket, 1),
                ']' => (Tok::RBracket, 1),
                '!' => (Tok::Not, 1),
                '&' => (Tok::And, 1),
                '|' => (Tok::Or, 1),
                '=' => (Tok::Eq, 1),
                '<' => (Tok::Lt, 1),
                '>' => (Tok::Gt, 1),
                '"' => {
                    let end = rest[1..].find('"').ok_or_else(|| PctlError::Syntax {
                        position: start,
                        message: "unterminated string".into(),
                    })?;
                    (Tok::Quoted(rest[1..1 + end].to_string()), end + 2)
                }
                c if c.is_ascii_digit() || c == '.' => {
                    let len = rest
                        .find(|ch: char| !(ch.is_ascii_digit() || ch == '.'))
                        .unwrap_or(rest.len());
                    (Tok::Number(rest[..len].to_string()), len)
                }
                c if c.is_alphabetic() || c == '_' => {
                    let len = rest
                        .find(|ch: char| !(ch.is_alphanumeric() || ch == '_'))
                        .unwrap_or(rest.len());
                    (Tok::Ident(rest[..len].to_string()), len)
                }
                other => {
                    return Err(PctlError::Syntax {
                        position: start,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            }
        };
        self.pos += len;
        Ok(Some((start, tok)))
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    idx: usize,
    end: usize,
}

const KEYWORDS: [&str; 7] = ["P", "X", "U", "F", "G", "true", "false"];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(_, t)| t)
    }

    fn position(&self) -> usize {
        self.toks.get(self.idx).map_or(self.end, |(p, _)| *p)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, PctlError> {
        Err(PctlError::Syntax {
            position: self.position(),
            message: message.into(),
        })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.idx).map(|(_, t)| t.clone());
        self.idx += 1;
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), PctlError> {
        if self.peek() == Some(&tok) {
            self.idx += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn is_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == name)
    }

    fn state(&mut self) -> Result<StateFormula, PctlError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.bump();
            let rhs = self.and()?;
            lhs = StateFormula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<StateFormula, PctlError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Tok::And) {
            self.bump();
            let rhs = self.unary()?;
            lhs = StateFormula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<StateFormula, PctlError> {
        if self.peek() == Some(&Tok::Not) {
            self.bump();
            return Ok(StateFormula::Not(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<StateFormula, PctlError> {
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.bump();
                let inner = self.state()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Quoted(name)) => {
                self.bump();
                Ok(StateFormula::Atom(name))
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "true" => {
                    self.bump();
                    Ok(StateFormula::True)
                }
                "false" => {
                    self.bump();
                    Ok(StateFormula::Not(Box::new(StateFormula::True)))
                }
                "P" => self.prob(),
                kw if KEYWORDS.contains(&kw) => self.error(format!("unexpected keyword `{kw}`")),
                _ => {
                    self.bump();
                    if self.peek() == Some(&Tok::Eq) {
                        self.bump();
                        let value = match self.bump() {
                            Some(Tok::Ident(v)) => v,
                            _ => return self.error("expected a location name after `=`"),
                        };
                        if name.eq_ignore_ascii_case("agent") && value == "g" {
                            Ok(StateFormula::atom(GOAL_LABEL))
                        } else {
                            Err(PctlError::Semantic(format!(
                                "unsupported variable predicate `{name}={value}` (only `Agent=g`)"
                            )))
                        }
                    } else {
                        Ok(StateFormula::Atom(name))
                    }
                }
            },
            Some(_) => self.error("expected a state formula"),
            None => self.error("unexpected end of input"),
        }
    }

    fn number(&mut self) -> Result<f64, PctlError> {
        match self.bump() {
            Some(Tok::Number(n)) => n.parse().or_else(|_| {
                self.idx -= 1;
                self.error(format!("bad number `{n}`"))
            }),
            _ => {
                self.idx -= 1;
                self.error("expected a number")
            }
        }
    }

    fn step_bound(&mut self) -> Result<Option<u64>, PctlError> {
        if self.peek() != Some(&Tok::Le) {
            return Ok(None);
        }
        self.bump();
        match self.bump() {
            Some(Tok::Number(n)) => match n.parse::<u64>() {
                Ok(k) => Ok(Some(k)),
                Err(_) => {
                    self.idx -= 1;
                    self.error(format!("step bound `{n}` is not a natural number"))
                }
            },
            _ => {
                self.idx -= 1;
                self.error("expected a step bound")
            }
        }
    }

    fn prob(&mut self) -> Result<StateFormula, PctlError> {
        self.bump(); // P
        let bound = match self.bump() {
            Some(Tok::Query) => ProbBound::Query,
            Some(op @ (Tok::Lt | Tok::Le | Tok::Ge | Tok::Gt)) => {
                let cmp = match op {
                    Tok::Lt => Comparison::Less,
                    Tok::Le => Comparison::LessEq,
                    Tok::Ge => Comparison::GreaterEq,
                    _ => Comparison::Greater,
                };
                let p = self.number()?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(PctlError::Semantic(format!(
                        "probability bound {p} outside [0,1]"
                    )));
                }
                ProbBound::Bound(cmp, p)
            }
            _ => {
                self.idx -= 1;
                return self.error("expected `=?` or a comparison after `P`");
            }
        };
        self.expect(Tok::LBracket, "`[`")?;
        let path = self.path()?;
        self.expect(Tok::RBracket, "`]`")?;
        if matches!(path, PathFormula::GloballyEventually(_)) {
            let ok = match bound {
                ProbBound::Query => true,
                ProbBound::Bound(Comparison::GreaterEq, p) => p == 1.0,
                _ => false,
            };
            if !ok {
                return Err(PctlError::Semantic(
                    "`G F` is only supported as P>=1 [ G F .. ] or P=? [ G F .. ]".into(),
                ));
            }
        }
        Ok(StateFormula::Prob(bound, Box::new(path)))
    }

    fn path(&mut self) -> Result<PathFormula, PctlError> {
        if self.is_ident("X") {
            self.bump();
            return Ok(PathFormula::Next(self.unary()?));
        }
        if self.is_ident("F") {
            self.bump();
            let k = self.step_bound()?;
            let rhs = self.unary()?;
            return Ok(match k {
                Some(k) => PathFormula::BoundedUntil(StateFormula::True, rhs, k),
                None => PathFormula::Until(StateFormula::True, rhs),
            });
        }
        if self.is_ident("G") {
            self.bump();
            if !self.is_ident("F") {
                return Err(PctlError::Semantic(
                    "standalone `G` is not supported; use `G F`".into(),
                ));
            }
            self.bump();
            return Ok(PathFormula::GloballyEventually(self.unary()?));
        }
        let lhs = self.unary()?;
        if !self.is_ident("U") {
            return self.error("expected `U` in path formula");
        }
        self.bump();
        let k = self.step_bound()?;
        let rhs = self.unary()?;
        Ok(match k {
            Some(k) => PathFormula::BoundedUntil(lhs, rhs, k),
            None => PathFormula::Until(lhs, rhs),
        })
    }
}

/// Parses a state formula. A `P=?` query is only accepted at the top level.
pub fn parse(text: &str) -> Result<StateFormula, PctlError> {
    let toks = Lexer::tokens(text)?;
    let mut p = Parser {
        toks,
        idx: 0,
        end: text.len(),
    };
    let f = p.state()?;
    if p.peek().is_some() {
        return p.error("trailing input");
    }
    if contains_nested_query(&f, true) {
        return Err(PctlError::Semantic(
            "`P=?` may only appear as the outermost operator".into(),
        ));
    }
    Ok(f)
}

fn contains_nested_query(f: &StateFormula, top: bool) -> bool {
    use StateFormula::*;
    match f {
        True | Atom(_) => false,
        Not(a) => contains_nested_query(a, false),
        And(a, b) | Or(a, b) => contains_nested_query(a, false) || contains_nested_query(b, false),
        Prob(bound, path) => {
            (!top && *bound == ProbBound::Query)
                || match path.as_ref() {
                    PathFormula::Next(a) | PathFormula::GloballyEventually(a) => {
                        contains_nested_query(a, false)
                    }
                    PathFormula::Until(a, b) | PathFormula::BoundedUntil(a, b, _) => {
                        contains_nested_query(a, false) || contains_nested_query(b, false)
                    }
                }
        }
    }
}
