//! Concrete syntax.
//!
//! ```text
//! formula    := iff
//! iff        := implies ( "<->" iff )?
//! implies    := or ( "->" implies )?
//! or         := and ( "|" and )*
//! and        := unary ( "&" unary )*
//! unary      := ("!" | "~" | "not") unary | quantified | primary
//! quantified := ("forall" | "exists") var "." formula
//! primary    := "(" formula ")" | "true" | "false"
//!             | "C(" var ")" | ("U"|"R"|"D1"|"D2") "(" var "," var ")"
//!             | "dist>(" var "," var "," number ")"
//!             | var "=" var | var "!=" var
//! ```
//!
//! `->` and `<->` associate to the right; a quantifier's scope extends as far
//! right as possible. `#` starts a comment running to the end of the line.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use super::ast::{Formula, Relation};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("syntax error at byte {position}: {message}")]
pub struct SyntaxError {
    pub position: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u32),
    LParen,
    RParen,
    Comma,
    Dot,
    Not,
    And,
    Or,
    Implies,
    Iff,
    Eq,
    Neq,
    DistGt,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => alloc::format!("`{s}`"),
            Tok::Num(n) => alloc::format!("number {n}"),
            Tok::Eof => "end of input".to_string(),
            other => alloc::format!("{other:?}"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, SyntaxError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |position: usize, message: &str| SyntaxError { position, message: message.to_string() };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            b'(' => out.push((Tok::LParen, start)),
            b')' => out.push((Tok::RParen, start)),
            b',' => out.push((Tok::Comma, start)),
            b'.' => out.push((Tok::Dot, start)),
            b'&' => out.push((Tok::And, start)),
            b'|' => out.push((Tok::Or, start)),
            b'~' => out.push((Tok::Not, start)),
            b'=' => out.push((Tok::Eq, start)),
            b'!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 1;
                    out.push((Tok::Neq, start));
                } else {
                    out.push((Tok::Not, start));
                }
            }
            b'-' => {
                if bytes.get(i + 1) != Some(&b'>') {
                    return Err(err(start, "expected `->`"));
                }
                i += 1;
                out.push((Tok::Implies, start));
            }
            b'<' => {
                if bytes.get(i + 1..i + 3) != Some(b"->") {
                    return Err(err(start, "expected `<->`"));
                }
                i += 2;
                out.push((Tok::Iff, start));
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let value = text[start..i].parse().map_err(|_| err(start, "number out of range"))?;
                out.push((Tok::Num(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'') {
                    i += 1;
                }
                let word = &text[start..i];
                if word == "dist" && bytes.get(i) == Some(&b'>') {
                    i += 1;
                    out.push((Tok::DistGt, start));
                } else {
                    out.push((Tok::Ident(word.to_string()), start));
                }
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().unwrap();
                return Err(SyntaxError { position: start, message: alloc::format!("unexpected character `{ch}`") });
            }
        }
        i += 1;
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

const KEYWORDS: [&str; 5] = ["forall", "exists", "true", "false", "not"];

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: String) -> Result<T, SyntaxError> {
        Err(SyntaxError { position: self.offset(), message })
    }

    fn expect(&mut self, want: Tok) -> Result<(), SyntaxError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.error(alloc::format!("expected {}, found {}", want.describe(), self.peek().describe()))
        }
    }

    fn var(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.bump();
                Ok(name)
            }
            other => self.error(alloc::format!("expected a variable, found {}", other.describe())),
        }
    }

    fn iff(&mut self) -> Result<Formula, SyntaxError> {
        let lhs = self.implies()?;
        if *self.peek() == Tok::Iff {
            self.bump();
            return Ok(Formula::iff(lhs, self.iff()?));
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<Formula, SyntaxError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Implies {
            self.bump();
            return Ok(Formula::implies(lhs, self.implies()?));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, SyntaxError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, SyntaxError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::And {
            self.bump();
            lhs = Formula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, SyntaxError> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Ident(w) if w == "not" => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Ident(w) if w == "forall" || w == "exists" => {
                let universal = w == "forall";
                self.bump();
                let v = self.var()?;
                self.expect(Tok::Dot)?;
                let body = self.iff()?;
                Ok(if universal { Formula::forall(&v, body) } else { Formula::exists(&v, body) })
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula, SyntaxError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let f = self.iff()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::DistGt => {
                self.bump();
                self.expect(Tok::LParen)?;
                let a = self.var()?;
                self.expect(Tok::Comma)?;
                let b = self.var()?;
                self.expect(Tok::Comma)?;
                let c = match self.peek().clone() {
                    Tok::Num(c) => {
                        self.bump();
                        c
                    }
                    other => return self.error(alloc::format!("expected a distance, found {}", other.describe())),
                };
                self.expect(Tok::RParen)?;
                Ok(Formula::DistGt(a, b, c))
            }
            Tok::Ident(w) if w == "true" => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::Ident(w) if w == "false" => {
                self.bump();
                Ok(Formula::False)
            }
            Tok::Ident(w) if *self.peek_at(1) == Tok::LParen => {
                if w != "C" && Relation::from_symbol(&w).is_none() {
                    return self.error(alloc::format!("unknown relation `{w}`"));
                }
                self.bump();
                self.bump();
                let f = match Relation::from_symbol(&w) {
                    None => Formula::Color(self.var()?),
                    Some(rel) => {
                        let a = self.var()?;
                        self.expect(Tok::Comma)?;
                        let b = self.var()?;
                        Formula::Rel(rel, a, b)
                    }
                };
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Ident(_) => {
                let a = self.var()?;
                match self.peek().clone() {
                    Tok::Eq => {
                        self.bump();
                        Ok(Formula::Eq(a, self.var()?))
                    }
                    Tok::Neq => {
                        self.bump();
                        Ok(Formula::not(Formula::Eq(a, self.var()?)))
                    }
                    other => self.error(alloc::format!("expected `=` or `!=` after variable, found {}", other.describe())),
                }
            }
            other => self.error(alloc::format!("expected a formula, found {}", other.describe())),
        }
    }
}

/// Parses a formula. Free variables are allowed; use
/// [`Formula::check_sentence`] when a sentence is required.
pub fn parse(text: &str) -> Result<Formula, SyntaxError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let f = p.iff()?;
    if *p.peek() != Tok::Eof {
        return p.error(alloc::format!("unexpected {}", p.peek().describe()));
    }
    Ok(f)
}
