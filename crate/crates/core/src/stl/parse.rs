//! Text syntax for properties.
//!
//! ```text
//! formula := term (("and"|"&") term)* | term (("or"|"|") term)*
//! term    := "(" lit ")" ("U"|"R") "[" num "," num "]" "(" lit ")" | "(" formula ")" | "true"
//! lit     := lit "||" lit | lit "&&" lit | "!" atom | atom | "(" lit ")" | "true" | "false"
//! atom    := affine ("<"|"<="|">"|">="|"==") affine
//! ```

use thiserror::Error;

use super::{AffineExpr, Comparison, Interval, Predicate, StateFormula, StlError, StlFormula};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("nested temporal operator")]
    NestedTemporal,
    #[error("interval lo > hi")]
    IntervalOrder,
    #[error("interval bound is negative")]
    NegativeBound,
    #[error("non-affine expression")]
    NonAffine,
    #[error("comparison mentions no variable")]
    NoVariable,
    #[error("`!` must be followed by a single comparison")]
    NegationScope,
    #[error("cannot mix `and` and `or` without parentheses")]
    MixedConnectives,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {position}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Bang,
    AndAnd,
    OrOr,
    And,
    Or,
    Cmp(&'static str),
    Num(Rational),
    Ident(String),
    Eof,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(r) => format!("number `{r}`"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
        other => format!("{other:?}"),
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let syntax = |msg: String, position| ParseError {
        kind: ParseErrorKind::Syntax(msg),
        position,
    };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let two = bytes.get(i..i + 2).unwrap_or(&[]);
        let tok = match two {
            b"&&" => Some(Tok::AndAnd),
            b"||" => Some(Tok::OrOr),
            b"<=" => Some(Tok::Cmp("<=")),
            b">=" => Some(Tok::Cmp(">=")),
            b"==" => Some(Tok::Cmp("==")),
            b"!=" => return Err(syntax("`!=` is not supported; write `!(a == b)`".into(), i)),
            _ => None,
        };
        if let Some(tok) = tok {
            out.push((tok, start));
            i += 2;
            continue;
        }
        let single = match c {
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'[' => Some(Tok::LBrack),
            b']' => Some(Tok::RBrack),
            b',' => Some(Tok::Comma),
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'!' => Some(Tok::Bang),
            b'&' => Some(Tok::And),
            b'|' => Some(Tok::Or),
            b'<' => Some(Tok::Cmp("<")),
            b'>' => Some(Tok::Cmp(">")),
            _ => None,
        };
        if let Some(tok) = single {
            out.push((tok, start));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // `p/q` literal only when digits follow the slash directly.
            if i + 1 < bytes.len() && bytes[i] == b'/' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let lit = &text[start..i];
            let value = lit
                .parse::<Rational>()
                .map_err(|_| syntax(format!("invalid number `{lit}`"), start))?;
            out.push((Tok::Num(value), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &text[start..i];
            let tok = match word {
                "and" => Tok::And,
                "or" => Tok::Or,
                _ => Tok::Ident(word.to_string()),
            };
            out.push((tok, start));
            continue;
        }
        let ch = text[i..].chars().next().unwrap_or('?');
        return Err(syntax(format!("unexpected character `{ch}`"), i));
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    registry: Vec<Predicate>,
    operand_error: Option<ParseError>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn here(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            kind,
            position: self.here(),
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        self.err(ParseErrorKind::Syntax(format!(
            "expected {wanted}, found {}",
            describe(self.peek())
        )))
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn at_temporal(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == "U" || s == "R")
            && *self.peek_at(1) == Tok::LBrack
    }

    fn formula(&mut self) -> Result<StlFormula, ParseError> {
        let mut acc = self.term()?;
        let mut connective: Option<bool> = None;
        loop {
            let is_and = match self.peek() {
                Tok::And | Tok::AndAnd => true,
                Tok::Or | Tok::OrOr => false,
                _ => return Ok(acc),
            };
            if connective.is_some_and(|c| c != is_and) {
                return Err(self.err(ParseErrorKind::MixedConnectives));
            }
            connective = Some(is_and);
            self.bump();
            let rhs = self.term()?;
            acc = if is_and {
                StlFormula::and(acc, rhs)
            } else {
                StlFormula::or(acc, rhs)
            };
        }
    }

    fn term(&mut self) -> Result<StlFormula, ParseError> {
        if matches!(self.peek(), Tok::Ident(s) if s == "true") {
            self.bump();
            return Ok(StlFormula::True);
        }
        if *self.peek() != Tok::LParen {
            return Err(self.unexpected("`(` or `true`"));
        }
        let start = self.pos;
        let saved = self.registry.len();
        self.operand_error = None;
        match self.temporal_term()? {
            Some(term) => Ok(term),
            None => {
                // Operand did not parse as a literal formula: try a grouped formula.
                let operand_end = self.pos;
                self.pos = start;
                self.registry.truncate(saved);
                self.bump();
                let grouped = match self.formula() {
                    Ok(f) => f,
                    Err(e) if operand_end > start => {
                        self.pos = operand_end;
                        return Err(e.max_position(self.unexpected("`U[` or `R[` after operand")));
                    }
                    Err(e) => match self.operand_error.take() {
                        Some(first) => return Err(e.max_position(first)),
                        None => return Err(e),
                    },
                };
                self.expect(Tok::RParen, "`)`")?;
                if self.at_temporal() {
                    return Err(self.err(ParseErrorKind::NestedTemporal));
                }
                Ok(grouped)
            }
        }
    }

    /// `Ok(None)` means backtrack; the position then marks how far the
    /// operand got (unchanged if it never closed).
    fn temporal_term(&mut self) -> Result<Option<StlFormula>, ParseError> {
        let start = self.pos;
        self.bump();
        let left = match self.lit_or() {
            Ok(l) => l,
            Err(e) if matches!(e.kind, ParseErrorKind::Syntax(_)) => {
                self.pos = start;
                self.operand_error = Some(e);
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        if *self.peek() != Tok::RParen {
            self.pos = start;
            return Ok(None);
        }
        self.bump();
        if !self.at_temporal() {
            return Ok(None);
        }
        let until = matches!(self.bump(), Tok::Ident(s) if s == "U");
        self.bump();
        let interval = self.interval()?;
        self.expect(Tok::LParen, "`(`")?;
        let right = self.lit_or()?;
        if self.at_temporal() {
            return Err(self.err(ParseErrorKind::NestedTemporal));
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(Some(if until {
            StlFormula::until(left, interval, right)
        } else {
            StlFormula::release(left, interval, right)
        }))
    }

    fn interval(&mut self) -> Result<Interval, ParseError> {
        let lo_pos = self.here();
        let lo = self.number()?;
        self.expect(Tok::Comma, "`,`")?;
        let hi = self.number()?;
        self.expect(Tok::RBrack, "`]`")?;
        Interval::new(lo, hi).map_err(|e| ParseError {
            kind: match e {
                StlError::NegativeBound(_) => ParseErrorKind::NegativeBound,
                _ => ParseErrorKind::IntervalOrder,
            },
            position: lo_pos,
        })
    }

    fn number(&mut self) -> Result<Rational, ParseError> {
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Num(r) => {
                self.bump();
                Ok(if neg { -r } else { r })
            }
            _ => Err(self.unexpected("a number")),
        }
    }

    fn lit_or(&mut self) -> Result<StateFormula, ParseError> {
        let mut acc = self.lit_and()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.lit_and()?;
            acc = StateFormula::Or(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn lit_and(&mut self) -> Result<StateFormula, ParseError> {
        let mut acc = self.lit_primary()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.lit_primary()?;
            acc = StateFormula::And(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn lit_primary(&mut self) -> Result<StateFormula, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "true" => {
                self.bump();
                Ok(StateFormula::True)
            }
            Tok::Ident(s) if s == "false" => {
                self.bump();
                Ok(StateFormula::False)
            }
            Tok::Bang => {
                self.bump();
                let pred = if *self.peek() == Tok::LParen {
                    self.bump();
                    let p = self.atom().map_err(|e| self.negation_error(e))?;
                    if *self.peek() != Tok::RParen {
                        return Err(self.err(ParseErrorKind::NegationScope));
                    }
                    self.bump();
                    p
                } else {
                    self.atom().map_err(|e| self.negation_error(e))?
                };
                Ok(StateFormula::not_lit(pred))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.lit_or()?;
                if self.at_temporal() {
                    return Err(self.err(ParseErrorKind::NestedTemporal));
                }
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Ok(StateFormula::lit(self.atom()?)),
        }
    }

    fn negation_error(&self, e: ParseError) -> ParseError {
        match e.kind {
            ParseErrorKind::Syntax(_) => ParseError {
                kind: ParseErrorKind::NegationScope,
                position: e.position,
            },
            _ => e,
        }
    }

    fn atom(&mut self) -> Result<Predicate, ParseError> {
        let start = self.here();
        let (lhs_terms, lhs_const) = self.affine()?;
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            _ => return Err(self.unexpected("a comparison operator")),
        };
        self.bump();
        let (rhs_terms, rhs_const) = self.affine()?;
        // lhs - rhs, flipped for `<`/`<=` so the stored form compares against zero.
        let flip = matches!(op, "<" | "<=");
        let sign = |c: Rational, lhs: bool| if lhs != flip { c } else { -c };
        let mut terms: Vec<(String, Rational)> = Vec::new();
        terms.extend(lhs_terms.into_iter().map(|(v, c)| (v, sign(c, true))));
        terms.extend(rhs_terms.into_iter().map(|(v, c)| (v, sign(c, false))));
        let constant = sign(lhs_const, true) + sign(rhs_const, false);
        let expr = AffineExpr::new(terms, constant).map_err(|_| ParseError {
            kind: ParseErrorKind::NoVariable,
            position: start,
        })?;
        let cmp = match op {
            ">=" | "<=" => Comparison::Ge,
            ">" | "<" => Comparison::Gt,
            _ => Comparison::Eq,
        };
        let candidate = Predicate::new("", expr, cmp);
        if let Some(existing) = self.registry.iter().find(|p| p.same_shape(&candidate)) {
            return Ok(existing.clone());
        }
        let pred = Predicate::new(format!("p{}", self.registry.len() + 1), candidate.expr, cmp);
        self.registry.push(pred.clone());
        Ok(pred)
    }

    fn affine(&mut self) -> Result<(Vec<(String, Rational)>, Rational), ParseError> {
        let mut terms = Vec::new();
        let mut constant = Rational::zero();
        let mut first = true;
        loop {
            let negative = match self.peek() {
                Tok::Minus => {
                    self.bump();
                    true
                }
                Tok::Plus => {
                    self.bump();
                    false
                }
                _ if first => false,
                _ => break,
            };
            first = false;
            let (var, coef) = self.affine_term()?;
            let coef = if negative { -coef } else { coef };
            match var {
                Some(v) => terms.push((v, coef)),
                None => constant += &coef,
            }
        }
        Ok((terms, constant))
    }

    fn affine_term(&mut self) -> Result<(Option<String>, Rational), ParseError> {
        let (mut var, mut coef) = match self.bump() {
            Tok::Num(r) => (None, r),
            Tok::Ident(s) if matches!(s.as_str(), "true" | "false" | "U" | "R") && self.is_keyword_here(&s) => {
                self.pos -= 1;
                return Err(self.unexpected("an affine expression"));
            }
            Tok::Ident(s) => (Some(s), Rational::one()),
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("a number or variable"));
            }
        };
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    match self.bump() {
                        Tok::Num(r) => coef = coef * r,
                        Tok::Ident(s) if var.is_none() => var = Some(s),
                        Tok::Ident(_) => {
                            self.pos -= 1;
                            return Err(self.err(ParseErrorKind::NonAffine));
                        }
                        _ => {
                            self.pos -= 1;
                            return Err(self.unexpected("a number or variable"));
                        }
                    }
                }
                Tok::Slash => {
                    self.bump();
                    match self.bump() {
                        Tok::Num(r) if !r.is_zero() => coef = coef / r,
                        Tok::Ident(_) => {
                            self.pos -= 1;
                            return Err(self.err(ParseErrorKind::NonAffine));
                        }
                        _ => {
                            self.pos -= 1;
                            return Err(self.unexpected("a nonzero number"));
                        }
                    }
                }
                Tok::Caret => return Err(self.err(ParseErrorKind::NonAffine)),
                Tok::LParen if var.is_some() => return Err(self.err(ParseErrorKind::NonAffine)),
                Tok::Num(_) | Tok::Ident(_) if !self.at_temporal() => {
                    return Err(self.err(ParseErrorKind::NonAffine))
                }
                _ => break,
            }
        }
        Ok((var, coef))
    }

    fn is_keyword_here(&self, word: &str) -> bool {
        match word {
            "U" | "R" => *self.peek() == Tok::LBrack,
            _ => true,
        }
    }
}

impl ParseError {
    fn max_position(self, other: ParseError) -> ParseError {
        if other.position >= self.position {
            other
        } else {
            self
        }
    }
}

/// Parses a property. Predicates get ids `p1, p2, …` in order of first
/// occurrence; textually different but identical comparisons share an id.
pub fn parse_formula(text: &str) -> Result<StlFormula, ParseError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
        registry: Vec::new(),
        operand_error: None,
    };
    let phi = p.formula()?;
    if *p.peek() != Tok::Eof {
        if p.at_temporal() {
            return Err(p.err(ParseErrorKind::NestedTemporal));
        }
        return Err(p.unexpected("`and`, `or` or end of input"));
    }
    Ok(phi)
}
