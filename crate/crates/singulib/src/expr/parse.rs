//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := atom ("^" number)?
//! atom   := number | "s" | "exp(" expr ")" | "log(" expr ")" | "(" expr ")"
//! ```
//!
//! Whitespace is insignificant. Numeric literals may carry a sign where an
//! atom or a power exponent is expected, so the canonical printer's output
//! always reparses.

use super::{Expression, Node};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("parse error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    fn new(offset: usize, message: impl Into<String>) -> Self {
        ParseError {
            offset,
            message: message.into(),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

/// Parse UTF-8 source text into an [`Expression`].
pub fn parse(source: &str) -> Result<Expression, ParseError> {
    let mut p = Parser {
        src: source.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    let node = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(ParseError::new(
            p.pos,
            format!("unexpected trailing input `{}`", p.rest()),
        ));
    }
    Ok(Expression::new(node))
}

impl<'a> Parser<'a> {
    fn rest(&self) -> String {
        String::from_utf8_lossy(&self.src[self.pos..]).into_owned()
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut node = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    self.skip_ws();
                    let rhs = self.term()?;
                    node = Node::Add(Box::new(node), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    self.skip_ws();
                    let rhs = self.term()?;
                    node = Node::Sub(Box::new(node), Box::new(rhs));
                }
                _ => return Ok(node),
            }
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut node = self.factor()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    self.skip_ws();
                    let rhs = self.factor()?;
                    node = Node::Mul(Box::new(node), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    self.skip_ws();
                    let rhs = self.factor()?;
                    node = Node::Div(Box::new(node), Box::new(rhs));
                }
                _ => return Ok(node),
            }
        }
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        self.skip_ws();
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let at = self.pos;
            match self.number() {
                Some(e) => Ok(Node::Pow(Box::new(base), e)),
                None => Err(ParseError::new(
                    at,
                    "power exponent must be a real constant (nest exp/log for \
                     expression-valued exponents)",
                )),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        self.skip_ws();
        let at = self.pos;
        match self.peek() {
            None => Err(ParseError::new(at, "unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' || c == b'-' => match self.number() {
                Some(v) => Ok(Node::Const(v)),
                None => Err(ParseError::new(at, "malformed number")),
            },
            Some(c) if c.is_ascii_alphabetic() => {
                let ident = self.ident();
                match ident.as_str() {
                    "s" => Ok(Node::Var),
                    "exp" | "log" => {
                        self.skip_ws();
                        if self.peek() != Some(b'(') {
                            return Err(ParseError::new(
                                self.pos,
                                format!("expected `(` after `{ident}`"),
                            ));
                        }
                        self.pos += 1;
                        let inner = self.expr()?;
                        self.expect_rparen()?;
                        Ok(if ident == "exp" {
                            Node::Exp(Box::new(inner))
                        } else {
                            Node::Log(Box::new(inner))
                        })
                    }
                    other => Err(ParseError::new(at, format!("unknown identifier `{other}`"))),
                }
            }
            Some(c) => Err(ParseError::new(
                at,
                format!("unexpected character `{}`", c as char),
            )),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        self.skip_ws();
        if self.peek() == Some(b')') {
            self.pos += 1;
            Ok(())
        } else {
            Err(ParseError::new(self.pos, "unbalanced parenthesis"))
        }
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self
            .peek()
            .map(|c| c.is_ascii_alphanumeric() || c == b'_')
            .unwrap_or(false)
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    /// Lex a numeric literal with optional leading sign and exponent part.
    /// Returns `None` without consuming input when no number starts here.
    fn number(&mut self) -> Option<f64> {
        let start = self.pos;
        let mut pos = self.pos;
        if self.src.get(pos) == Some(&b'-') {
            pos += 1;
        }
        let digits_start = pos;
        while self.src.get(pos).map(|c| c.is_ascii_digit()).unwrap_or(false) {
            pos += 1;
        }
        if self.src.get(pos) == Some(&b'.') {
            pos += 1;
            while self.src.get(pos).map(|c| c.is_ascii_digit()).unwrap_or(false) {
                pos += 1;
            }
        }
        if pos == digits_start || (pos == digits_start + 1 && self.src[digits_start] == b'.') {
            return None;
        }
        // Exponent part only when followed by an actual digit, so `2exp(s)`
        // lexes as `2` `exp` `(` ... .
        if matches!(self.src.get(pos), Some(&b'e') | Some(&b'E')) {
            let mut epos = pos + 1;
            if matches!(self.src.get(epos), Some(&b'+') | Some(&b'-')) {
                epos += 1;
            }
            if self.src.get(epos).map(|c| c.is_ascii_digit()).unwrap_or(false) {
                pos = epos;
                while self.src.get(pos).map(|c| c.is_ascii_digit()).unwrap_or(false) {
                    pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..pos]).ok()?;
        let value: f64 = text.parse().ok()?;
        self.pos = pos;
        Some(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Node::*;

    #[test]
    fn parses_single_power() {
        let e = parse("s^2").unwrap();
        assert_eq!(e.root(), &Pow(Box::new(Var), 2.0));
    }

    #[test]
    fn parses_power_minus_log() {
        let e = parse("s^2 - 3*log(s)").unwrap();
        let want = Sub(
            Box::new(Pow(Box::new(Var), 2.0)),
            Box::new(Mul(Box::new(Const(3.0)), Box::new(Log(Box::new(Var))))),
        );
        assert_eq!(e.root(), &want);
    }

    #[test]
    fn unbalanced_paren_reports_offset() {
        let err = parse("exp(s").unwrap_err();
        assert_eq!(err.offset, 5);
        assert!(err.message.contains("unbalanced parenthesis"));
    }

    #[test]
    fn unknown_identifier_rejected() {
        let err = parse("sin(s)").unwrap_err();
        assert!(err.message.contains("unknown identifier"));
    }

    #[test]
    fn expression_valued_exponent_rejected() {
        let err = parse("s^s").unwrap_err();
        assert!(err.message.contains("real constant"));
    }

    #[test]
    fn scientific_notation_and_negative_exponents() {
        assert_eq!(
            parse("1.5e-2*s^-3").unwrap().root(),
            &Mul(Box::new(Const(0.015)), Box::new(Pow(Box::new(Var), -3.0)))
        );
    }

    #[test]
    fn number_followed_by_exp_call() {
        let e = parse("2*exp(s)").unwrap();
        assert_eq!(
            e.root(),
            &Mul(Box::new(Const(2.0)), Box::new(Exp(Box::new(Var))))
        );
    }
}
