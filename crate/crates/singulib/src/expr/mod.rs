//! Expression DSL for exponent functions `a(s)` of `f = e^{a(s)}`.
//!
//! The grammar is deliberately small: sums, products, quotients, powers with
//! real constant exponents, `exp`, `log`, one variable `s`. Anything of the
//! form `s^{g(s)}` is expressed as `exp(g(s)*log(s))` instead of widening the
//! power node. ASTs are immutable and cheap to clone; evaluation happens
//! through truncated-Taylor jets in [`eval_jet`].

mod jet;
mod parse;

pub use jet::{eval_jet, EvalError, EvalErrorKind, Jet};
pub use parse::{parse, ParseError};

use std::fmt;

/// A node of the expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Real constant.
    Const(f64),
    /// The variable `s`.
    Var,
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    /// `base ^ exponent` with a real constant exponent.
    Pow(Box<Node>, f64),
    Exp(Box<Node>),
    Log(Box<Node>),
}

/// A parsed (or programmatically built) expression in the variable `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
}

impl Expression {
    pub fn new(root: Node) -> Self {
        Expression { root }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn var() -> Self {
        Expression::new(Node::Var)
    }

    pub fn constant(c: f64) -> Self {
        Expression::new(Node::Const(c))
    }

    pub fn add(self, rhs: Expression) -> Self {
        Expression::new(Node::Add(Box::new(self.root), Box::new(rhs.root)))
    }

    pub fn sub(self, rhs: Expression) -> Self {
        Expression::new(Node::Sub(Box::new(self.root), Box::new(rhs.root)))
    }

    pub fn mul(self, rhs: Expression) -> Self {
        Expression::new(Node::Mul(Box::new(self.root), Box::new(rhs.root)))
    }

    pub fn div(self, rhs: Expression) -> Self {
        Expression::new(Node::Div(Box::new(self.root), Box::new(rhs.root)))
    }

    pub fn pow(self, exponent: f64) -> Self {
        Expression::new(Node::Pow(Box::new(self.root), exponent))
    }

    pub fn exp(self) -> Self {
        Expression::new(Node::Exp(Box::new(self.root)))
    }

    pub fn log(self) -> Self {
        Expression::new(Node::Log(Box::new(self.root)))
    }

    /// Evaluate the expression value (order-0 jet).
    pub fn value(&self, s: f64) -> Result<f64, EvalError> {
        Ok(eval_jet(self, s, 0)?.value())
    }
}

// Operator precedence used by the canonical printer. Negative constants get
// the lowest level so they always come out parenthesized in operand position.
fn prec(node: &Node) -> u8 {
    match node {
        Node::Const(c) if *c < 0.0 => 0,
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Pow(..) => 3,
        _ => 4,
    }
}

fn print(node: &Node, min_prec: u8, out: &mut String) {
    let p = prec(node);
    let need_parens = p < min_prec;
    if need_parens {
        out.push('(');
    }
    match node {
        Node::Const(c) => out.push_str(&format!("{c}")),
        Node::Var => out.push('s'),
        Node::Add(l, r) => {
            print(l, 1, out);
            out.push('+');
            print(r, 2, out);
        }
        Node::Sub(l, r) => {
            print(l, 1, out);
            out.push('-');
            print(r, 2, out);
        }
        Node::Mul(l, r) => {
            print(l, 2, out);
            out.push('*');
            print(r, 3, out);
        }
        Node::Div(l, r) => {
            print(l, 2, out);
            out.push('/');
            print(r, 3, out);
        }
        Node::Pow(base, e) => {
            print(base, 4, out);
            out.push('^');
            out.push_str(&format!("{e}"));
        }
        Node::Exp(inner) => {
            out.push_str("exp(");
            print(inner, 0, out);
            out.push(')');
        }
        Node::Log(inner) => {
            out.push_str("log(");
            print(inner, 0, out);
            out.push(')');
        }
    }
    if need_parens {
        out.push(')');
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        print(&self.root, 0, &mut out);
        f.write_str(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printer_round_trips_simple_cases() {
        for src in [
            "s^2",
            "s^2-3*log(s)",
            "exp(s^2)",
            "s^2*log(s)^1.5",
            "(s+1)/(s-1)",
            "s^-3",
            "2e-3*s",
        ] {
            let e = parse(src).unwrap();
            let printed = e.to_string();
            let reparsed = parse(&printed).unwrap();
            assert_eq!(e, reparsed, "round trip failed for {src} -> {printed}");
        }
    }

    #[test]
    fn printer_parenthesizes_negative_constants() {
        let e = Expression::constant(5.0).sub(Expression::constant(-3.0));
        let printed = e.to_string();
        assert_eq!(parse(&printed).unwrap(), e);
    }

    #[test]
    fn pow_base_keeps_atom_shape() {
        let e = Expression::var().add(Expression::constant(1.0)).pow(2.0);
        let printed = e.to_string();
        assert_eq!(printed, "(s+1)^2");
        assert_eq!(parse(&printed).unwrap(), e);
    }
}
