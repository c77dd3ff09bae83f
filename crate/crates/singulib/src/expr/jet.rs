//! Truncated-Taylor (jet) evaluation of expressions.
//!
//! A [`Jet`] holds raw derivative values `d⁰..d^order` of a function at a
//! point. Propagation happens on Taylor coefficients internally (the
//! factorial conversions are not the caller's problem) with the classical
//! recurrences for products, quotients, `exp`, `log` and real powers.

use super::{Expression, Node};
use thiserror::Error;

/// Largest jet order accepted by [`eval_jet`].
pub const MAX_ORDER: usize = 8;

const EXP_OVERFLOW: f64 = 709.782712893384;

#[derive(Debug, Clone, PartialEq)]
pub enum EvalErrorKind {
    LogNonPositive { arg: f64 },
    DivisionByZero,
    PowDomain { base: f64, exponent: f64 },
    Overflow,
    OrderTooLarge { requested: usize },
}

impl std::fmt::Display for EvalErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalErrorKind::LogNonPositive { arg } => {
                write!(f, "log of non-positive value {arg}")
            }
            EvalErrorKind::DivisionByZero => write!(f, "division by zero"),
            EvalErrorKind::PowDomain { base, exponent } => {
                write!(f, "power {base}^{exponent} outside the real domain")
            }
            EvalErrorKind::Overflow => write!(f, "overflow"),
            EvalErrorKind::OrderTooLarge { requested } => {
                write!(f, "jet order {requested} exceeds the maximum {MAX_ORDER}")
            }
        }
    }
}

/// Evaluation failure carrying the cause and the offending subexpression.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("evaluation of `{expr}` at s = {at} failed: {kind}")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub expr: String,
    pub at: f64,
}

/// Derivative values `d⁰..d^order` of a scalar function at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn from_derivatives(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty());
        Jet { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// The function value (0th derivative).
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// The k-th derivative value.
    pub fn deriv(&self, k: usize) -> f64 {
        self.coeffs[k]
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.coeffs
    }

    /// Jet of the derivative function, one order lower.
    pub fn derivative(&self) -> Jet {
        assert!(self.order() >= 1, "cannot differentiate an order-0 jet");
        Jet {
            coeffs: self.coeffs[1..].to_vec(),
        }
    }

    /// Quotient of two jets, truncated to the smaller order.
    pub fn div(&self, rhs: &Jet) -> Result<Jet, EvalError> {
        let order = self.order().min(rhs.order());
        let a = Series::from_derivs(&self.coeffs[..=order]);
        let b = Series::from_derivs(&rhs.coeffs[..=order]);
        let q = a.div(&b).map_err(|kind| EvalError {
            kind,
            expr: "<jet quotient>".into(),
            at: f64::NAN,
        })?;
        Ok(Jet {
            coeffs: q.to_derivs(),
        })
    }
}

/// Evaluate `expr` and its derivatives up to `order` at the point `s`.
pub fn eval_jet(expr: &Expression, s: f64, order: usize) -> Result<Jet, EvalError> {
    if order > MAX_ORDER {
        return Err(EvalError {
            kind: EvalErrorKind::OrderTooLarge { requested: order },
            expr: expr.to_string(),
            at: s,
        });
    }
    let series = eval_node(expr.root(), s, order)?;
    let jet = Jet {
        coeffs: series.to_derivs(),
    };
    if jet.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(EvalError {
            kind: EvalErrorKind::Overflow,
            expr: expr.to_string(),
            at: s,
        });
    }
    Ok(jet)
}

fn eval_node(node: &Node, s: f64, order: usize) -> Result<Series, EvalError> {
    let fail = |kind: EvalErrorKind| EvalError {
        kind,
        expr: {
            let mut out = String::new();
            super::print(node, 0, &mut out);
            out
        },
        at: s,
    };
    match node {
        Node::Const(c) => Ok(Series::constant(*c, order)),
        Node::Var => Ok(Series::variable(s, order)),
        Node::Add(l, r) => Ok(eval_node(l, s, order)?.add(&eval_node(r, s, order)?)),
        Node::Sub(l, r) => Ok(eval_node(l, s, order)?.sub(&eval_node(r, s, order)?)),
        Node::Mul(l, r) => Ok(eval_node(l, s, order)?.mul(&eval_node(r, s, order)?)),
        Node::Div(l, r) => eval_node(l, s, order)?
            .div(&eval_node(r, s, order)?)
            .map_err(fail),
        Node::Pow(base, e) => eval_node(base, s, order)?.powc(*e).map_err(fail),
        Node::Exp(inner) => eval_node(inner, s, order)?.exp().map_err(fail),
        Node::Log(inner) => eval_node(inner, s, order)?.ln().map_err(fail),
    }
}

/// Truncated Taylor series: coefficients `c_k = d_k / k!`.
#[derive(Debug, Clone)]
struct Series(Vec<f64>);

impl Series {
    fn constant(c: f64, order: usize) -> Series {
        let mut v = vec![0.0; order + 1];
        v[0] = c;
        Series(v)
    }

    fn variable(s: f64, order: usize) -> Series {
        let mut v = vec![0.0; order + 1];
        v[0] = s;
        if order >= 1 {
            v[1] = 1.0;
        }
        Series(v)
    }

    fn from_derivs(d: &[f64]) -> Series {
        let mut fact = 1.0;
        Series(
            d.iter()
                .enumerate()
                .map(|(k, v)| {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    v / fact
                })
                .collect(),
        )
    }

    fn to_derivs(&self) -> Vec<f64> {
        let mut fact = 1.0;
        self.0
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k > 0 {
                    fact *= k as f64;
                }
                c * fact
            })
            .collect()
    }

    fn order(&self) -> usize {
        self.0.len() - 1
    }

    fn add(&self, rhs: &Series) -> Series {
        Series(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }

    fn sub(&self, rhs: &Series) -> Series {
        Series(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }

    fn mul(&self, rhs: &Series) -> Series {
        let n = self.order();
        let mut out = vec![0.0; n + 1];
        for k in 0..=n {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += self.0[j] * rhs.0[k - j];
            }
            out[k] = acc;
        }
        Series(out)
    }

    fn div(&self, rhs: &Series) -> Result<Series, EvalErrorKind> {
        if rhs.0[0] == 0.0 {
            return Err(EvalErrorKind::DivisionByZero);
        }
        let n = self.order();
        let mut out = vec![0.0; n + 1];
        for k in 0..=n {
            let mut acc = self.0[k];
            for j in 0..k {
                acc -= out[j] * rhs.0[k - j];
            }
            out[k] = acc / rhs.0[0];
        }
        Ok(Series(out))
    }

    fn exp(&self) -> Result<Series, EvalErrorKind> {
        if self.0[0] > EXP_OVERFLOW {
            return Err(EvalErrorKind::Overflow);
        }
        let n = self.order();
        let mut out = vec![0.0; n + 1];
        out[0] = self.0[0].exp();
        for k in 1..=n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (j as f64) * self.0[j] * out[k - j];
            }
            out[k] = acc / k as f64;
        }
        Ok(Series(out))
    }

    fn ln(&self) -> Result<Series, EvalErrorKind> {
        if self.0[0] <= 0.0 {
            return Err(EvalErrorKind::LogNonPositive { arg: self.0[0] });
        }
        let n = self.order();
        let mut out = vec![0.0; n + 1];
        out[0] = self.0[0].ln();
        for k in 1..=n {
            let mut acc = self.0[k];
            for j in 1..k {
                acc -= (j as f64 / k as f64) * out[j] * self.0[k - j];
            }
            out[k] = acc / self.0[0];
        }
        Ok(Series(out))
    }

    fn powc(&self, p: f64) -> Result<Series, EvalErrorKind> {
        let a0 = self.0[0];
        if p == 0.0 {
            return Ok(Series::constant(1.0, self.order()));
        }
        if a0 == 0.0 || (a0 < 0.0 && p.fract() != 0.0) {
            return Err(EvalErrorKind::PowDomain {
                base: a0,
                exponent: p,
            });
        }
        if a0 < 0.0 {
            // Integer exponent: route through (-f)^p with a sign flip.
            let neg = Series(self.0.iter().map(|c| -c).collect());
            let pos = neg.powc_positive(p);
            let sign = if (p as i64) % 2 == 0 { 1.0 } else { -1.0 };
            return Ok(Series(pos.0.iter().map(|c| sign * c).collect()));
        }
        Ok(self.powc_positive(p))
    }

    /// Power recurrence for a series with positive constant term:
    /// `k a0 h_k = Σ_{j=1..k} (p j - (k - j)) a_j h_{k-j}`.
    fn powc_positive(&self, p: f64) -> Series {
        let n = self.order();
        let a0 = self.0[0];
        let mut out = vec![0.0; n + 1];
        out[0] = a0.powf(p);
        for k in 1..=n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (p * j as f64 - (k - j) as f64) * self.0[j] * out[k - j];
            }
            out[k] = acc / (k as f64 * a0);
        }
        Series(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_derivatives_are_exact() {
        let e = parse("s^2").unwrap();
        let j = eval_jet(&e, 2.0, 2).unwrap();
        assert_eq!(j.derivatives(), &[4.0, 4.0, 2.0]);
    }

    #[test]
    fn exp_jet_is_fixed_point() {
        let e = parse("exp(s)").unwrap();
        let j = eval_jet(&e, 1.0, 5).unwrap();
        for k in 0..=5 {
            assert_relative_eq!(j.deriv(k), std::f64::consts::E, max_relative = 1e-15);
        }
    }

    #[test]
    fn product_with_log_matches_closed_forms() {
        // a = s^2 log s: a' = 2s log s + s, a'' = 2 log s + 3,
        // a''' = 2/s, a'''' = -2/s^2.
        let e = parse("s^2*log(s)").unwrap();
        let s = 3.0f64;
        let j = eval_jet(&e, s, 4).unwrap();
        let ln = s.ln();
        assert_relative_eq!(j.deriv(0), s * s * ln, max_relative = 1e-14);
        assert_relative_eq!(j.deriv(1), 2.0 * s * ln + s, max_relative = 1e-14);
        assert_relative_eq!(j.deriv(2), 2.0 * ln + 3.0, max_relative = 1e-14);
        assert_relative_eq!(j.deriv(3), 2.0 / s, max_relative = 1e-14);
        assert_relative_eq!(j.deriv(4), -2.0 / (s * s), max_relative = 1e-14);
    }

    /// Independent oracle: wide central finite-difference stencil applied to
    /// the closed form, never to the jet path.
    fn fd_oracle(f: impl Fn(f64) -> f64, s: f64, k: usize, h: f64) -> f64 {
        let xs: Vec<f64> = (-5i32..=5).map(|i| s + i as f64 * h).collect();
        let w = crate::numerics::stencil::fd_weights(s, &xs, k);
        w.iter().zip(&xs).map(|(wi, &x)| wi * f(x)).sum()
    }

    #[test]
    fn finite_difference_oracle_s2_log_s() {
        let e = parse("s^2*log(s)").unwrap();
        let s = 3.0;
        let j = eval_jet(&e, s, 4).unwrap();
        let f = |x: f64| x * x * x.ln();
        // Step sizes balance truncation against the eps/h^k round-off of
        // high-order differences.
        let steps = [1e-2, 1e-2, 2e-2, 6e-2, 1e-1];
        for k in 0..=4 {
            let oracle = fd_oracle(f, s, k, steps[k]);
            assert_relative_eq!(j.deriv(k), oracle, max_relative = 1e-7);
        }
    }

    #[test]
    fn log_of_nonpositive_is_an_error() {
        let e = parse("log(s)").unwrap();
        let err = eval_jet(&e, -1.0, 2).unwrap_err();
        assert!(matches!(err.kind, EvalErrorKind::LogNonPositive { .. }));
        assert_eq!(err.expr, "log(s)");
    }

    #[test]
    fn overflow_is_reported_not_silent() {
        let e = parse("exp(exp(s))").unwrap();
        let err = eval_jet(&e, 8.0, 2).unwrap_err();
        assert!(matches!(err.kind, EvalErrorKind::Overflow));
    }

    #[test]
    fn division_by_zero_is_reported() {
        let e = parse("1/(s-2)").unwrap();
        let err = eval_jet(&e, 2.0, 1).unwrap_err();
        assert!(matches!(err.kind, EvalErrorKind::DivisionByZero));
    }

    #[test]
    fn order_cap_enforced() {
        let e = parse("s").unwrap();
        assert!(eval_jet(&e, 1.0, 9).is_err());
    }

    #[test]
    fn jet_quotient_and_derivative() {
        // (s^3)' / s^3 = 3/s with derivatives computed through jet ops.
        let e = parse("s^3").unwrap();
        let j = eval_jet(&e, 2.0, 4).unwrap();
        let q = j.derivative().div(&j).unwrap();
        assert_relative_eq!(q.value(), 1.5, max_relative = 1e-14);
        assert_relative_eq!(q.deriv(1), -0.75, max_relative = 1e-14);
    }
}
