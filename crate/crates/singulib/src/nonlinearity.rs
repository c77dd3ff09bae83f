//! Nonlinearities `f(s) = e^{a(s)}` and the transform
//! `F(s) = ∫_s^∞ dτ/f(τ)` with certified accuracy and inversion.
//!
//! Built-in families synthesize their exponent function `a(s)`; a custom
//! family takes `a` as expression text. Everything downstream only sees `a`
//! through jets, so overflow-prone quantities (`f`, `F`) are formed in log
//! space: the quadrature below computes `J(s) = e^{a(s)} F(s)` directly,
//! which stays O(1/a'(s)) no matter how violently `f` grows.

use crate::asymptotics::{self, SeriesFunctionals, TAIL_GUARD};
use crate::error::Error;
use crate::expr::{eval_jet, parse, Expression, Jet};
use crate::numerics::{quad, roots};
use crate::Result;
use serde::{Deserialize, Serialize};

/// JSON-facing family description. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    /// `f(s) = s^r e^{s^q}`, `q > 1`, `r` real.
    PowerExp {
        q: f64,
        r: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s0: Option<f64>,
    },
    /// `f(s) = e^{s^q + s^r}`, `q > 1`, `q/2 > r > 0` intended.
    SumExp {
        q: f64,
        r: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s0: Option<f64>,
    },
    /// `f(s) = e^{s^q (log s)^r}`, `q > 1`, `r` real.
    LogExp {
        q: f64,
        r: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s0: Option<f64>,
    },
    /// `f(s) = e^{e^{s^q}}`, `q >= 1`.
    IterExp {
        q: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s0: Option<f64>,
    },
    /// The explicitly solvable model nonlinearity for growth exponent `B`.
    Model {
        #[serde(rename = "B")]
        b: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s0: Option<f64>,
    },
    /// Custom exponent function text; `s0` is required.
    Custom {
        a: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s0: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    PowerExp { q: f64, r: f64 },
    SumExp { q: f64, r: f64 },
    LogExp { q: f64, r: f64 },
    IterExp { q: f64 },
    Model { b: f64 },
    Custom,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::PowerExp { .. } => "power_exp",
            Family::SumExp { .. } => "sum_exp",
            Family::LogExp { .. } => "log_exp",
            Family::IterExp { .. } => "iter_exp",
            Family::Model { .. } => "model",
            Family::Custom => "custom",
        }
    }
}

/// A nonlinearity `f = e^{a(s)}` on `(s0, ∞)` satisfying `f > 0`, `f' > 0`.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    family: Family,
    a: Expression,
    s0: f64,
    flags: Vec<String>,
    spec: NonlinearitySpec,
}

impl Nonlinearity {
    pub fn make(spec: &NonlinearitySpec) -> Result<Nonlinearity> {
        let (family, a, default_s0, mut flags) = synthesize(spec)?;
        let s0 = match spec_s0(spec) {
            Some(user) => {
                if user <= 0.0 || !user.is_finite() {
                    return Err(Error::InvalidParams(format!("s0 = {user} must be positive")));
                }
                user
            }
            None => default_s0.ok_or_else(|| {
                Error::InvalidParams("custom nonlinearity requires s0".into())
            })?,
        };
        let nl = Nonlinearity {
            family,
            a,
            s0,
            flags: Vec::new(),
            spec: spec.clone(),
        };
        nl.spot_check(&mut flags)?;
        Ok(Nonlinearity { flags, ..nl })
    }

    /// Spot-check positivity and monotonicity of `f` on a log-spaced grid
    /// above `s0`.
    fn spot_check(&self, flags: &mut Vec<String>) -> Result<()> {
        let lo = self.s0 * 1.0001 + 1e-12;
        let hi = (self.s0 * 1e3).max(60.0);
        let n = 48;
        for k in 0..n {
            let s = lo * (hi / lo).powf(k as f64 / (n - 1) as f64);
            let jet = match self.a_jet(s, 1) {
                Ok(j) => j,
                Err(Error::Eval(e))
                    if matches!(e.kind, crate::expr::EvalErrorKind::Overflow) =>
                {
                    // f itself may overflow f64 far out; only the exponent
                    // matters and it was finite below this point.
                    break;
                }
                Err(e) => return Err(e),
            };
            if jet.deriv(1) <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "f'(s) <= 0 at s = {s:.6}; increase s0 (currently {})",
                    self.s0
                )));
            }
        }
        if let Family::SumExp { q, r } = self.family {
            if !(r > 0.0 && 2.0 * r < q) {
                flags.push(format!(
                    "sum_exp parameters (q={q}, r={r}) outside the intended range q/2 > r > 0; \
                     decay of the deviation functions is not guaranteed"
                ));
            }
        }
        Ok(())
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn spec(&self) -> &NonlinearitySpec {
        &self.spec
    }

    pub fn a(&self) -> &Expression {
        &self.a
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn flags(&self) -> &[String] {
        &self.flags
    }

    /// `B` parameter when this is the model family.
    pub fn model_b(&self) -> Option<f64> {
        match self.family {
            Family::Model { b } => Some(b),
            _ => None,
        }
    }

    pub fn a_jet(&self, s: f64, order: usize) -> Result<Jet> {
        Ok(eval_jet(&self.a, s, order)?)
    }

    pub fn a_value(&self, s: f64) -> Result<f64> {
        Ok(eval_jet(&self.a, s, 0)?.value())
    }

    pub fn a_prime(&self, s: f64) -> Result<f64> {
        Ok(eval_jet(&self.a, s, 1)?.deriv(1))
    }

    /// `log f(s) = a(s)`.
    pub fn log_f(&self, s: f64) -> Result<f64> {
        self.a_value(s)
    }

    /// `f(s)`, failing on f64 overflow rather than returning infinity.
    pub fn f(&self, s: f64) -> Result<f64> {
        let a = self.a_value(s)?;
        if a > 709.0 {
            return Err(Error::Underflow { log_value: a });
        }
        Ok(a.exp())
    }

    /// `(f, f', f'')` at `s` for moderate arguments.
    pub fn f_parts(&self, s: f64) -> Result<(f64, f64, f64)> {
        let jet = self.a_jet(s, 2)?;
        if jet.value() > 700.0 {
            return Err(Error::Underflow {
                log_value: jet.value(),
            });
        }
        let f = jet.value().exp();
        let ap = jet.deriv(1);
        let app = jet.deriv(2);
        Ok((f, ap * f, (app + ap * ap) * f))
    }
}

fn spec_s0(spec: &NonlinearitySpec) -> Option<f64> {
    match spec {
        NonlinearitySpec::PowerExp { s0, .. }
        | NonlinearitySpec::SumExp { s0, .. }
        | NonlinearitySpec::LogExp { s0, .. }
        | NonlinearitySpec::IterExp { s0, .. }
        | NonlinearitySpec::Model { s0, .. }
        | NonlinearitySpec::Custom { s0, .. } => *s0,
    }
}

type Synthesized = (Family, Expression, Option<f64>, Vec<String>);

fn synthesize(spec: &NonlinearitySpec) -> Result<Synthesized> {
    use Expression as E;
    let var = E::var;
    match spec {
        NonlinearitySpec::PowerExp { q, r, .. } => {
            if !(*q > 1.0) {
                return Err(Error::InvalidParams(format!("power_exp requires q > 1 (got {q})")));
            }
            let a = if *r == 0.0 {
                var().pow(*q)
            } else {
                var().pow(*q).add(E::constant(*r).mul(var().log()))
            };
            let s0 = if *r >= 0.0 {
                0.5
            } else {
                1.05 * (-r / q).powf(1.0 / q)
            };
            Ok((Family::PowerExp { q: *q, r: *r }, a, Some(s0), vec![]))
        }
        NonlinearitySpec::SumExp { q, r, .. } => {
            if !(*q > 1.0) {
                return Err(Error::InvalidParams(format!("sum_exp requires q > 1 (got {q})")));
            }
            if *r == 0.0 {
                return Err(Error::InvalidParams("sum_exp requires r != 0".into()));
            }
            let a = var().pow(*q).add(var().pow(*r));
            let s0 = if *r > 0.0 {
                0.25
            } else {
                1.05 * (-r / q).powf(1.0 / (q - r))
            };
            Ok((Family::SumExp { q: *q, r: *r }, a, Some(s0), vec![]))
        }
        NonlinearitySpec::LogExp { q, r, .. } => {
            if !(*q > 1.0) {
                return Err(Error::InvalidParams(format!("log_exp requires q > 1 (got {q})")));
            }
            let a = if *r == 0.0 {
                var().pow(*q)
            } else {
                var().pow(*q).mul(var().log().pow(*r))
            };
            let s0 = (1.05f64).max(1.05 * (-r / q).exp());
            Ok((Family::LogExp { q: *q, r: *r }, a, Some(s0), vec![]))
        }
        NonlinearitySpec::IterExp { q, .. } => {
            if !(*q >= 1.0) {
                return Err(Error::InvalidParams(format!("iter_exp requires q >= 1 (got {q})")));
            }
            let a = if *q == 1.0 {
                var().exp()
            } else {
                var().pow(*q).exp()
            };
            Ok((Family::IterExp { q: *q }, a, Some(0.25), vec![]))
        }
        NonlinearitySpec::Model { b, .. } => {
            if !(*b >= 1.0) {
                return Err(Error::InvalidParams(format!("model requires B >= 1 (got {b})")));
            }
            if (*b - 1.0).abs() <= 1e-8 {
                // Doubly exponential branch: a(s) = e^s - 2s + log 4.
                let a = var()
                    .exp()
                    .sub(E::constant(2.0).mul(var()))
                    .add(E::constant(4.0f64.ln()));
                let s0 = 1.1 * 2.0f64.ln();
                return Ok((Family::Model { b: 1.0 }, a, Some(s0), vec![]));
            }
            // a(s) = s^{B'} + (1 - 2B') log s + log(4/(B B')).
            let bp = b / (b - 1.0);
            let a = var()
                .pow(bp)
                .add(E::constant(1.0 - 2.0 * bp).mul(var().log()))
                .add(E::constant((4.0 / (b * bp)).ln()));
            let s0 = 1.05 * ((2.0 * bp - 1.0) / bp).powf(1.0 / bp);
            Ok((Family::Model { b: *b }, a, Some(s0), vec![]))
        }
        NonlinearitySpec::Custom { a, .. } => {
            let a = parse(a)?;
            Ok((Family::Custom, a, None, vec![]))
        }
    }
}

/// The transform `F` of a nonlinearity with quadrature, tail switching and
/// monotone inversion. Immutable after construction; every method is a pure
/// evaluation.
#[derive(Debug, Clone)]
pub struct TransformF {
    nl: Nonlinearity,
    /// Relative quadrature tolerance for `J = e^{a} F`.
    pub rel_tol: f64,
    /// Relative tolerance of the inversion (`|F(s) - w| <= inv_rel_tol * w`).
    pub inv_rel_tol: f64,
    /// Budget for the switch-point march and bracket expansion.
    pub max_expansions: u32,
}

impl TransformF {
    pub fn new(nl: Nonlinearity) -> TransformF {
        TransformF {
            nl,
            rel_tol: 1e-12,
            inv_rel_tol: 1e-11,
            max_expansions: 400,
        }
    }

    pub fn nl(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn series(&self, s: f64) -> Result<SeriesFunctionals> {
        let jet = self.nl.a_jet(s, 5)?;
        asymptotics::series_functionals_from_jet(&jet, s)
    }

    /// `f(s) F(s)`: the four-term tail when certified, quadrature otherwise.
    pub fn ff(&self, s: f64) -> Result<f64> {
        if s <= self.nl.s0 {
            return Err(Error::OutOfRange(format!(
                "s = {s} not above the domain bound s0 = {}",
                self.nl.s0
            )));
        }
        let series = self.series(s)?;
        if series.guard <= TAIL_GUARD && series.err_rel <= 0.3 * self.rel_tol {
            return Ok(series.ff);
        }
        self.ff_quad(s)
    }

    /// Quadrature route for `J(s) = e^{a(s)} F(s)`:
    /// `J = ∫_s^{s*} e^{a(s) - a(τ)} dτ  +  (a₁+a₂+a₃+a₄)(s*) e^{a(s) - a(s*)}`.
    fn ff_quad(&self, s: f64) -> Result<f64> {
        let a_s = self.nl.a_value(s)?;
        let (s_star, tail) = self.switch_point(s, a_s)?;
        let nl = &self.nl;
        let quadrature = quad::integrate(
            |tau| Ok((a_s - nl.a_value(tau)?).exp()),
            s,
            s_star,
            f64::MIN_POSITIVE,
            0.25 * self.rel_tol,
        )?;
        let tail_value = tail.sum * (a_s - tail.a).exp();
        Ok(quadrature.value + tail_value)
    }

    /// Smallest march point beyond `s` where the four-term tail is certified
    /// to the quadrature tolerance (or entirely negligible).
    fn switch_point(&self, s: f64, a_s: f64) -> Result<(f64, asymptotics::TailSum)> {
        let ap = self.nl.a_prime(s)?.max(1e-8);
        let mut delta = (2.0 / ap).min(0.5 * s.max(1.0)).max(1e-3 * s.max(1.0));
        let mut tau = s;
        for _ in 0..self.max_expansions {
            tau += delta;
            delta *= 1.4;
            let jet = match self.nl.a_jet(tau, 5) {
                Ok(j) => j,
                // The exponent overflowing f64 means the tail beyond here is
                // zero to every representable digit.
                Err(Error::Eval(e))
                    if matches!(e.kind, crate::expr::EvalErrorKind::Overflow) =>
                {
                    continue;
                }
                Err(e) => return Err(e),
            };
            let tail = asymptotics::tail_sum_from_jet(&jet, tau)?;
            let weight = (a_s - tail.a).exp();
            let negligible = tail.sum.abs().max(tail.err) * weight
                <= 0.05 * self.rel_tol / ap.max(1.0);
            let certified =
                tail.guard <= TAIL_GUARD && tail.err * weight <= 0.25 * self.rel_tol / ap;
            if certified || negligible {
                return Ok((tau, tail));
            }
        }
        Err(Error::TailGuard {
            s,
            ratio: f64::NAN,
            limit: TAIL_GUARD,
        })
    }

    /// `log F(s)`, stable for any growth of `f`.
    pub fn log_f_of(&self, s: f64) -> Result<f64> {
        let j = self.ff(s)?;
        if j <= 0.0 {
            return Err(Error::Quadrature(format!("non-positive fF = {j} at s = {s}")));
        }
        Ok(j.ln() - self.nl.a_value(s)?)
    }

    /// `F(s)` as a value; errors when it underflows f64.
    pub fn f_of(&self, s: f64) -> Result<f64> {
        let lf = self.log_f_of(s)?;
        if lf < f64::MIN_POSITIVE.ln() {
            return Err(Error::Underflow { log_value: lf });
        }
        Ok(lf.exp())
    }

    /// `F^{-1}(w)` for `0 < w < F(s0+)`.
    pub fn f_inv(&self, w: f64) -> Result<f64> {
        if !(w > 0.0) {
            return Err(Error::OutOfRange(format!(
                "F^-1 argument w = {w} must be positive"
            )));
        }
        self.f_inv_log(w.ln())
    }

    /// `F^{-1}(e^{log_w})`: bracket expansion by doubling, then Brent on
    /// `log F(s) - log w` (monotone decreasing, simple root).
    pub fn f_inv_log(&self, log_w: f64) -> Result<f64> {
        let mut lo = self.nl.s0 * (1.0 + 1e-7) + 1e-12;
        let mut flo = self.log_f_of(lo)? - log_w;
        if flo <= 0.0 {
            return Err(Error::OutOfRange(format!(
                "w out of range: log w = {log_w:.6e} >= log F(s0+) = {:.6e}",
                flo + log_w
            )));
        }
        let mut hi = (2.0 * lo).max(lo + 1.0);
        let mut fhi = self.log_f_of(hi)? - log_w;
        let mut budget = self.max_expansions;
        while fhi > 0.0 {
            lo = hi;
            flo = fhi;
            hi *= 2.0;
            fhi = self.log_f_of(hi)? - log_w;
            budget -= 1;
            if budget == 0 {
                return Err(Error::BracketNotFound(format!(
                    "no s with log F(s) <= {log_w:.6e} up to s = {hi:.3e}"
                )));
            }
        }
        let (root, _) = roots::brent(
            |s| Ok(self.log_f_of(s)? - log_w),
            lo,
            hi,
            flo,
            fhi,
            0.0,
            self.inv_rel_tol,
            200,
        )?;
        Ok(root)
    }
}
