//! Tail expansions of `F(s) = ∫_s^∞ e^{-a(τ)} dτ` and derived ratios.
//!
//! The sequence `a₁ = 1/a'`, `a_{n+1} = a_n'/a'` drives everything: four
//! integrations by parts give
//!
//! ```text
//! F(s)            = (a₁ + a₂ + a₃ + a₄(1 + o(1))) e^{-a(s)}
//! log F(s)        = -a - log a'            + O(a''/a'^2)
//! f(s)F(s)        = 1/a'                   (leading)
//! f'(s)F(s)       = 1 - a''/a'^2 + (3a''^2 - a'a''')/a'^4
//! f f'' F / f'    = 1 + (2a''^2 - a'a''')/a'^4
//! ```
//!
//! The `a_n` values are obtained by propagating the recursion through jet
//! arithmetic rather than by hand-expanded closed forms; the unit tests pin
//! the first members against the symbolic formulas and nested finite
//! differences.

use crate::error::Error;
use crate::expr::{eval_jet, Expression, Jet};

/// Tail-validity guard: the four-term series is only trusted where
/// `|a₂/a₁| ≤ TAIL_GUARD`. The onset of validity is not prescribed by the
/// underlying expansions, so this is a deliberately visible artifact choice.
pub const TAIL_GUARD: f64 = 0.25;

/// Values `a₁(s) .. a₅(s)` of the integration-by-parts sequence.
pub fn a_sequence(a: &Expression, s: f64) -> Result<[f64; 5], Error> {
    let jet = eval_jet(a, s, 5)?;
    Ok(a_sequence_from_jet(&jet)?)
}

/// Same, from a precomputed order-5 (or higher) jet of `a`.
pub fn a_sequence_from_jet(jet: &Jet) -> Result<[f64; 5], crate::expr::EvalError> {
    assert!(jet.order() >= 5, "order-5 jet required for a1..a5");
    let ap = jet.derivative(); // jet of a', order >= 4
    // a1 = 1/a' as a jet of order 4, then each step divides the derivative
    // by a' and loses one order.
    let mut ones = vec![0.0; ap.order() + 1];
    ones[0] = 1.0;
    let one_jet = Jet::from_derivatives(ones);
    let mut current = one_jet.div(&ap)?; // a1, order 4
    let mut out = [0.0; 5];
    out[0] = current.value();
    for slot in out.iter_mut().skip(1) {
        current = current.derivative().div(&ap)?;
        *slot = current.value();
    }
    Ok(out)
}

/// Four-term tail sum with a heuristic error majorant, in units of
/// `e^{-a(s)}` (the exponential factor is left to the caller so the result
/// stays representable for arbitrarily large `a`).
#[derive(Debug, Clone, Copy)]
pub struct TailSum {
    /// `a₁ + a₂ + a₃ + a₄` at `s`.
    pub sum: f64,
    /// Error majorant for `sum`: twice the first omitted term.
    pub err: f64,
    /// `a(s)`.
    pub a: f64,
    /// `|a₂/a₁|`, the guard ratio.
    pub guard: f64,
}

pub fn tail_sum(a: &Expression, s: f64) -> Result<TailSum, Error> {
    let jet = eval_jet(a, s, 5)?;
    tail_sum_from_jet(&jet, s)
}

pub fn tail_sum_from_jet(jet: &Jet, s: f64) -> Result<TailSum, Error> {
    if jet.deriv(1) <= 0.0 {
        return Err(Error::OutOfRange(format!(
            "a'(s) = {} not positive at s = {s}",
            jet.deriv(1)
        )));
    }
    let an = a_sequence_from_jet(jet)?;
    let guard = (an[1] / an[0]).abs();
    let sum = an[0] + an[1] + an[2] + an[3];
    let err = if an[3] != 0.0 {
        2.0 * an[4].abs()
    } else {
        an[3].abs()
    };
    Ok(TailSum {
        sum,
        err,
        a: jet.value(),
        guard,
    })
}

/// `F(s)` by the four-term tail alone, with its error majorant.
/// Fails when the guard `|a₂/a₁| ≤ 0.25` is violated; quadrature must then
/// be carried further out before switching to the tail.
pub fn f_tail(a: &Expression, s: f64) -> Result<(f64, f64), Error> {
    let t = tail_sum(a, s)?;
    if t.guard > TAIL_GUARD {
        return Err(Error::TailGuard {
            s,
            ratio: t.guard,
            limit: TAIL_GUARD,
        });
    }
    let scale = (-t.a).exp();
    Ok((t.sum * scale, t.err * scale))
}

/// The four expansion values at `s`, truncated exactly as documented in the
/// module header.
#[derive(Debug, Clone, Copy)]
pub struct ExpansionRatios {
    pub log_f: f64,
    pub ff: f64,
    pub fp_f: f64,
    pub ffpp_f_over_fp: f64,
}

pub fn expansion_ratios(a: &Expression, s: f64) -> Result<ExpansionRatios, Error> {
    let jet = eval_jet(a, s, 5)?;
    let t = tail_sum_from_jet(&jet, s)?;
    if t.guard > TAIL_GUARD {
        return Err(Error::TailGuard {
            s,
            ratio: t.guard,
            limit: TAIL_GUARD,
        });
    }
    let a0 = jet.value();
    let ap = jet.deriv(1);
    let app = jet.deriv(2);
    let appp = jet.deriv(3);
    let ap2 = ap * ap;
    let ap4 = ap2 * ap2;
    Ok(ExpansionRatios {
        log_f: -a0 - ap.ln(),
        ff: 1.0 / ap,
        fp_f: 1.0 - app / ap2 + (3.0 * app * app - ap * appp) / ap4,
        ffpp_f_over_fp: 1.0 + (2.0 * app * app - ap * appp) / ap4,
    })
}

/// Series-based functionals used by the classifier in the regime where
/// quadrature would either underflow or lose the small quantities
/// `1 - f'F` and `f f''F/f' - 1` to cancellation. All terms are ratios of
/// the `a_n`, so nothing here exponentiates `a`.
#[derive(Debug, Clone, Copy)]
pub struct SeriesFunctionals {
    pub a: f64,
    pub a_prime: f64,
    /// `a₁ .. a₅`.
    pub an: [f64; 5],
    /// `f F = a₁ + a₂ + a₃ + a₄`.
    pub ff: f64,
    /// `1 - f'F = -(a₂ + a₃ + a₄)/a₁`, formed without cancellation.
    pub one_minus_fpf: f64,
    /// `f f''F/f' - 1 = (r₃ + r₄) - r₂(r₂ + r₃ + r₄)` with `r_k = a_k/a₁`.
    pub d_second: f64,
    /// `-log F = a + log a' - log1p(r₂ + r₃ + r₄)`.
    pub neg_log_f: f64,
    /// `|a₂/a₁|`.
    pub guard: f64,
    /// Relative error majorant of the four-term series, `2|a₅|/|fF|`.
    pub err_rel: f64,
}

pub fn series_functionals(a: &Expression, s: f64) -> Result<SeriesFunctionals, Error> {
    let jet = eval_jet(a, s, 5)?;
    series_functionals_from_jet(&jet, s)
}

pub fn series_functionals_from_jet(jet: &Jet, s: f64) -> Result<SeriesFunctionals, Error> {
    if jet.deriv(1) <= 0.0 {
        return Err(Error::OutOfRange(format!(
            "a'(s) = {} not positive at s = {s}",
            jet.deriv(1)
        )));
    }
    let an = a_sequence_from_jet(jet)?;
    let r2 = an[1] / an[0];
    let r3 = an[2] / an[0];
    let r4 = an[3] / an[0];
    let ff = an[0] * (1.0 + r2 + r3 + r4);
    let one_minus_fpf = -(r2 + r3 + r4);
    let d_second = (r3 + r4) - r2 * (r2 + r3 + r4);
    let neg_log_f = jet.value() + jet.deriv(1).ln() - (r2 + r3 + r4).ln_1p();
    Ok(SeriesFunctionals {
        a: jet.value(),
        a_prime: jet.deriv(1),
        an,
        ff,
        one_minus_fpf,
        d_second,
        neg_log_f,
        guard: r2.abs(),
        err_rel: 2.0 * an[4].abs() / ff.abs().max(f64::MIN_POSITIVE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use approx::assert_relative_eq;

    #[test]
    fn a_sequence_matches_symbolic_closed_forms_for_square() {
        // a = s^2: a1 = 1/(2s), a2 = -1/(4 s^3), a3 = 3/(8 s^5),
        // a4 = -15/(16 s^7), a5 = 105/(32 s^9).
        let a = parse("s^2").unwrap();
        let s = 2.0f64;
        let an = a_sequence(&a, s).unwrap();
        assert_relative_eq!(an[0], 0.25, epsilon = 1e-15);
        assert_relative_eq!(an[1], -0.03125, epsilon = 1e-15);
        assert_relative_eq!(an[2], 0.01171875, epsilon = 1e-15);
        assert_relative_eq!(an[3], -15.0 / (16.0 * s.powi(7)), epsilon = 1e-15);
        assert_relative_eq!(an[4], 105.0 / (32.0 * s.powi(9)), epsilon = 1e-15);
    }

    #[test]
    fn a_sequence_for_linear_exponent_vanishes() {
        let a = parse("s").unwrap();
        for s in [0.5, 3.0, 40.0] {
            let an = a_sequence(&a, s).unwrap();
            assert_eq!(an, [1.0, 0.0, 0.0, 0.0, 0.0]);
        }
    }

    /// Nested finite-difference oracle for the recursion itself: a_{n+1} is
    /// approximated by differencing a_n numerically, never through jets.
    fn a_seq_fd(f: &impl Fn(f64) -> f64, s: f64) -> [f64; 3] {
        let h = 1e-4 * s.max(1.0);
        let d1 = |g: &dyn Fn(f64) -> f64, x: f64| (g(x + h) - g(x - h)) / (2.0 * h);
        let ap = |x: f64| d1(f, x);
        let a1 = |x: f64| 1.0 / ap(x);
        let a2 = |x: f64| d1(&a1, x) / ap(x);
        let a3 = |x: f64| d1(&a2, x) / ap(x);
        [a1(s), a2(s), a3(s)]
    }

    #[test]
    fn a_sequence_matches_nested_fd_for_double_exponential() {
        let a = parse("exp(s)").unwrap();
        let s = 3.0;
        let an = a_sequence(&a, s).unwrap();
        let fd = a_seq_fd(&|x: f64| x.exp(), s);
        for k in 0..3 {
            assert_relative_eq!(an[k], fd[k], max_relative = 1e-6);
        }
    }

    #[test]
    fn f_tail_exact_for_pure_exponential() {
        let a = parse("s").unwrap();
        let (v, e) = f_tail(&a, 10.0).unwrap();
        assert_relative_eq!(v, (-10.0f64).exp(), epsilon = 1e-18);
        assert_eq!(e, 0.0);
    }

    #[test]
    fn f_tail_brackets_model_transform() {
        // f = s^{-3} e^{s^2} has the closed form F(s) = (s^2+1) e^{-s^2} / 2.
        let a = parse("s^2 - 3*log(s)").unwrap();
        let s = 3.0f64;
        let (v, e) = f_tail(&a, s).unwrap();
        let exact = 0.5 * (s * s + 1.0) * (-s * s).exp();
        assert!(
            (v - exact).abs() <= e,
            "tail {v:.6e} misses exact {exact:.6e} by more than the estimate {e:.3e}"
        );
    }

    #[test]
    fn f_tail_guard_rejects_small_s() {
        let a = parse("s^2 - 3*log(s)").unwrap();
        // Near the zero of a' the ratio a2/a1 blows up.
        assert!(matches!(
            f_tail(&a, 1.3),
            Err(Error::TailGuard { .. })
        ));
    }

    #[test]
    fn expansion_ratios_for_square_exponent() {
        // a = s^2 at s = 5: f'F = 1 - 0.02 + 0.0012.
        let a = parse("s^2").unwrap();
        let r = expansion_ratios(&a, 5.0).unwrap();
        assert_relative_eq!(r.fp_f, 1.0 - 0.02 + 0.0012, epsilon = 1e-15);
        assert_relative_eq!(r.ff, 0.1, epsilon = 1e-15);
        assert_relative_eq!(r.log_f, -25.0 - 10f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn expansion_ratios_linear_exponent_trivial() {
        let a = parse("s").unwrap();
        let s = 7.0;
        let r = expansion_ratios(&a, s).unwrap();
        assert_eq!(r.log_f, -s);
        assert_eq!(r.ff, 1.0);
        assert_eq!(r.fp_f, 1.0);
        assert_eq!(r.ffpp_f_over_fp, 1.0);
    }

    #[test]
    fn ratio_hypothesis_decays_for_builtin_families() {
        // |a_{n+1}/a_n| -> 0 monotonically for s >= 10.
        for src in ["s^2 + log(s)", "s^2 + s", "s^2*log(s)", "exp(s)"] {
            let a = parse(src).unwrap();
            let mut prev = [f64::INFINITY; 4];
            for s in [10.0, 20.0, 40.0, 80.0] {
                let an = a_sequence(&a, s).unwrap();
                for n in 0..4 {
                    let ratio = (an[n + 1] / an[n]).abs();
                    assert!(
                        ratio < prev[n] + 1e-12,
                        "{src}: ratio a{}/a{} not decreasing at s = {s}",
                        n + 2,
                        n + 1
                    );
                    prev[n] = ratio;
                }
            }
        }
    }
}
