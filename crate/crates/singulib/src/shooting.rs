//! Outward extension of the constructed solution by shooting:
//!
//! ```text
//! -w'' - w'/r = f(w),   w(r0) = u(r0),   w'(r0) = u'(r0),
//! ```
//!
//! integrated with the adaptive Runge–Kutta pair until the first zero
//! crossing defines the Dirichlet radius `R`. The nonlinearity is defined on
//! `(s0, ∞)` only, so shooting needs a positive increasing C¹ extension on
//! `[0, s0]`; the default blends the exponent function with a parabola in
//! log space (a degenerate cubic Hermite chosen so monotonicity is
//! unconditional).

use crate::error::Error;
use crate::nonlinearity::Nonlinearity;
use crate::numerics::ode::{self, OdeOptions, Trajectory};
use crate::profile::{ProfileNode, RadialProfile, Segment};
use crate::Result;
use serde::{Deserialize, Serialize};

/// `f` on all of `[0, ∞)`: the native exponent above the anchor, the blended
/// exponent below it.
#[derive(Debug, Clone)]
pub struct ExtendedNonlinearity {
    nl: Nonlinearity,
    /// Blend anchor (just above `s0`).
    anchor: f64,
    /// Blend exponent `H(s) = h0 + h2 s²` on `[0, anchor]`.
    h0: f64,
    h2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtensionInfo {
    pub anchor: f64,
    pub log_f_at_zero: f64,
    pub blend: String,
}

impl ExtendedNonlinearity {
    pub fn new(nl: &Nonlinearity) -> Result<ExtendedNonlinearity> {
        let anchor = nl.s0() * (1.0 + 1e-9) + 1e-300;
        let a0 = nl.a_value(anchor)?;
        let ap0 = nl.a_prime(anchor)?;
        if ap0 <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "cannot extend: f'(s0) <= 0 at the anchor {anchor}"
            )));
        }
        // H(anchor) = a0, H'(anchor) = ap0, H'(0) = 0: H = h0 + h2 s².
        let h2 = 0.5 * ap0 / anchor;
        let h0 = a0 - 0.5 * ap0 * anchor;
        Ok(ExtendedNonlinearity {
            nl: nl.clone(),
            anchor,
            h0,
            h2,
        })
    }

    pub fn info(&self) -> ExtensionInfo {
        ExtensionInfo {
            anchor: self.anchor,
            log_f_at_zero: self.h0,
            blend: "quadratic exponent blend with matching value and slope".into(),
        }
    }

    pub fn nl(&self) -> &Nonlinearity {
        &self.nl
    }

    /// `f(s)` for any `s` (the blend region covers `s < anchor`).
    pub fn f(&self, s: f64) -> Result<f64> {
        let a = if s >= self.anchor {
            self.nl.a_value(s)?
        } else {
            self.h0 + self.h2 * s * s
        };
        if a > 709.0 {
            return Err(Error::Integration(format!(
                "f(w) overflows at w = {s}; the trajectory is blowing up"
            )));
        }
        Ok(a.exp())
    }
}

/// Integrate the radial equation outward from `(r0, u0, u0')` to `r_stop`.
pub fn integrate_radial(
    ext: &ExtendedNonlinearity,
    r0: f64,
    u0: f64,
    up0: f64,
    r_stop: f64,
    tol: f64,
) -> Result<Trajectory> {
    if !(r0 > 0.0) || !(u0 > 0.0) {
        return Err(Error::InvalidParams(format!(
            "shooting needs r0 > 0 and u0 > 0 (got r0 = {r0}, u0 = {u0})"
        )));
    }
    let opts = OdeOptions {
        rtol: tol,
        atol: tol * u0.abs().max(1.0) * 1e-2,
        ..Default::default()
    };
    let mut rhs = |r: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
        Ok([y[1], -y[1] / r - ext.f(y[0])?])
    };
    ode::integrate(&mut rhs, r0, [u0, up0], r_stop, &opts)
}

/// Locate the Dirichlet radius: the first `R > r0` with `w(R) = 0`. The
/// event tolerance is relative to `u0`; the crossing slope stays negative.
pub fn find_dirichlet_radius(
    ext: &ExtendedNonlinearity,
    r0: f64,
    u0: f64,
    up0: f64,
    tol: f64,
    r_budget: f64,
) -> Result<(f64, Trajectory)> {
    if !(up0 < 0.0) {
        return Err(Error::InvalidParams(format!(
            "shooting requires u'(r0) < 0 (got {up0}); r0 may be too large"
        )));
    }
    let opts = OdeOptions {
        rtol: tol,
        atol: tol * u0.abs() * 1e-2,
        ..Default::default()
    };
    let mut rhs = |r: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
        Ok([y[1], -y[1] / r - ext.f(y[0])?])
    };
    let event = |_r: f64, y: &[f64; 2]| y[0];
    let (traj, hit) = ode::integrate_with_event(
        &mut rhs,
        r0,
        [u0, up0],
        r_budget,
        &opts,
        &event,
        1e-10 * u0.abs(),
    )?;
    let hit = hit.ok_or(Error::NoDirichletRadius { r_budget })?;
    // Monotone decrease along the whole outer segment.
    for s in &traj.steps {
        if s.y[1] >= 0.0 && s.t > r0 {
            return Err(Error::Integration(format!(
                "w' = {:.3e} >= 0 at r = {:.6}; outward profile not monotone",
                s.y[1], s.t
            )));
        }
    }
    Ok((hit.t, traj))
}

/// Merge inner nodes with the outer trajectory at the matching radius.
/// The inner segment must end exactly where the trajectory starts (shared
/// initial condition); any visible mismatch is an assembly bug.
pub fn assemble_full(
    inner: Vec<ProfileNode>,
    outer: &Trajectory,
    dirichlet_radius: f64,
) -> Result<RadialProfile> {
    let r0 = outer.first().t;
    if let Some(last) = inner.last() {
        let du = (last.u - outer.first().y[0]).abs();
        let dup = (last.u_prime - outer.first().y[1]).abs();
        let scale = last.u.abs().max(1.0);
        if last.r > r0 * (1.0 + 1e-12)
            || du > 1e-9 * scale
            || dup > 1e-9 * last.u_prime.abs().max(1.0)
        {
            return Err(Error::ProfileMismatch {
                at_r: r0,
                delta: du.max(dup),
            });
        }
    }
    let mut nodes = inner;
    // The trajectory's first point duplicates the inner match point.
    let skip = if nodes
        .last()
        .map(|n| (n.r - r0).abs() < 1e-14 * r0)
        .unwrap_or(false)
    {
        1
    } else {
        0
    };
    for s in outer.steps.iter().skip(skip) {
        nodes.push(ProfileNode {
            r: s.t,
            rho: 1.0 - 2.0 * s.t.ln(),
            u: s.y[0],
            u_prime: s.y[1],
            phi: s.y[0],
            eta: 0.0,
            residual: None,
            segment: Segment::OuterShot,
        });
    }
    RadialProfile::new(nodes, r0, Some(dirichlet_radius))
}
