//! Pipeline orchestration: classify → construct → extend → verify, with a
//! solved-profile handle that downstream checks can evaluate densely
//! (profile nodes alone are too coarse for high-order residual stencils).

use crate::classify::{self, ClassificationReport, Classifier, Verdict};
use crate::config::RunConfig;
use crate::correction::{
    self, assemble_inner, ef_map, ef_unmap, solve_correction, CorrectionField,
    CorrectionOptions, RHO_R_CAP,
};
use crate::error::Error;
use crate::model::{build_model, ModelProblem};
use crate::nonlinearity::{Nonlinearity, TransformF};
use crate::numerics::ode::{self, OdeOptions, Trajectory};
use crate::profile::{ProfileNode, RadialProfile, Segment};
use crate::shooting::{self, ExtendedNonlinearity};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Classification stage output plus the working objects the later stages
/// reuse.
pub struct Prepared {
    pub cl: Classifier,
    pub model: ModelProblem,
    pub report: ClassificationReport,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let nl = Nonlinearity::make(&cfg.nonlinearity)?;
    let mut t = TransformF::new(nl);
    t.rel_tol = cfg.quad_rel_tol;
    t.inv_rel_tol = cfg.inv_rel_tol;
    let report = classify::classify(&t, &cfg.hypothesis_grid)?;
    let model_b = t.nl().model_b().unwrap_or(report.b_estimate).max(1.0);
    let model = build_model(model_b)?;
    let cl = Classifier::new(t)?;
    Ok(Prepared { cl, model, report })
}

fn correction_options(cfg: &RunConfig) -> CorrectionOptions {
    CorrectionOptions {
        rho0: cfg.rho0.unwrap_or(50.0),
        rho_max: cfg.rho_max,
        tol: cfg.tol,
        panels_per_period: (8.0 * cfg.grid_density).round() as usize,
        ..Default::default()
    }
}

/// Construct the inner corrected profile.
pub fn construct(cfg: &RunConfig, prep: &Prepared) -> Result<(CorrectionField, Vec<ProfileNode>)> {
    if prep.report.hypothesis_verdict == Verdict::Fail {
        log::warn!(
            "decay hypothesis verdict is `fail`; the correction will likely not converge"
        );
    }
    let field = solve_correction(&prep.cl, &prep.model, &correction_options(cfg))?;
    let nodes = assemble_inner(&prep.cl, &prep.model, &field)?;
    Ok((field, nodes))
}

/// Fully assembled solution with dense evaluators for every segment.
pub struct SolvedProfile {
    pub profile: RadialProfile,
    pub field: CorrectionField,
    pub cl: Classifier,
    pub model: ModelProblem,
    pub ext: ExtendedNonlinearity,
    /// Emden–Fowler continuation from the correction grid down to the
    /// matching point, when `ρ(r0) < ρ0` (ρ decreasing along the steps).
    pub bridge: Option<Trajectory>,
    pub outer: Trajectory,
    pub dirichlet_radius: f64,
    pub rho_at_r0: f64,
}

impl SolvedProfile {
    /// `u(ρ)` on the constructed side (`ρ ≥ ρ(r0)`).
    pub fn u_of_rho(&self, rho: f64) -> Result<f64> {
        if rho >= self.field.rho0 {
            let phi = self.model.phi(self.cl.transform(), rho)?;
            Ok(phi + self.field.eta(rho))
        } else if let Some(b) = &self.bridge {
            b.sample(rho)
                .map(|y| y[0])
                .ok_or_else(|| Error::OutOfRange(format!("rho = {rho} outside the bridge range")))
        } else {
            Err(Error::OutOfRange(format!(
                "rho = {rho} below the constructed range"
            )))
        }
    }

    /// `du/dρ` on the constructed side.
    pub fn u_rho_of_rho(&self, rho: f64) -> Result<f64> {
        if rho >= self.field.rho0 {
            let phi = self.model.phi(self.cl.transform(), rho)?;
            let ff = self.cl.functionals(phi)?.ff;
            Ok(ff * (1.0 - 1.0 / rho) + self.field.eta_prime(rho))
        } else if let Some(b) = &self.bridge {
            b.sample(rho)
                .map(|y| y[1])
                .ok_or_else(|| Error::OutOfRange(format!("rho = {rho} outside the bridge range")))
        } else {
            Err(Error::OutOfRange(format!(
                "rho = {rho} below the constructed range"
            )))
        }
    }

    /// `u(r)` across all segments.
    pub fn u_of_r(&self, r: f64) -> Result<f64> {
        if r >= self.outer.first().t {
            self.outer
                .sample(r)
                .map(|y| y[0])
                .ok_or_else(|| Error::OutOfRange(format!("r = {r} beyond the outer segment")))
        } else {
            self.u_of_rho(ef_map(r)?)
        }
    }

    /// `u'(r)` across all segments.
    pub fn u_prime_of_r(&self, r: f64) -> Result<f64> {
        if r >= self.outer.first().t {
            self.outer
                .sample(r)
                .map(|y| y[1])
                .ok_or_else(|| Error::OutOfRange(format!("r = {r} beyond the outer segment")))
        } else {
            Ok(-2.0 / r * self.u_rho_of_rho(ef_map(r)?)?)
        }
    }

    pub fn nl(&self) -> &Nonlinearity {
        self.cl.transform().nl()
    }
}

/// Construct, continue to the matching radius and shoot to the boundary.
pub fn extend(cfg: &RunConfig, prep: &Prepared) -> Result<SolvedProfile> {
    let (field, mut inner_nodes) = construct(cfg, prep)?;
    let rho_r0 = ef_map(cfg.r0)?;
    let cl = prep.cl.clone();
    let model = prep.model.clone();

    // Initial data at the matching radius.
    let (bridge, u0, u_rho0) = if rho_r0 >= field.rho0 {
        let phi = model.phi(cl.transform(), rho_r0)?;
        let ff = cl.functionals(phi)?.ff;
        (
            None,
            phi + field.eta(rho_r0),
            ff * (1.0 - 1.0 / rho_r0) + field.eta_prime(rho_r0),
        )
    } else {
        let traj = bridge_inward(&cl, &model, &field, rho_r0, cfg.ode_tol)?;
        let last = *traj.last();
        (Some(traj), last.y[0], last.y[1])
    };
    let up0 = -2.0 / cfg.r0 * u_rho0;
    if !(up0 < 0.0) {
        return Err(Error::InvalidParams(format!(
            "u'(r0) = {up0:.3e} not negative at r0 = {}; pick a smaller r0",
            cfg.r0
        )));
    }

    // Bridge steps become inner profile nodes (they continue the same u).
    if let Some(b) = &bridge {
        for s in b.steps.iter().skip(1) {
            let rho = s.t;
            if rho > RHO_R_CAP {
                continue;
            }
            let r = ef_unmap(rho)?;
            let phi = model.phi(cl.transform(), rho)?;
            inner_nodes.push(ProfileNode {
                r,
                rho,
                u: s.y[0],
                u_prime: -2.0 / r * s.y[1],
                phi,
                eta: s.y[0] - phi,
                residual: None,
                segment: Segment::InnerConstructed,
            });
        }
    }

    let ext = ExtendedNonlinearity::new(cl.transform().nl())?;
    let (radius, outer) =
        shooting::find_dirichlet_radius(&ext, cfg.r0, u0, up0, cfg.ode_tol, 1e4)?;
    let profile = shooting::assemble_full(inner_nodes, &outer, radius)?;
    Ok(SolvedProfile {
        profile,
        field,
        cl,
        model,
        ext,
        bridge,
        outer,
        dirichlet_radius: radius,
        rho_at_r0: rho_r0,
    })
}

/// Integrate the Emden–Fowler form `u_ρρ = -e^{1-ρ+a(u)}/4` downward from
/// the correction grid to `rho_to < ρ0`.
fn bridge_inward(
    cl: &Classifier,
    model: &ModelProblem,
    field: &CorrectionField,
    rho_to: f64,
    tol: f64,
) -> Result<Trajectory> {
    let rho_from = field.rho0 * (1.0 + 1e-12);
    let phi = model.phi(cl.transform(), rho_from)?;
    let ff = cl.functionals(phi)?.ff;
    let u0 = phi + field.eta(rho_from);
    let urho0 = ff * (1.0 - 1.0 / rho_from) + field.eta_prime(rho_from);
    let nl = cl.transform().nl().clone();
    let mut rhs = |rho: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
        let expo = 1.0 - rho + nl.a_value(y[0])?;
        if expo > 700.0 {
            return Err(Error::Integration(format!(
                "source term overflows at rho = {rho}"
            )));
        }
        Ok([y[1], -0.25 * expo.exp()])
    };
    ode::integrate(
        &mut rhs,
        rho_from,
        [u0, urho0],
        rho_to,
        &OdeOptions {
            rtol: tol,
            atol: tol * 1e-2,
            ..Default::default()
        },
    )
}

/// One report to rule the run: everything serialized by the CLI embeds the
/// resolved configuration and the crate version.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub config: RunConfig,
}

impl Provenance {
    pub fn new(cfg: &RunConfig) -> Provenance {
        Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
        }
    }
}
