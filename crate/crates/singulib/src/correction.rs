//! Correction equation in Emden–Fowler variables.
//!
//! With `ρ = log(1/r²) + 1` and `u(r) = φ(ρ) + η(ρ)`, the correction `η`
//! satisfies the integral equation `η = T[η]`,
//!
//! ```text
//! T[η](ρ) = √B ∫_ρ^∞ (ρτ)^{1/4} sin((2/√B)(√ρ - √τ)) [I + Lη + N[η]](τ) dτ
//! ```
//!
//! with
//!
//! ```text
//! I(ρ)    = fF(φ) (1 - 1/ρ)² [(1 - g'G)(ψ) - (1 - f'F)(φ)]
//! L(ρ)    = -3/(16ρ²) - (1 - f'F)(φ) / (Bρ)
//! N[η](ρ) = (fF(φ)/(Bρ)) [e^{a(φ+η)-a(φ)} - 1 - a'(φ)η]
//! ```
//!
//! (the `e^{1-ρ}/4` prefactors have been absorbed through
//! `F(φ) = (B/4)ρe^{1-ρ}`, so nothing here exponentiates `ρ` or `a`).
//!
//! Numerics: substituting `t = √τ` makes the kernel uniformly oscillatory,
//! `sin(c(√ρ - t))` with `c = 2/√B`, and the angle-addition split
//! `sin(c√ρ)cos(ct) - cos(c√ρ)sin(ct)` turns `T` into two suffix integrals
//! `∫_t^T t'^{3/2} cos(ct') S(t'²) dt'` (and `sin`), accumulated panel-wise
//! once per iteration. Evaluating `T[η]` (and `η'`) at arbitrary `ρ` then
//! costs one partial panel. The grid keeps at least 8 panels per kernel
//! period; each panel carries a 10-point Gauss rule, and the slowly varying
//! factor `S` is interpolated inside a panel from its Gauss samples.

use crate::classify::Classifier;
use crate::error::Error;
use crate::model::ModelProblem;
use crate::numerics::{fit, quad};
use crate::profile::{ProfileNode, Segment};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Emden–Fowler map `ρ = log(1/r²) + 1` for `0 < r < 1`.
pub fn ef_map(r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::OutOfRange(format!("ef_map requires 0 < r < 1 (got {r})")));
    }
    Ok(1.0 - 2.0 * r.ln())
}

/// Inverse map `r = e^{(1-ρ)/2}` for `ρ > 1`.
pub fn ef_unmap(rho: f64) -> Result<f64> {
    if !(rho >= 1.0) {
        return Err(Error::OutOfRange(format!("ef_unmap requires rho >= 1 (got {rho})")));
    }
    Ok(((1.0 - rho) / 2.0).exp())
}

/// Grid in `t = √ρ`: uniform panels with Gauss nodes inside.
#[derive(Debug, Clone)]
pub struct EFGrid {
    pub rho0: f64,
    pub rho_max: f64,
    /// Panel boundaries, ascending, `t_bounds.len() = panels + 1`.
    pub t_bounds: Vec<f64>,
    pub gauss_per_panel: usize,
    /// Reference Gauss–Legendre nodes and weights on [-1, 1].
    ref_nodes: Vec<f64>,
    ref_weights: Vec<f64>,
    /// Barycentric weights for interpolation on the reference nodes.
    bary: Vec<f64>,
}

impl EFGrid {
    /// `panels_per_period` rules the spacing: `Δt = π√B / panels_per_period`
    /// (at least 8 per oscillation of the kernel).
    pub fn new(rho0: f64, rho_max: f64, b: f64, panels_per_period: usize) -> Result<EFGrid> {
        if !(rho0 > 1.0 && rho_max > rho0) {
            return Err(Error::InvalidParams(format!(
                "need 1 < rho0 < rho_max (got {rho0}, {rho_max})"
            )));
        }
        let ppp = panels_per_period.max(8);
        let dt_max = std::f64::consts::PI * b.sqrt() / ppp as f64;
        let t0 = rho0.sqrt();
        let t1 = rho_max.sqrt();
        let panels = (((t1 - t0) / dt_max).ceil() as usize).max(16);
        let t_bounds: Vec<f64> = (0..=panels)
            .map(|k| t0 + (t1 - t0) * k as f64 / panels as f64)
            .collect();
        let g = 10;
        let (ref_nodes, ref_weights) = quad::gauss_legendre(g);
        let mut bary = vec![1.0; g];
        for i in 0..g {
            for j in 0..g {
                if i != j {
                    bary[i] /= ref_nodes[i] - ref_nodes[j];
                }
            }
        }
        Ok(EFGrid {
            rho0,
            rho_max,
            t_bounds,
            gauss_per_panel: g,
            ref_nodes,
            ref_weights,
            bary,
        })
    }

    pub fn panels(&self) -> usize {
        self.t_bounds.len() - 1
    }

    /// Gauss abscissa `g` of panel `p`, in `t`.
    fn gauss_t(&self, p: usize, g: usize) -> f64 {
        let (a, b) = (self.t_bounds[p], self.t_bounds[p + 1]);
        0.5 * (a + b) + 0.5 * (b - a) * self.ref_nodes[g]
    }

    fn gauss_w(&self, p: usize, g: usize) -> f64 {
        let (a, b) = (self.t_bounds[p], self.t_bounds[p + 1]);
        0.5 * (b - a) * self.ref_weights[g]
    }

    /// All evaluation points (Gauss points then boundaries), ascending in t.
    fn all_t(&self) -> Vec<f64> {
        let mut pts = Vec::with_capacity(self.panels() * self.gauss_per_panel + self.t_bounds.len());
        for p in 0..self.panels() {
            pts.push(self.t_bounds[p]);
            for g in 0..self.gauss_per_panel {
                pts.push(self.gauss_t(p, g));
            }
        }
        pts.push(*self.t_bounds.last().unwrap());
        pts
    }
}

/// Everything iteration-independent, precomputed at each grid point
/// (Gauss points and panel boundaries interleaved, ascending t).
#[derive(Debug, Clone)]
pub struct Discretization {
    pub grid: EFGrid,
    pub b: f64,
    /// Kernel frequency `2/√B`.
    c: f64,
    /// `t` of every evaluation point.
    ts: Vec<f64>,
    rho: Vec<f64>,
    phi: Vec<f64>,
    /// `fF(φ)`.
    ff: Vec<f64>,
    /// `a(φ)`, `a'(φ)` for the nonlinear term.
    a_phi: Vec<f64>,
    ap_phi: Vec<f64>,
    i_term: Vec<f64>,
    l_term: Vec<f64>,
    eps_sum: Vec<f64>,
    /// Suffix sup of `ε₁+ε₂` and the weight `fF · sup ε` of the norm.
    sup_eps: Vec<f64>,
    weight: Vec<f64>,
    /// Index of the first evaluation point of each panel (its left boundary).
    panel_start: Vec<usize>,
}

impl Discretization {
    pub fn build(cl: &Classifier, m: &ModelProblem, grid: EFGrid) -> Result<Discretization> {
        let b = m.b();
        let c = 2.0 / b.sqrt();
        let ts = grid.all_t();
        let n = ts.len();
        let mut rho = Vec::with_capacity(n);
        let mut phi = Vec::with_capacity(n);
        let mut ff = Vec::with_capacity(n);
        let mut a_phi = Vec::with_capacity(n);
        let mut ap_phi = Vec::with_capacity(n);
        let mut i_term = Vec::with_capacity(n);
        let mut l_term = Vec::with_capacity(n);
        let mut eps_sum = Vec::with_capacity(n);
        for &t in &ts {
            let p = t * t;
            let ph = m.phi(cl.transform(), p)?;
            let psi = m.psi(p);
            let f_side = cl.functionals(ph)?;
            let omg = m.one_minus_gpg(psi);
            let dg = m.d_second_g(psi)?;
            let lambda = p - 1.0 - p.ln() - (0.25 * b).ln();
            let e1 = lambda * (f_side.one_minus_fpf - omg).abs();
            let e2 = lambda
                * lambda
                * ((1.0 - f_side.one_minus_fpf) * f_side.d_second - (1.0 - omg) * dg).abs();
            let jet = cl.transform().nl().a_jet(ph, 1)?;
            rho.push(p);
            phi.push(ph);
            ff.push(f_side.ff);
            a_phi.push(jet.value());
            ap_phi.push(jet.deriv(1));
            i_term.push(
                f_side.ff * (1.0 - 1.0 / p) * (1.0 - 1.0 / p) * (omg - f_side.one_minus_fpf),
            );
            l_term.push(-3.0 / (16.0 * p * p) - f_side.one_minus_fpf / (b * p));
            eps_sum.push(e1 + e2);
        }
        let mut sup_eps = eps_sum.clone();
        for k in (0..n.saturating_sub(1)).rev() {
            sup_eps[k] = sup_eps[k].max(sup_eps[k + 1]);
        }
        let weight: Vec<f64> = ff.iter().zip(&sup_eps).map(|(f, e)| f * e).collect();
        let g = grid.gauss_per_panel;
        let panel_start: Vec<usize> = (0..grid.panels()).map(|p| p * (g + 1)).collect();
        Ok(Discretization {
            grid,
            b,
            c,
            ts,
            rho,
            phi,
            ff,
            a_phi,
            ap_phi,
            i_term,
            l_term,
            eps_sum,
            sup_eps,
            weight,
            panel_start,
        })
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn rho_at(&self, k: usize) -> f64 {
        self.rho[k]
    }

    pub fn phi_at(&self, k: usize) -> f64 {
        self.phi[k]
    }

    pub fn ff_at(&self, k: usize) -> f64 {
        self.ff[k]
    }

    pub fn eps_at(&self, k: usize) -> f64 {
        self.eps_sum[k]
    }

    /// `φ'(ρ) = fF(φ)(1 - 1/ρ)` at grid point `k`.
    pub fn phi_prime_at(&self, k: usize) -> f64 {
        self.ff[k] * (1.0 - 1.0 / self.rho[k])
    }

    /// `I`, `L` at grid point `k` (for diagnostics and tests).
    pub fn operators_at(&self, k: usize) -> (f64, f64) {
        (self.i_term[k], self.l_term[k])
    }

    /// Nonlinear term `N[η]` at grid point `k`:
    /// `(fF/(Bρ)) (e^{Δa} - 1 - a'(φ)η)` with `Δa = a(φ+η) - a(φ)`.
    fn n_term(&self, cl: &Classifier, k: usize, eta: f64) -> Result<f64> {
        if eta == 0.0 {
            return Ok(0.0);
        }
        let arg = self.phi[k] + eta;
        if arg <= cl.transform().nl().s0() {
            return Err(Error::OutOfRange(format!(
                "correction pushes φ+η = {arg} below s0 at ρ = {}",
                self.rho[k]
            )));
        }
        let da = cl.transform().nl().a_value(arg)? - self.a_phi[k];
        Ok(self.ff[k] / (self.b * self.rho[k]) * (da.exp_m1() - self.ap_phi[k] * eta))
    }

    /// Weighted sup norm over all grid points: `max |v| / (fF · sup ε)`.
    /// Points with zero weight contribute zero when `v` vanishes there and
    /// infinity otherwise.
    pub fn norm(&self, values: &[f64]) -> f64 {
        let mut out: f64 = 0.0;
        for (v, w) in values.iter().zip(&self.weight) {
            if *w > 0.0 {
                out = out.max(v.abs() / w);
            } else if v.abs() > 1e-290 {
                return f64::INFINITY;
            }
        }
        out
    }

    pub fn sup_abs(&self, values: &[f64]) -> f64 {
        values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Source samples `S = I + Lη + N[η]` with the panel suffix tables needed to
/// evaluate `T[η]` and its derivative anywhere.
#[derive(Debug, Clone)]
pub struct SourceRep {
    /// `S` at every evaluation point.
    s: Vec<f64>,
    /// Suffix integrals from panel `p` to the end:
    /// `suffix_cos[p] = ∫_{t_p}^{T} t^{3/2} cos(ct) S dt`.
    suffix_cos: Vec<f64>,
    suffix_sin: Vec<f64>,
}

impl Discretization {
    /// Assemble the source representation for a given field (η at all
    /// points). `include_nonlinear` switches `N[η]` on/off; the map is
    /// affine in η when it is off.
    pub fn source(
        &self,
        cl: &Classifier,
        eta: &[f64],
        include_nonlinear: bool,
    ) -> Result<SourceRep> {
        let n = self.len();
        assert_eq!(eta.len(), n);
        let mut s = Vec::with_capacity(n);
        for k in 0..n {
            let nl_term = if include_nonlinear {
                self.n_term(cl, k, eta[k])?
            } else {
                0.0
            };
            s.push(self.i_term[k] + self.l_term[k] * eta[k] + nl_term);
        }
        let panels = self.grid.panels();
        let g = self.grid.gauss_per_panel;
        let mut panel_cos = vec![0.0; panels];
        let mut panel_sin = vec![0.0; panels];
        for p in 0..panels {
            let base = self.panel_start[p] + 1; // first Gauss point
            let mut pc = 0.0;
            let mut ps = 0.0;
            for gg in 0..g {
                let t = self.ts[base + gg];
                let w = self.grid.gauss_w(p, gg);
                let amp = w * t.powf(1.5) * s[base + gg];
                pc += amp * (self.c * t).cos();
                ps += amp * (self.c * t).sin();
            }
            panel_cos[p] = pc;
            panel_sin[p] = ps;
        }
        let mut suffix_cos = vec![0.0; panels + 1];
        let mut suffix_sin = vec![0.0; panels + 1];
        for p in (0..panels).rev() {
            suffix_cos[p] = suffix_cos[p + 1] + panel_cos[p];
            suffix_sin[p] = suffix_sin[p + 1] + panel_sin[p];
        }
        Ok(SourceRep {
            s,
            suffix_cos,
            suffix_sin,
        })
    }

    /// Barycentric interpolation of the source inside panel `p` at `t`.
    fn interp_s(&self, rep: &SourceRep, p: usize, t: f64) -> f64 {
        let (a, b) = (self.grid.t_bounds[p], self.grid.t_bounds[p + 1]);
        let x = (2.0 * t - a - b) / (b - a);
        let base = self.panel_start[p] + 1;
        let g = self.grid.gauss_per_panel;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..g {
            let dx = x - self.grid.ref_nodes[i];
            if dx.abs() < 1e-14 {
                return rep.s[base + i];
            }
            let w = self.grid.bary[i] / dx;
            num += w * rep.s[base + i];
            den += w;
        }
        num / den
    }

    /// `(IC, IS)(t) = ∫_t^{T} t'^{3/2} (cos, sin)(c t') S dt'`.
    fn suffix_integrals(&self, rep: &SourceRep, t: f64) -> (f64, f64) {
        let bounds = &self.grid.t_bounds;
        let last = *bounds.last().unwrap();
        if t >= last {
            return (0.0, 0.0);
        }
        let p = match bounds.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i.min(bounds.len() - 2),
            Err(i) => i.saturating_sub(1).min(bounds.len() - 2),
        };
        let right = bounds[p + 1];
        let mut ic = rep.suffix_cos[p + 1];
        let mut is = rep.suffix_sin[p + 1];
        if right > t {
            // Partial panel by a fresh Gauss rule on [t, right]; S comes from
            // the panel interpolant.
            let half = 0.5 * (right - t);
            let mid = 0.5 * (right + t);
            for (x, w) in self
                .grid
                .ref_nodes
                .iter()
                .zip(&self.grid.ref_weights)
            {
                let tp = mid + half * x;
                let amp = w * half * tp.powf(1.5) * self.interp_s(rep, p, tp);
                ic += amp * (self.c * tp).cos();
                is += amp * (self.c * tp).sin();
            }
        }
        (ic, is)
    }

    /// `T[η](ρ)` from an assembled source, any `ρ0 <= ρ`.
    pub fn t_apply(&self, rep: &SourceRep, rho: f64) -> f64 {
        if rho >= self.grid.rho_max {
            return 0.0;
        }
        let t = rho.sqrt();
        let (ic, is) = self.suffix_integrals(rep, t);
        let (sn, cs) = (self.c * t).sin_cos();
        2.0 * self.b.sqrt() * rho.powf(0.25) * (sn * ic - cs * is)
    }

    /// Derivative of `T[η]` at `ρ`:
    /// `T' = T/(4ρ) + 2 ρ^{-1/4} [cos(c√ρ) IC + sin(c√ρ) IS]`.
    pub fn t_apply_prime(&self, rep: &SourceRep, rho: f64) -> f64 {
        if rho >= self.grid.rho_max {
            return 0.0;
        }
        let t = rho.sqrt();
        let (ic, is) = self.suffix_integrals(rep, t);
        let (sn, cs) = (self.c * t).sin_cos();
        let eta = 2.0 * self.b.sqrt() * rho.powf(0.25) * (sn * ic - cs * is);
        eta / (4.0 * rho) + 2.0 * rho.powf(-0.25) * (cs * ic + sn * is)
    }

    /// One Picard sweep: η ↦ T[η] at every grid point.
    pub fn apply_t(&self, cl: &Classifier, eta: &[f64]) -> Result<Vec<f64>> {
        let rep = self.source(cl, eta, true)?;
        Ok((0..self.len())
            .map(|k| self.t_apply(&rep, self.rho[k]))
            .collect())
    }

    /// Estimate of the truncated tail beyond `rho_max`, measured against the
    /// weighted norm over the usable region `ρ ≤ rho_max/4`. Near the
    /// truncation edge the field is off by its own scale no matter what; the
    /// diagnostic asks whether that error leaks inward. The bound follows
    /// the integration-by-parts mechanism of the oscillatory integral:
    /// boundary term `~ √B ρ^{1/4} τ^{3/4} |I(τ)|` at `τ = rho_max` plus the
    /// integral of `τ^{-5/4} fF ε` continued with its fitted power decay.
    pub fn tail_estimate(&self) -> f64 {
        let n = self.len();
        let lo = self.grid.rho_max / 10.0;
        let xs: Vec<f64> = (0..n)
            .filter(|&k| self.rho[k] >= lo)
            .map(|k| self.rho[k])
            .collect();
        let zs: Vec<f64> = (0..n)
            .filter(|&k| self.rho[k] >= lo)
            .map(|k| (self.ff[k] * self.eps_sum[k]).max(1e-300))
            .collect();
        if xs.len() < 4 {
            return f64::INFINITY;
        }
        let z_end = zs.last().copied().unwrap();
        if z_end <= 1e-299 {
            // Identically vanishing source (the model itself).
            return 0.0;
        }
        let p = -fit::loglog_slope(&xs, &zs).unwrap_or(0.0);
        if p <= 0.3 {
            return f64::INFINITY;
        }
        // c_i: empirical constant of |I| <= c fF ε / ρ over the last decade.
        let mut c_i: f64 = 0.0;
        for k in 0..n {
            if self.rho[k] >= lo {
                let denom = (self.ff[k] * self.eps_sum[k] / self.rho[k]).max(1e-300);
                c_i = c_i.max(self.i_term[k].abs() / denom);
            }
        }
        let rho_max = self.grid.rho_max;
        let kappa = 1.0 + 1.0 / (p - 0.25);
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let rho = self.rho[k];
            if rho > 0.25 * rho_max {
                continue;
            }
            let tail =
                self.b.sqrt() * c_i * rho.powf(0.25) * z_end * rho_max.powf(-0.25) * kappa;
            if self.weight[k] > 0.0 {
                worst = worst.max(tail / self.weight[k]);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CorrectionOptions {
    /// Starting `ρ0`; escalated on divergence.
    pub rho0: f64,
    pub rho_max: f64,
    /// Convergence tolerance on the weighted norm of the Picard increments.
    pub tol: f64,
    pub panels_per_period: usize,
    pub max_iterations: usize,
    pub max_escalations: usize,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        CorrectionOptions {
            rho0: 50.0,
            rho_max: 4000.0,
            tol: 1e-8,
            panels_per_period: 8,
            max_iterations: 40,
            max_escalations: 5,
        }
    }
}

/// Converged correction field with its history and evaluator state.
#[derive(Debug, Clone)]
pub struct CorrectionField {
    pub rho0: f64,
    pub rho_max: f64,
    pub converged: bool,
    /// `‖η_{k+1} - η_k‖` per iteration.
    pub delta_history: Vec<f64>,
    /// Ratios of consecutive deltas.
    pub iteration_history: Vec<f64>,
    pub weighted_norm: f64,
    pub sup_abs_eta: f64,
    pub tail_estimate: f64,
    pub escalations: usize,
    pub(crate) disc: Discretization,
    /// Converged η at every grid point.
    pub(crate) eta: Vec<f64>,
    /// Source representation of the converged field.
    pub(crate) rep: SourceRep,
}

impl CorrectionField {
    /// η at any `ρ ∈ [ρ0, ∞)` (zero beyond the truncation point).
    pub fn eta(&self, rho: f64) -> f64 {
        self.disc.t_apply(&self.rep, rho)
    }

    /// η'(ρ) from the differentiated integral representation.
    pub fn eta_prime(&self, rho: f64) -> f64 {
        self.disc.t_apply_prime(&self.rep, rho)
    }

    pub fn disc(&self) -> &Discretization {
        &self.disc
    }

    pub fn eta_values(&self) -> &[f64] {
        &self.eta
    }
}

/// Picard iteration of `T` from `η = 0`, escalating `ρ0` when the iteration
/// does not contract.
pub fn solve_correction(
    cl: &Classifier,
    m: &ModelProblem,
    opts: &CorrectionOptions,
) -> Result<CorrectionField> {
    let mut rho0 = opts.rho0;
    let mut last_diag = String::new();
    for escalation in 0..=opts.max_escalations {
        let grid = EFGrid::new(rho0, opts.rho_max, m.b(), opts.panels_per_period)?;
        let disc = Discretization::build(cl, m, grid)?;
        match picard(cl, &disc, opts) {
            Ok((eta, deltas, ratios, converged)) => {
                if converged {
                    // Convergence of the truncated iteration is necessary but
                    // not sufficient: when the deviation functions do not
                    // decay, the discarded tail is as large as the usable
                    // field and the discrete fixed point approximates
                    // nothing. Gate on the tail diagnostic.
                    let tail_estimate = disc.tail_estimate();
                    if tail_estimate > 0.5 {
                        let n = disc.len();
                        let h_first = disc.rho[0].sqrt() * disc.eps_sum[0];
                        let h_last = disc.rho[n - 1].sqrt() * disc.eps_sum[n - 1];
                        if h_last > h_first {
                            return Err(Error::NoContraction {
                                diagnostic: format!(
                                    "decay hypothesis violated: rho^(1/2)(eps1+eps2) grows \
                                     from {h_first:.3e} to {h_last:.3e} across the grid, \
                                     truncation tail estimate {tail_estimate:.3e}"
                                ),
                            });
                        }
                        return Err(Error::RhoMaxTooSmall {
                            estimate: tail_estimate,
                            budget: 0.5,
                        });
                    }
                    let rep = disc.source(cl, &eta, true)?;
                    let weighted_norm = disc.norm(&eta);
                    let sup_abs_eta = disc.sup_abs(&eta);
                    return Ok(CorrectionField {
                        rho0,
                        rho_max: opts.rho_max,
                        converged,
                        delta_history: deltas,
                        iteration_history: ratios,
                        weighted_norm,
                        sup_abs_eta,
                        tail_estimate,
                        escalations: escalation,
                        disc,
                        eta,
                        rep,
                    });
                }
                last_diag = format!(
                    "no contraction at rho0 = {rho0:.1} (deltas {:?})",
                    &deltas[deltas.len().saturating_sub(3)..]
                );
            }
            Err(e) => {
                last_diag = format!("iteration failed at rho0 = {rho0:.1}: {e}");
            }
        }
        rho0 *= 1.5;
    }
    // Distinguish hypothesis failure from other non-contraction.
    let grid = EFGrid::new(opts.rho0, opts.rho_max, m.b(), opts.panels_per_period)?;
    let disc = Discretization::build(cl, m, grid)?;
    let n = disc.len();
    let h_first = disc.rho[0].sqrt() * disc.eps_sum[0];
    let h_last = disc.rho[n - 1].sqrt() * disc.eps_sum[n - 1];
    let diagnostic = if h_last > h_first {
        format!(
            "decay hypothesis violated: rho^(1/2)(eps1+eps2) grows from {h_first:.3e} \
             to {h_last:.3e} across the grid; {last_diag}"
        )
    } else {
        last_diag
    };
    Err(Error::NoContraction { diagnostic })
}

type PicardOutcome = (Vec<f64>, Vec<f64>, Vec<f64>, bool);

fn picard(cl: &Classifier, disc: &Discretization, opts: &CorrectionOptions) -> Result<PicardOutcome> {
    let mut eta = vec![0.0; disc.len()];
    let mut deltas = Vec::new();
    let mut ratios = Vec::new();
    for _ in 0..opts.max_iterations {
        let next = disc.apply_t(cl, &eta)?;
        let diff: Vec<f64> = next.iter().zip(&eta).map(|(a, b)| a - b).collect();
        let d = disc.norm(&diff);
        if let Some(prev) = deltas.last() {
            ratios.push(d / prev);
        }
        deltas.push(d);
        eta = next;
        if d <= opts.tol {
            return Ok((eta, deltas, ratios, true));
        }
        let k = ratios.len();
        if k >= 3 && ratios[k - 3..].iter().all(|r| *r >= 1.0) {
            return Ok((eta, deltas, ratios, false));
        }
        if !d.is_finite() || d > 1e8 {
            return Ok((eta, deltas, ratios, false));
        }
    }
    Ok((eta, deltas, ratios, false))
}

/// Radii below `e^{(1 - RHO_R_CAP)/2}` underflow f64; profile nodes stop
/// there while the field evaluator keeps the full `ρ` range.
pub const RHO_R_CAP: f64 = 1200.0;

/// Inner profile nodes from a converged correction: walk the grid from the
/// outside in (`ρ` descending means `r` ascending).
pub fn assemble_inner(
    cl: &Classifier,
    _m: &ModelProblem,
    field: &CorrectionField,
) -> Result<Vec<ProfileNode>> {
    if !field.converged {
        return Err(Error::Other("assemble_inner requires a converged field".into()));
    }
    let disc = &field.disc;
    let n = disc.len();
    let mut nodes = Vec::with_capacity(n);
    for k in (0..n).rev() {
        let rho = disc.rho[k];
        if rho > RHO_R_CAP {
            continue;
        }
        let r = ef_unmap(rho)?;
        let phi = disc.phi[k];
        let eta = field.eta[k];
        let eta_p = field.eta_prime(rho);
        let u_rho = disc.phi_prime_at(k) + eta_p;
        nodes.push(ProfileNode {
            r,
            rho,
            u: phi + eta,
            u_prime: -2.0 / r * u_rho,
            phi,
            eta,
            residual: None,
            segment: Segment::InnerConstructed,
        });
    }
    let _ = cl;
    Ok(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::Classifier;
    use crate::model::build_model;
    use crate::nonlinearity::{Nonlinearity, NonlinearitySpec, TransformF};
    use approx::assert_relative_eq;

    fn classifier(spec: NonlinearitySpec) -> Classifier {
        Classifier::new(TransformF::new(Nonlinearity::make(&spec).unwrap())).unwrap()
    }

    #[test]
    fn ef_maps_are_mutually_inverse() {
        assert_relative_eq!(ef_map(1.0 - 1e-16).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(ef_map((-5.0f64).exp()).unwrap(), 11.0, epsilon = 1e-12);
        let mut x = 0.4217f64;
        for _ in 0..20 {
            // quasi-random walk through (1e-8, 0.9)
            x = (x * 4.0).fract() * 0.9 + 1e-8;
            let r = x.clamp(1e-8, 0.9);
            let back = ef_unmap(ef_map(r).unwrap()).unwrap();
            assert_relative_eq!(back, r, max_relative = 1e-14);
        }
        assert!(ef_map(1.5).is_err());
        assert!(ef_unmap(0.5).is_err());
    }

    #[test]
    fn model_source_terms_vanish_identically() {
        let cl = classifier(NonlinearitySpec::Model { b: 2.0, s0: None });
        let m = build_model(2.0).unwrap();
        let grid = EFGrid::new(40.0, 400.0, 2.0, 8).unwrap();
        let disc = Discretization::build(&cl, &m, grid).unwrap();
        for k in 0..disc.len() {
            let (i, _) = disc.operators_at(k);
            assert_eq!(i, 0.0, "I must vanish for the model itself");
            assert_eq!(disc.eps_at(k), 0.0);
        }
        // T[0] = 0 and the zero field is the fixed point.
        let t0 = disc.apply_t(&cl, &vec![0.0; disc.len()]).unwrap();
        assert!(t0.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn nonlinear_term_vanishes_at_zero_eta() {
        let cl = classifier(NonlinearitySpec::PowerExp {
            q: 2.0,
            r: 1.0,
            s0: None,
        });
        let m = build_model(2.0).unwrap();
        let grid = EFGrid::new(50.0, 500.0, 2.0, 8).unwrap();
        let disc = Discretization::build(&cl, &m, grid).unwrap();
        for k in [0, disc.len() / 2, disc.len() - 1] {
            assert_eq!(disc.n_term(&cl, k, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn l_term_is_order_rho_minus_two() {
        // Fitted constant of ρ²|L| stays below 1 for power_exp(2,1).
        let cl = classifier(NonlinearitySpec::PowerExp {
            q: 2.0,
            r: 1.0,
            s0: None,
        });
        let m = build_model(2.0).unwrap();
        let grid = EFGrid::new(30.0, 300.0, 2.0, 8).unwrap();
        let disc = Discretization::build(&cl, &m, grid).unwrap();
        let mut c_fit: f64 = 0.0;
        for k in 0..disc.len() {
            let (_, l) = disc.operators_at(k);
            c_fit = c_fit.max(l.abs() * disc.rho_at(k) * disc.rho_at(k));
        }
        assert!(c_fit <= 1.0, "fitted C = {c_fit}");
        // It is also bounded below by the universal -3/16 part.
        assert!(c_fit >= 3.0 / 16.0);
    }

    #[test]
    fn map_is_affine_without_nonlinear_term() {
        // With N disabled, T[η₁+η₂] - T[η₁] - T[η₂] + T[0] = 0.
        let cl = classifier(NonlinearitySpec::PowerExp {
            q: 2.0,
            r: 1.0,
            s0: None,
        });
        let m = build_model(2.0).unwrap();
        let grid = EFGrid::new(50.0, 800.0, 2.0, 8).unwrap();
        let disc = Discretization::build(&cl, &m, grid).unwrap();
        let n = disc.len();
        let mut state = 0.123f64;
        let mut rand = || {
            state = (state * 997.0).fract();
            (state - 0.5) * 1e-3
        };
        let e1: Vec<f64> = (0..n).map(|_| rand()).collect();
        let e2: Vec<f64> = (0..n).map(|_| rand()).collect();
        let e12: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| a + b).collect();
        let apply = |eta: &[f64]| -> Vec<f64> {
            let rep = disc.source(&cl, eta, false).unwrap();
            (0..n).map(|k| disc.t_apply(&rep, disc.rho_at(k))).collect()
        };
        let t0 = apply(&vec![0.0; n]);
        let t1 = apply(&e1);
        let t2 = apply(&e2);
        let t12 = apply(&e12);
        let scale = t0
            .iter()
            .map(|v| v.abs())
            .fold(0.0f64, f64::max)
            .max(1e-30);
        for k in 0..n {
            let defect = (t12[k] - t1[k] - t2[k] + t0[k]).abs();
            assert!(
                defect <= 1e-10 * scale,
                "affinity defect {defect:.3e} at node {k}"
            );
        }
    }

    #[test]
    fn picard_converges_for_power_exp() {
        let cl = classifier(NonlinearitySpec::PowerExp {
            q: 2.0,
            r: 1.0,
            s0: None,
        });
        let m = build_model(2.0).unwrap();
        let opts = CorrectionOptions {
            rho0: 50.0,
            rho_max: 2000.0,
            tol: 1e-8,
            ..Default::default()
        };
        let field = solve_correction(&cl, &m, &opts).unwrap();
        assert!(field.converged);
        assert!(field.delta_history.len() <= 30);
        // Ratios eventually at most 2/3-ish; assert the observed bound 0.9.
        let tail = &field.iteration_history[field.iteration_history.len().saturating_sub(3)..];
        for r in tail {
            assert!(*r <= 0.9, "late ratio {r}");
        }
        assert!(field.weighted_norm.is_finite());
        assert!(field.tail_estimate < 0.5, "tail {:.3e}", field.tail_estimate);
    }

    #[test]
    fn model_converges_immediately_with_zero_field() {
        let cl = classifier(NonlinearitySpec::Model { b: 2.0, s0: None });
        let m = build_model(2.0).unwrap();
        let field = solve_correction(&cl, &m, &CorrectionOptions::default()).unwrap();
        assert!(field.converged);
        assert_eq!(field.delta_history.len(), 1);
        assert_eq!(field.sup_abs_eta, 0.0);
        assert_eq!(field.weighted_norm, 0.0);
    }

    #[test]
    fn fixed_point_residual_within_tolerance() {
        let cl = classifier(NonlinearitySpec::PowerExp {
            q: 2.0,
            r: 1.0,
            s0: None,
        });
        let m = build_model(2.0).unwrap();
        let opts = CorrectionOptions {
            rho0: 50.0,
            rho_max: 2000.0,
            tol: 1e-8,
            ..Default::default()
        };
        let field = solve_correction(&cl, &m, &opts).unwrap();
        let t_eta = field.disc.apply_t(&cl, &field.eta).unwrap();
        let diff: Vec<f64> = t_eta.iter().zip(&field.eta).map(|(a, b)| a - b).collect();
        assert!(field.disc.norm(&diff) <= 2.0 * opts.tol);
    }

    #[test]
    fn log_exp_fails_with_hypothesis_diagnostic() {
        let cl = classifier(NonlinearitySpec::LogExp {
            q: 2.0,
            r: 1.0,
            s0: None,
        });
        let m = build_model(2.0).unwrap();
        let opts = CorrectionOptions {
            rho0: 50.0,
            rho_max: 2000.0,
            max_escalations: 2,
            max_iterations: 25,
            ..Default::default()
        };
        match solve_correction(&cl, &m, &opts) {
            Err(Error::NoContraction { diagnostic }) => {
                assert!(
                    diagnostic.contains("decay hypothesis violated"),
                    "diagnostic: {diagnostic}"
                );
            }
            other => panic!("expected NoContraction, got {other:?}"),
        }
    }

    #[test]
    fn norm_stability_under_refinement() {
        let cl = classifier(NonlinearitySpec::PowerExp {
            q: 2.0,
            r: 1.0,
            s0: None,
        });
        let m = build_model(2.0).unwrap();
        let base = CorrectionOptions {
            rho0: 50.0,
            rho_max: 2000.0,
            tol: 1e-9,
            ..Default::default()
        };
        let f1 = solve_correction(&cl, &m, &base).unwrap();
        let f2 = solve_correction(
            &cl,
            &m,
            &CorrectionOptions {
                panels_per_period: 16,
                ..base
            },
        )
        .unwrap();
        let f3 = solve_correction(
            &cl,
            &m,
            &CorrectionOptions {
                rho_max: 4000.0,
                ..base
            },
        )
        .unwrap();
        assert_relative_eq!(f1.weighted_norm, f2.weighted_norm, max_relative = 0.1);
        assert_relative_eq!(f1.weighted_norm, f3.weighted_norm, max_relative = 0.1);
    }

    #[test]
    fn eta_prime_matches_finite_difference_of_eta() {
        let cl = classifier(NonlinearitySpec::PowerExp {
            q: 2.0,
            r: 1.0,
            s0: None,
        });
        let m = build_model(2.0).unwrap();
        let opts = CorrectionOptions {
            rho0: 50.0,
            rho_max: 2000.0,
            ..Default::default()
        };
        let field = solve_correction(&cl, &m, &opts).unwrap();
        for rho in [80.0, 200.0, 900.0] {
            let h = 1e-3;
            let fd = (field.eta(rho + h) - field.eta(rho - h)) / (2.0 * h);
            let an = field.eta_prime(rho);
            assert_relative_eq!(an, fd, max_relative = 1e-4, epsilon = 1e-12);
        }
    }

    #[test]
    fn assembled_inner_profile_is_monotone() {
        let cl = classifier(NonlinearitySpec::PowerExp {
            q: 2.0,
            r: 1.0,
            s0: None,
        });
        let m = build_model(2.0).unwrap();
        let opts = CorrectionOptions {
            rho0: 50.0,
            rho_max: 2000.0,
            ..Default::default()
        };
        let field = solve_correction(&cl, &m, &opts).unwrap();
        let nodes = assemble_inner(&cl, &m, &field).unwrap();
        assert!(nodes.len() > 100);
        for pair in nodes.windows(2) {
            assert!(pair[1].r > pair[0].r, "r must increase");
            assert!(pair[1].u < pair[0].u, "u must decrease outward");
        }
        for n in &nodes {
            assert!(n.u_prime < 0.0, "u' must be negative at r = {}", n.r);
        }
    }
}
