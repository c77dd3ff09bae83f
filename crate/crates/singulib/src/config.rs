//! Run configuration: the nonlinearity plus every numeric knob of the
//! pipeline, JSON-ingestible with unknown keys rejected and field-path
//! diagnostics on schema violations.

use crate::classify::RhoGrid;
use crate::error::Error;
use crate::nonlinearity::NonlinearitySpec;
use crate::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub nonlinearity: NonlinearitySpec,
    /// Starting point of the correction grid; `None` lets the solver use its
    /// default (with automatic escalation either way).
    #[serde(default)]
    pub rho0: Option<f64>,
    #[serde(default = "default_rho_max")]
    pub rho_max: f64,
    /// Multiplies the panel density of the correction grid (1.0 keeps the
    /// minimum of 8 panels per kernel period).
    #[serde(default = "default_grid_density")]
    pub grid_density: f64,
    /// Picard convergence tolerance in the weighted norm.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Matching radius between the constructed and shot segments.
    #[serde(default = "default_r0")]
    pub r0: f64,
    #[serde(default = "default_quad_rel_tol")]
    pub quad_rel_tol: f64,
    #[serde(default = "default_inv_rel_tol")]
    pub inv_rel_tol: f64,
    #[serde(default = "default_ode_tol")]
    pub ode_tol: f64,
    #[serde(default)]
    pub hypothesis_grid: RhoGrid,
    #[serde(default = "default_sigma_list")]
    pub sigma_list: Vec<f64>,
    /// Cut-off scales for the distributional test: `ε = e^{-x}` for each
    /// listed `x`.
    #[serde(default = "default_neg_log_eps_list")]
    pub neg_log_eps_list: Vec<f64>,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_rho_max() -> f64 {
    4000.0
}
fn default_grid_density() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    1e-8
}
fn default_r0() -> f64 {
    0.05
}
fn default_quad_rel_tol() -> f64 {
    1e-12
}
fn default_inv_rel_tol() -> f64 {
    1e-11
}
fn default_ode_tol() -> f64 {
    1e-10
}
fn default_sigma_list() -> Vec<f64> {
    vec![0.05, 0.1, 0.2]
}
fn default_neg_log_eps_list() -> Vec<f64> {
    vec![12.0, 17.0, 24.0, 34.0, 48.0, 68.0, 96.0, 136.0, 192.0]
}

impl RunConfig {
    pub fn new(nonlinearity: NonlinearitySpec) -> RunConfig {
        RunConfig {
            nonlinearity,
            rho0: None,
            rho_max: default_rho_max(),
            grid_density: default_grid_density(),
            tol: default_tol(),
            r0: default_r0(),
            quad_rel_tol: default_quad_rel_tol(),
            inv_rel_tol: default_inv_rel_tol(),
            ode_tol: default_ode_tol(),
            hypothesis_grid: RhoGrid::default(),
            sigma_list: default_sigma_list(),
            neg_log_eps_list: default_neg_log_eps_list(),
            threads: None,
        }
    }

    /// Parse JSON with path-to-field diagnostics.
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut track = serde_path_to_error::Track::new();
        let deserializer = serde_path_to_error::Deserializer::new(de, &mut track);
        let cfg: RunConfig = serde::Deserialize::deserialize(deserializer)
            .map_err(|e| Error::Config(format!("at `{}`: {e}", track.path())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_max > 10.0) {
            return Err(Error::Config(format!(
                "rho_max = {} must exceed 10",
                self.rho_max
            )));
        }
        if let Some(r0) = self.rho0 {
            if !(r0 > 1.0 && r0 < self.rho_max) {
                return Err(Error::Config(format!(
                    "rho0 = {r0} must lie in (1, rho_max)"
                )));
            }
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("tol = {} out of range", self.tol)));
        }
        if !(self.r0 > 0.0 && self.r0 < 1.0) {
            return Err(Error::Config(format!(
                "r0 = {} must lie in (0, 1)",
                self.r0
            )));
        }
        if !(self.grid_density >= 1.0 && self.grid_density <= 16.0) {
            return Err(Error::Config(format!(
                "grid_density = {} out of [1, 16]",
                self.grid_density
            )));
        }
        Ok(())
    }
}
