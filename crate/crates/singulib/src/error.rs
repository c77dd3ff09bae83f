//! Crate-wide error type.

use thiserror::Error;

pub use crate::expr::{EvalError, ParseError};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("tail expansion not valid at s = {s}: |a2/a1| = {ratio:.3e} exceeds {limit}")]
    TailGuard { s: f64, ratio: f64, limit: f64 },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("value underflows f64 range (log value {log_value:.6e}); use the log-space interface")]
    Underflow { log_value: f64 },

    #[error("no bracket found for root: {0}")]
    BracketNotFound(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("sub-exponential borderline: 1 - f'F = 0 identically, growth exponent B undefined")]
    SubExponentialBorderline,

    #[error("classification inconclusive: {0}")]
    Inconclusive(String),

    #[error("no contraction within budget: {diagnostic}")]
    NoContraction { diagnostic: String },

    #[error("rho_max too small: truncation tail estimate {estimate:.3e} exceeds budget {budget:.3e}")]
    RhoMaxTooSmall { estimate: f64, budget: f64 },

    #[error("ODE integration failed: {0}")]
    Integration(String),

    #[error("no Dirichlet radius found before r = {r_budget}")]
    NoDirichletRadius { r_budget: f64 },

    #[error("profile segments mismatch at r = {at_r}: |delta| = {delta:.3e}")]
    ProfileMismatch { at_r: f64, delta: f64 },

    #[error("profile has too few nodes for this check (need {need}, have {have})")]
    InsufficientNodes { need: usize, have: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Other(String),
}

impl Error {
    /// Exit code the CLI maps this error to. Decay-hypothesis failures are
    /// expected outcomes and get their own code.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoContraction { diagnostic } if diagnostic.contains("decay hypothesis") => 2,
            _ => 1,
        }
    }
}
