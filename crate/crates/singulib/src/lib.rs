//! Classification of exponential-type nonlinearities and numerical
//! construction of singular radial solutions of `-Δu = f(u)` in the plane.
//!
//! The library is organized as a pipeline:
//!
//! 1. [`expr`] parses an exponent function `a(s)` of `f = e^{a(s)}` and
//!    evaluates it with derivatives (jets).
//! 2. [`asymptotics`] evaluates the tail expansions of `F(s) = ∫_s^∞ dτ/f(τ)`
//!    and related ratios from the jet of `a`.
//! 3. [`nonlinearity`] bundles built-in families, the transform `F` with
//!    certified quadrature, and its inverse.
//! 4. [`classify`] estimates the growth exponent `B`, the deviation functions
//!    `ε₁/ε₂` against the model problem, and checks the decay hypothesis.
//! 5. [`model`] builds the explicitly solvable model problem for a given `B`.
//! 6. [`correction`] solves the correction integral equation by Picard
//!    iteration in Emden–Fowler variables and assembles the inner profile.
//! 7. [`shooting`] extends the profile outward to a zero-Dirichlet boundary.
//! 8. [`verify`] runs residual, expansion, distributional and growth-bound
//!    checks on the assembled profile.
//!
//! The `singulib` binary drives the pipeline from JSON configs; see the
//! repository README.

pub mod asymptotics;
pub mod classify;
pub mod config;
pub mod correction;
pub mod error;
pub mod expr;
pub mod model;
pub mod nonlinearity;
pub mod numerics;
pub mod pipeline;
pub mod profile;
pub mod shooting;
pub mod verify;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
