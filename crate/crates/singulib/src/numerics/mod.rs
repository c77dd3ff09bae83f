//! Shared numerical kernels: quadrature, bracketed root finding, an
//! embedded Runge–Kutta integrator, finite-difference stencils and small
//! least-squares fits.

pub mod fit;
pub mod ode;
pub mod quad;
pub mod roots;
pub mod stencil;
