//! Porous-medium reaction-diffusion problems `u_t = Laplace(u^m) + g(u, |grad u|)`
//! with Dirichlet or Robin boundary conditions: an explicit nonnegativity
//! preserving simulator, the energy functionals that govern blow-up, and
//! calculators for blow-up, global-existence and blow-up-time criteria.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod dynamics;
pub mod functionals;
pub mod geometry;
pub mod harness;
pub mod spectral;

pub use geometry::{Boundary, Domain, DomainKind, Field, StarConstants};
