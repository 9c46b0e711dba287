//! Time integration of `u_t = Laplace(u^m) + g(u, |grad u|)` with
//! `k u_nu + h u = 0` on the boundary.
//!
//! The scheme is explicit forward Euler on the vertex-centred finite-volume
//! form `div(mobility grad u)` with mobility `m u^{m-1}` averaged
//! arithmetically onto faces. Robin walls carry the flux `h m u^m` (the
//! condition on `u` transported to `u^m`), Dirichlet box nodes are pinned to
//! zero. Time steps are bounded by the local positivity limit of every node so
//! that the diffusion part never produces negative values.

mod barenblatt;
mod blowup;
mod initial;
mod runner;
mod source;
mod stepper;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::geometry::{Boundary, Field};
use crate::geometry::GeometryError;
use crate::spectral::SpectralError;

pub use barenblatt::{barenblatt_reference, Barenblatt};
pub use blowup::{detect_blowup, extrapolate_pole, BlowUpEstimate};
pub use initial::InitialData;
pub use runner::{run, RunOutput, SimConfig, SimStatus};
pub use source::evaluate_source;
pub use stepper::{step, StepOutcome, Stepper};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),
    #[error("time step {dt:e} exceeds the positivity limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("non-finite value after step at t = {0}")]
    NonFinite(f64),
    #[error("no threshold crossing: sup u = {sup:e} below U_max = {u_max:e}")]
    NoCrossing { sup: f64, u_max: f64 },
    #[error("Barenblatt profile requires t > 0 and m > 1 (t = {t}, m = {m})")]
    BarenblattDomain { t: f64, m: f64 },
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

pub type Result<T> = std::result::Result<T, DynamicsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// `g = 0`
    None,
    /// `g = k1 u^p - k2 u^q`
    PowerAbsorption,
    /// `g = k1 u^p - k2 |grad u|^q`
    GradientAbsorption,
}

impl SourceKind {
    pub fn name(self) -> &'static str {
        match self {
            SourceKind::None => "none",
            SourceKind::PowerAbsorption => "power_absorption",
            SourceKind::GradientAbsorption => "gradient_absorption",
        }
    }
}

impl std::str::FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "none" => Ok(SourceKind::None),
            "power_absorption" => Ok(SourceKind::PowerAbsorption),
            "gradient_absorption" => Ok(SourceKind::GradientAbsorption),
            other => Err(format!("unknown source kind `{other}`")),
        }
    }
}

/// All parameters of one reaction-diffusion problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub m: f64,
    pub p: f64,
    pub q: f64,
    pub k1: f64,
    pub k2: f64,
    pub boundary: Boundary,
    pub source: SourceKind,
    pub initial: InitialData,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DynamicsError::InvalidProblem(msg));
        if !(self.m > 1.0) {
            return bad(format!("m must exceed 1, got {}", self.m));
        }
        if !(self.p >= 1.0) || !(self.q >= 1.0) {
            return bad(format!("p and q must be at least 1, got p = {}, q = {}", self.p, self.q));
        }
        if !(self.k1 >= 0.0) || !(self.k2 >= 0.0) {
            return bad(format!("k1 and k2 must be nonnegative, got {} and {}", self.k1, self.k2));
        }
        if let Boundary::Robin { h } = self.boundary {
            if !(h > 0.0) {
                return bad(format!("Robin coefficient h must be positive, got {h}"));
            }
        }
        Ok(())
    }

    /// `h` of the Robin condition, `None` for Dirichlet.
    pub fn robin_h(&self) -> Option<f64> {
        match self.boundary {
            Boundary::Robin { h } => Some(h),
            Boundary::Dirichlet => None,
        }
    }

    /// Materialises and validates the initial field on `domain`.
    pub fn initial_field(&self, domain: &crate::geometry::Domain) -> Result<Field> {
        self.validate()?;
        let mut field = self.initial.materialize(domain, self.boundary, self.m)?;
        if field.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(DynamicsError::InvalidInitialData("u0 must be finite and nonnegative".into()));
        }
        if field.sup() <= 0.0 {
            return Err(DynamicsError::InvalidInitialData("u0 must not vanish identically".into()));
        }
        if self.boundary == Boundary::Dirichlet && domain.boundary_on_nodes() {
            let edge = domain
                .on_boundary()
                .iter()
                .zip(&field.values)
                .filter(|(b, _)| **b)
                .map(|(_, v)| *v)
                .fold(0.0, f64::max);
            if edge > 1e-12 * field.sup() {
                return Err(DynamicsError::InvalidInitialData(format!(
                    "Dirichlet problems need u0 = 0 on the boundary (max boundary value {edge:e})"
                )));
            }
        }
        for (i, v) in field.values.iter_mut().enumerate() {
            if domain.is_fixed(i, self.boundary) {
                *v = 0.0;
            }
        }
        Ok(field)
    }
}
