//! Hypotheses on the exponents, the constants and bounds of the blow-up,
//! global-existence and blow-up-time theorems, and numerical checks of the
//! auxiliary inequalities they rest on.

mod h0;
mod lemmas;
mod theorems;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functionals::FunctionalError;
use crate::geometry::GeometryError;
use crate::spectral::SpectralError;

pub use h0::{h0_coefficients, H0Coefficients};
pub use lemmas::{
    bubble_field, lemma4_sweep, lemma_checks, positive_polynomial_field, robin_polynomial_field, Lemma4Report,
    LemmaChecker, LemmaParams, LemmaReport, LemmaResidual,
};
pub use theorems::{
    sobolev_constant, thm1_upper_bound, thm2_global_bound, thm3_check_k2, thm3_constants, thm3_dual_check,
    thm3_lower_bound, K2DualCheck, Thm3Constants,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriteriaError {
    #[error("parameter regime violated: {0}")]
    Regime(String),
    #[error("empty delta interval: upper end {hi} is not above 1")]
    EmptyDeltaInterval { hi: f64 },
    #[error("delta = {delta} outside ({lo}, {hi})")]
    DeltaOutOfRange { delta: f64, lo: f64, hi: f64 },
    #[error("derived coefficient {name} = {value} violates its bound")]
    CoefficientBound { name: &'static str, value: f64 },
    #[error("{0} must be positive, got {1}")]
    NonPositive(&'static str, f64),
    #[error("k2 = {k2} below the threshold {threshold}")]
    K2ConditionUnmet { k2: f64, threshold: f64 },
    #[error("expected a {expected}-dimensional domain, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("field violates the Robin condition (relative mismatch {0:e})")]
    BcMismatch(f64),
    #[error("internal inconsistency: {0}")]
    Internal(String),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, CriteriaError>;

/// Outcome of one theorem evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub theorem: String,
    pub applicable: bool,
    pub constants: BTreeMap<String, f64>,
    /// Present only when `applicable`.
    pub bound: Option<f64>,
    pub diagnostics: Vec<String>,
}

impl CriteriaReport {
    pub(crate) fn new(theorem: &str) -> Self {
        CriteriaReport {
            theorem: theorem.to_string(),
            applicable: false,
            constants: BTreeMap::new(),
            bound: None,
            diagnostics: Vec::new(),
        }
    }

    pub(crate) fn set(&mut self, name: &str, value: f64) {
        self.constants.insert(name.to_string(), value);
    }
}
