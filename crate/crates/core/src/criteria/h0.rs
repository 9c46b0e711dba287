use serde::{Deserialize, Serialize};

use super::{CriteriaError, Result};

/// Exponent bookkeeping for the gradient-absorption problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H0Coefficients {
    pub m: f64,
    pub p: f64,
    pub q: f64,
    pub s: f64,
    pub mu: f64,
    pub d: f64,
    pub delta: f64,
    pub delta_interval: (f64, f64),
    pub alpha: f64,
    pub beta: f64,
    /// `(2(m+d) - 3 delta) / (2(m+d))`
    pub sigma_coeff: f64,
    pub gamma: f64,
}

/// Derives and validates the coefficients; `delta` defaults to the midpoint
/// of its admissible interval.
pub fn h0_coefficients(m: f64, p: f64, q: f64, delta: Option<f64>) -> Result<H0Coefficients> {
    let regime = |msg: String| Err(CriteriaError::Regime(msg));
    if !(p >= 2.0) {
        return regime(format!("need p >= 2, got {p}"));
    }
    if !(m > 2.0 - 1.0 / p && m < p) {
        return regime(format!("need 2 - 1/p < m < p, got m = {m}, p = {p}"));
    }
    if !(q >= 2.0 && q <= p) {
        return regime(format!("need 2 <= q <= p, got q = {q}"));
    }
    let s = p - 1.0;
    let mu = (q - 1.0) / s;
    let d = (m - 1.0) / s;
    if !(mu < 1.0) {
        return Err(CriteriaError::CoefficientBound { name: "mu", value: mu });
    }
    if !(d < 1.0) {
        return Err(CriteriaError::CoefficientBound { name: "d", value: d });
    }
    let b = 2.0 * m + 3.0 * d;
    let hi = 2.0 / 3.0 * (m + d) * (b - 3.0) / (b - 1.0);
    if !(hi > 1.0) {
        return Err(CriteriaError::EmptyDeltaInterval { hi });
    }
    let delta = match delta {
        Some(v) if v > 1.0 && v < hi => v,
        Some(v) => return Err(CriteriaError::DeltaOutOfRange { delta: v, lo: 1.0, hi }),
        None => 0.5 * (1.0 + hi),
    };
    let a = 2.0 * (m + d);
    if !(a - 3.0 * delta > 0.0) {
        return Err(CriteriaError::CoefficientBound {
            name: "2(m+d) - 3 delta",
            value: a - 3.0 * delta,
        });
    }
    let alpha = (a - delta) / (a - 3.0 * delta);
    if !(b - 3.0 * alpha > 0.0) {
        return Err(CriteriaError::CoefficientBound {
            name: "2m + 3d - 3 alpha",
            value: b - 3.0 * alpha,
        });
    }
    let beta = (b - 1.0) / (b - 3.0 * alpha);
    let sigma_coeff = (a - 3.0 * delta) / a;
    let gamma = d + delta;
    for (name, value, ok) in [
        ("alpha", alpha, alpha > 1.0),
        ("beta", beta, beta > 1.0),
        ("sigma", sigma_coeff, sigma_coeff > 0.0),
        ("gamma", gamma, gamma > 1.0),
    ] {
        if !ok {
            return Err(CriteriaError::CoefficientBound { name, value });
        }
    }
    Ok(H0Coefficients {
        m,
        p,
        q,
        s,
        mu,
        d,
        delta,
        delta_interval: (1.0, hi),
        alpha,
        beta,
        sigma_coeff,
        gamma,
    })
}
