use statrs::function::gamma::gamma;

use super::{DynamicsError, Result};

/// Self-similar source solution of `u_t = Laplace(u^m)` in `R^N`:
/// `U = t^-alpha (C - kappa |x|^2 t^(-2 alpha / N))_+^(1/(m-1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barenblatt {
    pub m: f64,
    pub dim: usize,
    pub mass: f64,
    pub alpha: f64,
    pub kappa: f64,
    /// Constant `C`, fixed by the mass.
    pub c: f64,
}

impl Barenblatt {
    pub fn new(m: f64, dim: usize, mass: f64) -> Result<Self> {
        if !(m > 1.0) {
            return Err(DynamicsError::BarenblattDomain { t: f64::NAN, m });
        }
        if !(mass > 0.0) || dim == 0 {
            return Err(DynamicsError::InvalidInitialData(format!(
                "Barenblatt mass must be positive, got {mass}"
            )));
        }
        let n = dim as f64;
        let alpha = n / (n * (m - 1.0) + 2.0);
        let kappa = alpha * (m - 1.0) / (2.0 * m * n);
        let k = 1.0 / (m - 1.0);
        // int_{R^N} (1 - |y|^2)_+^k dy
        let omega = std::f64::consts::PI.powf(n / 2.0) * gamma(k + 1.0) / gamma(k + 1.0 + n / 2.0);
        let c = (mass * kappa.powf(n / 2.0) / omega).powf(1.0 / (k + n / 2.0));
        Ok(Barenblatt {
            m,
            dim,
            mass,
            alpha,
            kappa,
            c,
        })
    }

    pub fn value_at_radius_sq(&self, r2: f64, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(DynamicsError::BarenblattDomain { t, m: self.m });
        }
        let n = self.dim as f64;
        let inner = self.c - self.kappa * r2 * t.powf(-2.0 * self.alpha / n);
        if inner <= 0.0 {
            return Ok(0.0);
        }
        Ok(t.powf(-self.alpha) * inner.powf(1.0 / (self.m - 1.0)))
    }

    pub fn value(&self, x: &[f64], t: f64) -> Result<f64> {
        self.value_at_radius_sq(x.iter().map(|v| v * v).sum(), t)
    }

    /// Radius of the support at time `t`.
    pub fn support_radius(&self, t: f64) -> f64 {
        (self.c / self.kappa).sqrt() * t.powf(self.alpha / self.dim as f64)
    }
}

/// Barenblatt profile of the given mass at `x` (dimension `x.len()`).
pub fn barenblatt_reference(x: &[f64], t: f64, m: f64, mass: f64) -> Result<f64> {
    Barenblatt::new(m, x.len(), mass)?.value(x, t)
}
