//! Integral diagnostics of a solution and their time series.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ProblemSpec, SourceKind};
use crate::geometry::{pow_nonneg, Boundary, Domain, Field, GeometryError};

/// Column order of the trace CSV.
pub const TRACE_COLUMNS: [&str; 9] = [
    "t",
    "dt",
    "sup_u",
    "phi",
    "psi",
    "w_measure",
    "grad_energy",
    "boundary_integral",
    "clamped_mass",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error("psi is defined for the power-absorption source only, got {0}")]
    WrongSource(&'static str),
    #[error("W needs m (p - 1) >= 1, got {0}")]
    ExponentBelowOne(f64),
    #[error("trace times must increase strictly: {next} after {last}")]
    NonMonotoneTime { last: f64, next: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, FunctionalError>;

/// `int u^(m+1)`
pub fn phi(u: &Field, m: f64, domain: &Domain) -> Result<f64> {
    Ok(domain.integrate_volume_with(&u.values, |v| pow_nonneg(v, m + 1.0))?)
}

/// `int |grad u^m|^2` with the node gradient of `u^m`.
pub fn grad_energy(u: &Field, m: f64, domain: &Domain) -> Result<f64> {
    let um: Vec<f64> = u.values.iter().map(|v| pow_nonneg(*v, m)).collect();
    let g2 = domain.gradient_norm_sq(&um)?;
    Ok(domain.integrate_volume(&g2)?)
}

/// `int_dOmega u^(2m) ds`
pub fn boundary_integral(u: &Field, m: f64, domain: &Domain) -> Result<f64> {
    Ok(domain.integrate_boundary(&u.values, 2.0 * m)?)
}

/// `W = int u^(m (p-1))`
pub fn w_measure(u: &Field, m: f64, p: f64, domain: &Domain) -> Result<f64> {
    let exponent = m * (p - 1.0);
    if !(exponent >= 1.0) {
        return Err(FunctionalError::ExponentBelowOne(exponent));
    }
    Ok(domain.integrate_volume_with(&u.values, |v| pow_nonneg(v, exponent))?)
}

/// The four signed contributions to `psi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiTerms {
    /// `-(p+m)/(2m) int |grad u^m|^2`
    pub gradient: f64,
    /// `k1 int u^(p+m)`
    pub reaction: f64,
    /// `-k2 int u^(q+m)`
    pub absorption: f64,
    /// `-h (p+m)/2 int_dOmega u^(2m)`
    pub boundary: f64,
}

impl PsiTerms {
    pub fn total(&self) -> f64 {
        self.gradient + self.reaction + self.absorption + self.boundary
    }
}

pub fn psi_terms(u: &Field, spec: &ProblemSpec, domain: &Domain) -> Result<PsiTerms> {
    if spec.source != SourceKind::PowerAbsorption {
        return Err(FunctionalError::WrongSource(spec.source.name()));
    }
    let (m, p, q) = (spec.m, spec.p, spec.q);
    let gradient = -(p + m) / (2.0 * m) * grad_energy(u, m, domain)?;
    let reaction = spec.k1 * domain.integrate_volume_with(&u.values, |v| pow_nonneg(v, p + m))?;
    let absorption = -spec.k2 * domain.integrate_volume_with(&u.values, |v| pow_nonneg(v, q + m))?;
    let boundary = match spec.boundary {
        Boundary::Robin { h } => -h * (p + m) / 2.0 * boundary_integral(u, m, domain)?,
        Boundary::Dirichlet => 0.0,
    };
    Ok(PsiTerms {
        gradient,
        reaction,
        absorption,
        boundary,
    })
}

pub fn psi(u: &Field, spec: &ProblemSpec, domain: &Domain) -> Result<f64> {
    Ok(psi_terms(u, spec, domain)?.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub dt: f64,
    pub sup_u: f64,
    pub phi: f64,
    pub psi: Option<f64>,
    pub w_measure: Option<f64>,
    pub grad_energy: f64,
    pub boundary_integral: f64,
    /// Cumulative mass removed by clamping.
    pub clamped_mass: f64,
}

impl TraceRow {
    pub fn evaluate(u: &Field, spec: &ProblemSpec, domain: &Domain, dt: f64, clamped_mass: f64) -> Result<Self> {
        let m = spec.m;
        let psi = match spec.source {
            SourceKind::PowerAbsorption => Some(psi(u, spec, domain)?),
            _ => None,
        };
        let w = if m * (spec.p - 1.0) >= 1.0 {
            Some(w_measure(u, m, spec.p, domain)?)
        } else {
            None
        };
        Ok(TraceRow {
            t: u.time,
            dt,
            sup_u: u.sup(),
            phi: phi(u, m, domain)?,
            psi,
            w_measure: w,
            grad_energy: grad_energy(u, m, domain)?,
            boundary_integral: boundary_integral(u, m, domain)?,
            clamped_mass,
        })
    }

    /// Row with only time and sup norm filled in.
    pub fn bare(t: f64, sup_u: f64) -> Self {
        TraceRow {
            t,
            dt: 0.0,
            sup_u,
            phi: 0.0,
            psi: None,
            w_measure: None,
            grad_energy: 0.0,
            boundary_integral: 0.0,
            clamped_mass: 0.0,
        }
    }

    fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.t,
            self.dt,
            self.sup_u,
            self.phi,
            opt(self.psi),
            opt(self.w_measure),
            self.grad_energy,
            self.boundary_integral,
            self.clamped_mass
        )
    }
}

/// Time series of [`TraceRow`]s with strictly increasing `t`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    rows: Vec<TraceRow>,
}

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    pub fn push(&mut self, row: TraceRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if !(row.t > last.t) {
                return Err(FunctionalError::NonMonotoneTime { last: last.t, next: row.t });
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// The last `n` rows (fewer if the trace is shorter).
    pub fn tail(&self, n: usize) -> &[TraceRow] {
        &self.rows[self.rows.len().saturating_sub(n)..]
    }

    /// CSV text with a header line; header only when empty.
    pub fn to_csv(&self) -> String {
        let mut out = TRACE_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        out
    }
}

/// A pair of consecutive rows where a monotonicity property fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    /// Size of the failure relative to the local scale of the functional.
    pub relative: f64,
}

/// Rows where `psi` drops by more than `rel_per_time * |psi| * dt`.
pub fn psi_monotonicity_violations(trace: &Trace, rel_per_time: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    for w in trace.rows().windows(2) {
        let (Some(a), Some(b)) = (w[0].psi, w[1].psi) else { continue };
        let dt = w[1].t - w[0].t;
        let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        let allowed = rel_per_time * scale * dt + 1e-12 * scale;
        if b < a - allowed {
            out.push(Violation {
                t: w[1].t,
                relative: (a - b) / (scale * dt.max(f64::MIN_POSITIVE)),
            });
        }
    }
    out
}

/// Rows where the difference quotient of `phi` falls below `psi` by more
/// than `rel_tol` of the local scale.
pub fn phi_rate_violations(trace: &Trace, rel_tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    for w in trace.rows().windows(2) {
        let (Some(a), Some(b)) = (w[0].psi, w[1].psi) else { continue };
        let dt = w[1].t - w[0].t;
        if !(dt > 0.0) {
            continue;
        }
        let rate = (w[1].phi - w[0].phi) / dt;
        // psi is nondecreasing, so the left value bounds it on the interval
        let floor = a.min(b);
        let scale = rate.abs().max(floor.abs()).max(f64::MIN_POSITIVE);
        if rate < floor - rel_tol * scale {
            out.push(Violation {
                t: w[1].t,
                relative: (floor - rate) / scale,
            });
        }
    }
    out
}
