use serde::{Deserialize, Serialize};

use super::{Barenblatt, DynamicsError, Result};
use crate::geometry::{Boundary, Domain, DomainKind, Field};
use crate::spectral::{dirichlet_lambda1, robin_xi1};

/// Named initial profiles, or explicit grid values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum InitialData {
    /// `amplitude` times the first eigenfunction (maximum 1) matching the
    /// boundary condition of the problem.
    Eigenfunction { amplitude: f64 },
    /// `amplitude (1 - r^2/R^2)_+^2` around the domain center, `R` the
    /// distance from the center to the boundary.
    Bump { amplitude: f64 },
    /// `amplitude prod_k sin(pi x_k / L_k)` on intervals and boxes.
    Sine { amplitude: f64 },
    /// Barenblatt profile of the given mass at time `time`, centred at the
    /// domain center.
    Barenblatt { mass: f64, time: f64 },
    /// Spatially constant data (Robin problems only).
    Constant { value: f64 },
    Gridded { values: Vec<f64> },
}

impl InitialData {
    pub fn name(&self) -> &'static str {
        match self {
            InitialData::Eigenfunction { .. } => "eigenfunction",
            InitialData::Bump { .. } => "bump",
            InitialData::Sine { .. } => "sine",
            InitialData::Barenblatt { .. } => "barenblatt",
            InitialData::Constant { .. } => "constant",
            InitialData::Gridded { .. } => "gridded",
        }
    }

    pub fn materialize(&self, domain: &Domain, boundary: Boundary, m: f64) -> Result<Field> {
        let bad = |msg: &str| Err(DynamicsError::InvalidInitialData(msg.to_string()));
        let dim = domain.dimension();
        let center = domain.center().to_vec();
        let values = match *self {
            InitialData::Eigenfunction { amplitude } => {
                let eig = match boundary {
                    Boundary::Dirichlet => dirichlet_lambda1(domain)?,
                    Boundary::Robin { h } => robin_xi1(domain, h)?,
                };
                eig.eigenvector.scaled(amplitude).values
            }
            InitialData::Bump { amplitude } => {
                let radius = domain.star_constants().support;
                domain.sample(|x| {
                    let r2: f64 = x.iter().zip(&center).map(|(a, c)| (a - c).powi(2)).sum();
                    amplitude * (1.0 - r2 / (radius * radius)).max(0.0).powi(2)
                })
            }
            InitialData::Sine { amplitude } => {
                if domain.kind() == DomainKind::Ball {
                    return bad("the sine profile is defined on intervals and boxes only");
                }
                let lengths = domain.extents().to_vec();
                domain.sample(|x| {
                    let prod: f64 = x
                        .iter()
                        .zip(&lengths)
                        .map(|(a, l)| (std::f64::consts::PI * a / l).sin().max(0.0))
                        .product();
                    amplitude * prod
                })
            }
            InitialData::Barenblatt { mass, time } => {
                let profile = Barenblatt::new(m, dim, mass)?;
                let shifted: Vec<f64> = domain.sample(|x| {
                    let r2: f64 = x.iter().zip(&center).map(|(a, c)| (a - c).powi(2)).sum();
                    profile.value_at_radius_sq(r2, time).unwrap_or(f64::NAN)
                });
                if shifted.iter().any(|v| v.is_nan()) {
                    return Err(DynamicsError::BarenblattDomain { t: time, m });
                }
                shifted
            }
            InitialData::Constant { value } => {
                if boundary == Boundary::Dirichlet {
                    return bad("constant data is only compatible with Robin problems");
                }
                domain.sample(|_| value)
            }
            InitialData::Gridded { ref values } => {
                if values.len() != domain.len() {
                    return bad(&format!(
                        "gridded data has {} values, the grid has {} nodes",
                        values.len(),
                        domain.len()
                    ));
                }
                values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| if domain.is_active(i) { *v } else { 0.0 })
                    .collect()
            }
        };
        Ok(Field::new(values, 0.0))
    }
}
