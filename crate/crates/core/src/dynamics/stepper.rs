use super::source::source_into;
use super::{DynamicsError, ProblemSpec, Result, SourceKind};
use crate::geometry::{pow_nonneg, Boundary, Domain, Field};
use crate::spectral::MIN_GAP_FRACTION;

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub field: Field,
    /// Mass removed by clamping negative values to zero, `sum w_i max(-u_i, 0)`.
    pub clamped_mass: f64,
}

/// Explicit finite-volume update operator for one problem on one domain.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    domain: &'a Domain,
    spec: ProblemSpec,
    fixed: Vec<bool>,
    inv_volume: Vec<f64>,
    /// `(node, h * area * |nu_k|)` for Robin, `(node, area / gap)` for
    /// Dirichlet walls on curved boundaries.
    walls: Vec<(usize, f64)>,
}

impl<'a> Stepper<'a> {
    pub fn new(domain: &'a Domain, spec: &ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let fixed: Vec<bool> = (0..domain.len()).map(|i| domain.is_fixed(i, spec.boundary)).collect();
        let inv_volume = domain
            .control_volumes()
            .iter()
            .map(|v| if *v > 0.0 { 1.0 / v } else { 0.0 })
            .collect();
        let spacing = domain.min_spacing();
        let walls = domain
            .walls()
            .iter()
            .filter(|w| !fixed[w.node])
            .filter_map(|w| match spec.boundary {
                Boundary::Robin { h } => Some((w.node, h * w.area * w.normal_cos)),
                Boundary::Dirichlet if w.gap > 0.0 => {
                    Some((w.node, w.area / w.gap.max(MIN_GAP_FRACTION * spacing)))
                }
                Boundary::Dirichlet => None,
            })
            .collect();
        Ok(Stepper {
            domain,
            spec: spec.clone(),
            fixed,
            inv_volume,
            walls,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    fn mobility(&self, u: &[f64]) -> Vec<f64> {
        let m = self.spec.m;
        u.iter().map(|v| m * pow_nonneg(*v, m - 1.0)).collect()
    }

    /// Largest step for which the explicit update keeps every node
    /// nonnegative (diffusion and power absorption), together with the
    /// advective limit of gradient absorption.
    pub fn positivity_limit(&self, u: &[f64]) -> f64 {
        let spec = &self.spec;
        let mob = self.mobility(u);
        let mut diag = vec![0.0; u.len()];
        for f in self.domain.faces() {
            let c = f.conductance * 0.5 * (mob[f.a] + mob[f.b]);
            diag[f.a] += c;
            diag[f.b] += c;
        }
        for &(i, coef) in &self.walls {
            diag[i] += match spec.boundary {
                Boundary::Robin { .. } => coef * mob[i],
                Boundary::Dirichlet => coef * 0.5 * mob[i],
            };
        }
        let grad2 = match spec.source {
            SourceKind::GradientAbsorption if spec.k2 > 0.0 => self.domain.gradient_norm_sq(u).ok(),
            _ => None,
        };
        let dx = self.domain.min_spacing();
        let mut worst: f64 = 0.0;
        for i in 0..u.len() {
            if self.fixed[i] {
                continue;
            }
            let mut rate = diag[i] * self.inv_volume[i];
            match spec.source {
                SourceKind::PowerAbsorption => rate += spec.k2 * pow_nonneg(u[i], spec.q - 1.0),
                SourceKind::GradientAbsorption => {
                    if let Some(g) = &grad2 {
                        rate += spec.k2 * spec.q * pow_nonneg(g[i], (spec.q - 1.0) / 2.0) / dx;
                    }
                }
                SourceKind::None => {}
            }
            worst = worst.max(rate);
        }
        if worst > 0.0 {
            1.0 / worst
        } else {
            f64::INFINITY
        }
    }

    /// Step keeping the relative growth from the reaction term below `growth`.
    pub fn reaction_limit(&self, u: &[f64], growth: f64) -> f64 {
        let spec = &self.spec;
        if spec.source == SourceKind::None || spec.k1 == 0.0 {
            return f64::INFINITY;
        }
        let peak = u
            .iter()
            .zip(&self.fixed)
            .filter(|(_, f)| !**f)
            .map(|(v, _)| *v)
            .fold(0.0, f64::max);
        let rate = spec.k1 * spec.p * pow_nonneg(peak, spec.p - 1.0);
        if rate > 0.0 {
            growth / rate
        } else {
            f64::INFINITY
        }
    }

    /// `d u / d t` of the semi-discrete scheme.
    pub fn rate(&self, u: &[f64]) -> Result<Vec<f64>> {
        let spec = &self.spec;
        let mob = self.mobility(u);
        let mut acc = vec![0.0; u.len()];
        for f in self.domain.faces() {
            let flux = f.conductance * 0.5 * (mob[f.a] + mob[f.b]) * (u[f.b] - u[f.a]);
            acc[f.a] += flux;
            acc[f.b] -= flux;
        }
        for &(i, coef) in &self.walls {
            acc[i] -= match spec.boundary {
                Boundary::Robin { .. } => coef * spec.m * pow_nonneg(u[i], spec.m),
                Boundary::Dirichlet => coef * 0.5 * mob[i] * u[i],
            };
        }
        let mut g = vec![0.0; u.len()];
        source_into(u, spec, self.domain, &mut g)?;
        for i in 0..u.len() {
            acc[i] = if self.fixed[i] {
                0.0
            } else {
                acc[i] * self.inv_volume[i] + g[i]
            };
        }
        Ok(acc)
    }

    /// One forward Euler step of length `dt`.
    pub fn advance(&self, u: &Field, dt: f64) -> Result<StepOutcome> {
        if !(dt > 0.0) {
            return Err(DynamicsError::NonPositiveStep(dt));
        }
        let limit = self.positivity_limit(&u.values);
        if dt > limit * (1.0 + 1e-12) {
            return Err(DynamicsError::CflViolation { dt, limit });
        }
        let rate = self.rate(&u.values)?;
        let weights = self.domain.volume_weights();
        let mut clamped = 0.0;
        let mut values = Vec::with_capacity(u.values.len());
        for i in 0..u.values.len() {
            let mut v = if self.fixed[i] { 0.0 } else { u.values[i] + dt * rate[i] };
            if !v.is_finite() {
                return Err(DynamicsError::NonFinite(u.time + dt));
            }
            if v < 0.0 {
                clamped += weights[i] * -v;
                v = 0.0;
            }
            values.push(v);
        }
        Ok(StepOutcome {
            field: Field::new(values, u.time + dt),
            clamped_mass: clamped,
        })
    }
}

/// Advances `u` by one explicit step of length `dt`.
pub fn step(u: &Field, spec: &ProblemSpec, domain: &Domain, dt: f64) -> Result<StepOutcome> {
    Stepper::new(domain, spec)?.advance(u, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::InitialData;
    use crate::geometry::DomainKind;

    fn spec(boundary: Boundary, source: SourceKind) -> ProblemSpec {
        ProblemSpec {
            m: 2.0,
            p: 3.0,
            q: 2.0,
            k1: 1.0,
            k2: 1.0,
            boundary,
            source,
            initial: InitialData::Bump { amplitude: 1.0 },
        }
    }

    #[test]
    fn dirichlet_nodes_stay_zero_and_mass_decays() {
        let d = Domain::new(DomainKind::Box, &[1.0, 1.0], 2, None, 21).unwrap();
        let s = spec(Boundary::Dirichlet, SourceKind::None);
        let stepper = Stepper::new(&d, &s).unwrap();
        let mut u = s.initial_field(&d).unwrap();
        let mut mass = d.integrate_volume(&u.values).unwrap();
        for _ in 0..200 {
            let dt = 0.9 * stepper.positivity_limit(&u.values);
            let out = stepper.advance(&u, dt).unwrap();
            assert_eq!(out.clamped_mass, 0.0);
            u = out.field;
            for i in 0..d.len() {
                if d.on_boundary()[i] {
                    assert_eq!(u.values[i], 0.0);
                }
            }
            let next = d.integrate_volume(&u.values).unwrap();
            assert!(next <= mass * (1.0 + 1e-13));
            mass = next;
        }
    }

    #[test]
    fn robin_flux_drains_constant_state() {
        let d = Domain::new(DomainKind::Interval, &[1.0], 1, None, 11).unwrap();
        let mut s = spec(Boundary::Robin { h: 2.0 }, SourceKind::None);
        s.initial = InitialData::Constant { value: 1.0 };
        let stepper = Stepper::new(&d, &s).unwrap();
        let u = s.initial_field(&d).unwrap();
        let rate = stepper.rate(&u.values).unwrap();
        // total outflow h m u^m at both ends
        let total: f64 = rate.iter().zip(d.control_volumes()).map(|(r, v)| r * v).sum();
        assert!((total + 2.0 * 2.0 * 2.0).abs() < 1e-12, "{total}");
    }

    #[test]
    fn rejects_steps_beyond_positivity_limit() {
        let d = Domain::new(DomainKind::Interval, &[1.0], 1, None, 41).unwrap();
        let s = spec(Boundary::Dirichlet, SourceKind::PowerAbsorption);
        let u = s.initial_field(&d).unwrap();
        let limit = Stepper::new(&d, &s).unwrap().positivity_limit(&u.values);
        assert!(matches!(step(&u, &s, &d, 2.0 * limit), Err(DynamicsError::CflViolation { .. })));
        assert!(matches!(step(&u, &s, &d, 0.0), Err(DynamicsError::NonPositiveStep(_))));
        assert!(step(&u, &s, &d, 0.5 * limit).is_ok());
    }

    #[test]
    fn larger_absorption_gives_smaller_solution() {
        let d = Domain::new(DomainKind::Interval, &[1.0], 1, None, 41).unwrap();
        let mut weak = spec(Boundary::Robin { h: 1.0 }, SourceKind::GradientAbsorption);
        weak.initial = InitialData::Eigenfunction { amplitude: 1.0 };
        let mut strong = weak.clone();
        strong.k2 = 4.0;
        let a = Stepper::new(&d, &weak).unwrap();
        let b = Stepper::new(&d, &strong).unwrap();
        let mut ua = weak.initial_field(&d).unwrap();
        let mut ub = ua.clone();
        for _ in 0..400 {
            let dt = 0.4 * a.positivity_limit(&ua.values).min(b.positivity_limit(&ub.values));
            ua = a.advance(&ua, dt).unwrap().field;
            ub = b.advance(&ub, dt).unwrap().field;
        }
        for (x, y) in ua.values.iter().zip(&ub.values) {
            assert!(y <= &(x + 1e-12), "{y} > {x}");
        }
    }
}
