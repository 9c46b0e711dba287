use serde::{Deserialize, Serialize};

use super::blowup::{detect_blowup, estimate_from_tail, BlowUpEstimate};
use super::stepper::Stepper;
use super::{DynamicsError, ProblemSpec, Result};
use crate::functionals::{Trace, TraceRow};
use crate::geometry::{Domain, Field};

/// Rows are also recorded whenever `sup u` has grown by this factor since
/// the last recorded row.
const GROWTH_ROW_FACTOR: f64 = 1.05;
/// Clamped mass above this fraction of the peak `int u` flags the run.
const CLAMP_FLAG_FRACTION: f64 = 1e-8;

/// Time integration controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_end: f64,
    /// Blow-up threshold on `sup u`.
    pub u_max: f64,
    /// Trace rows used by the blow-up extrapolation.
    pub window: usize,
    /// Record a trace row every `cadence` steps.
    pub cadence: usize,
    /// Fraction of the positivity limit used as time step.
    pub cfl: f64,
    /// Bound on the relative growth per step from the reaction term.
    pub growth: f64,
    /// Fixed step; must respect the positivity limit at every step.
    pub fixed_dt: Option<f64>,
    pub max_steps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_end: 1.0,
            u_max: 1e8,
            window: 20,
            cadence: 50,
            cfl: 0.45,
            growth: 0.01,
            fixed_dt: None,
            max_steps: 50_000_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DynamicsError::InvalidConfig(msg));
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.u_max > 0.0) {
            return bad(format!("u_max must be positive, got {}", self.u_max));
        }
        if self.cadence == 0 {
            return bad("cadence must be positive".into());
        }
        if self.window < 4 {
            return bad(format!("window must hold at least 4 rows, got {}", self.window));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.growth > 0.0) {
            return bad(format!("growth must be positive, got {}", self.growth));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0) {
                return bad(format!("fixed dt must be positive, got {dt}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SimStatus {
    RanToEnd {
        t_end: f64,
    },
    BlowUpDetected {
        t_estimate: f64,
        sup_at_stop: f64,
        t_stop: f64,
        estimate: BlowUpEstimate,
    },
    StepFailure {
        t: f64,
        reason: String,
    },
}

impl SimStatus {
    pub fn blowup_time(&self) -> Option<f64> {
        match self {
            SimStatus::BlowUpDetected { t_estimate, .. } => Some(*t_estimate),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Trace,
    pub status: SimStatus,
    pub final_field: Field,
    pub steps: usize,
    pub clamped_mass: f64,
    /// Diagnostics that do not stop the run, such as excessive clamping.
    pub flags: Vec<String>,
}

struct Recorder<'a> {
    spec: &'a ProblemSpec,
    domain: &'a Domain,
    trace: Trace,
    last_sup: f64,
    peak_mass: f64,
}

impl Recorder<'_> {
    fn record(&mut self, u: &Field, dt: f64, clamped: f64) -> Result<()> {
        if self.trace.last().is_some_and(|r| !(u.time > r.t)) {
            return Ok(());
        }
        let row = TraceRow::evaluate(u, self.spec, self.domain, dt, clamped)
            .map_err(|e| DynamicsError::InvalidProblem(e.to_string()))?;
        self.last_sup = row.sup_u;
        self.peak_mass = self.peak_mass.max(self.domain.integrate_volume(&u.values)?);
        self.trace.push(row).expect("times checked above");
        Ok(())
    }
}

/// Integrates `spec` on `domain` until `t_end`, blow-up, or failure.
///
/// Invalid inputs are errors; numerical breakdown is reported through
/// [`SimStatus::StepFailure`].
pub fn run(spec: &ProblemSpec, domain: &Domain, config: &SimConfig) -> Result<RunOutput> {
    config.validate()?;
    let stepper = Stepper::new(domain, spec)?;
    let mut u = spec.initial_field(domain)?;
    let mut rec = Recorder {
        spec,
        domain,
        trace: Trace::new(),
        last_sup: 0.0,
        peak_mass: 0.0,
    };
    rec.record(&u, 0.0, 0.0)?;
    let sup0 = u.sup();
    let mut clamped = 0.0;
    let mut steps = 0usize;
    let mut dt = 0.0;
    let mut flags = Vec::new();

    let status = loop {
        let t = u.time;
        if t >= config.t_end * (1.0 - 1e-14) {
            rec.record(&u, dt, clamped)?;
            break SimStatus::RanToEnd { t_end: t };
        }
        if steps >= config.max_steps {
            rec.record(&u, dt, clamped)?;
            break SimStatus::StepFailure {
                t,
                reason: format!("step budget of {} exhausted", config.max_steps),
            };
        }
        let limit = stepper.positivity_limit(&u.values);
        dt = match config.fixed_dt {
            Some(fixed) => {
                if fixed > limit {
                    rec.record(&u, dt, clamped)?;
                    break SimStatus::StepFailure {
                        t,
                        reason: format!("fixed dt {fixed:e} exceeds the positivity limit {limit:e}"),
                    };
                }
                fixed
            }
            None => (config.cfl * limit).min(stepper.reaction_limit(&u.values, config.growth)),
        };
        dt = dt.min(config.t_end - t);
        // below this the clock no longer advances reliably
        let resolution = 64.0 * f64::EPSILON * t.max(f64::MIN_POSITIVE);
        if !(dt > resolution) {
            rec.record(&u, dt, clamped)?;
            break underflow_status(&rec.trace, &u, sup0, config, "time step underflow");
        }
        match stepper.advance(&u, dt) {
            Ok(out) => {
                clamped += out.clamped_mass;
                u = out.field;
            }
            Err(DynamicsError::NonFinite(_)) => {
                rec.record(&u, dt, clamped)?;
                break underflow_status(&rec.trace, &u, sup0, config, "non-finite values");
            }
            Err(e) => {
                rec.record(&u, dt, clamped)?;
                break SimStatus::StepFailure {
                    t,
                    reason: e.to_string(),
                };
            }
        }
        steps += 1;
        let sup = u.sup();
        if steps.is_multiple_of(config.cadence) || sup >= GROWTH_ROW_FACTOR * rec.last_sup || sup >= config.u_max {
            rec.record(&u, dt, clamped)?;
        }
        if sup >= config.u_max {
            rec.record(&u, dt, clamped)?;
            let est = detect_blowup(rec.trace.tail(config.window), config.u_max)?;
            break blowup_status(est, &u);
        }
    };

    if clamped > CLAMP_FLAG_FRACTION * rec.peak_mass {
        flags.push(format!(
            "clamped mass {clamped:e} exceeds {CLAMP_FLAG_FRACTION:e} of the peak mass {:e}",
            rec.peak_mass
        ));
    }
    Ok(RunOutput {
        trace: rec.trace,
        status,
        final_field: u,
        steps,
        clamped_mass: clamped,
        flags,
    })
}

fn blowup_status(est: BlowUpEstimate, u: &Field) -> SimStatus {
    SimStatus::BlowUpDetected {
        t_estimate: est.t_estimate,
        sup_at_stop: u.sup(),
        t_stop: u.time,
        estimate: est,
    }
}

/// Step underflow counts as blow-up only if `sup u` has been growing and is
/// far above its initial value.
fn underflow_status(trace: &Trace, u: &Field, sup0: f64, config: &SimConfig, what: &str) -> SimStatus {
    let tail = trace.tail(config.window);
    let growing = tail.len() >= 2 && tail.windows(2).all(|w| w[1].sup_u > w[0].sup_u);
    if growing && u.sup() >= 1e3 * sup0 {
        blowup_status(estimate_from_tail(tail, u.time), u)
    } else {
        SimStatus::StepFailure {
            t: u.time,
            reason: format!("{what} without growth of sup u"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Barenblatt, InitialData, SourceKind};
    use crate::geometry::{Boundary, DomainKind};

    fn config(t_end: f64) -> SimConfig {
        SimConfig {
            t_end,
            ..SimConfig::default()
        }
    }

    #[test]
    fn barenblatt_evolution_matches_reference() {
        let domain = Domain::new(DomainKind::Interval, &[8.0], 1, Some(&[4.0]), 201).unwrap();
        let (t0, t1) = (0.1, 0.5);
        let spec = ProblemSpec {
            m: 2.0,
            p: 1.0,
            q: 1.0,
            k1: 0.0,
            k2: 0.0,
            boundary: Boundary::Dirichlet,
            source: SourceKind::None,
            initial: InitialData::Barenblatt { mass: 1.0, time: t0 },
        };
        let out = run(&spec, &domain, &config(t1 - t0)).unwrap();
        assert!(matches!(out.status, SimStatus::RanToEnd { .. }));
        let b = Barenblatt::new(2.0, 1, 1.0).unwrap();
        let exact = domain.sample(|x| b.value(&[x[0] - 4.0], t1).unwrap());
        let peak = exact.iter().copied().fold(0.0, f64::max);
        let err = out
            .final_field
            .values
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err / peak < 0.02, "relative L-inf error {}", err / peak);
        assert!(out.flags.is_empty(), "{:?}", out.flags);
    }

    #[test]
    fn power_source_blows_up_and_trace_is_ordered() {
        let domain = Domain::new(DomainKind::Interval, &[1.0], 1, None, 41).unwrap();
        let spec = ProblemSpec {
            m: 2.0,
            p: 3.0,
            q: 2.0,
            k1: 1.0,
            k2: 1.0,
            boundary: Boundary::Robin { h: 1.0 },
            source: SourceKind::PowerAbsorption,
            initial: InitialData::Eigenfunction { amplitude: 10.0 },
        };
        let out = run(&spec, &domain, &config(10.0)).unwrap();
        let t = out.status.blowup_time().expect("blow-up");
        assert!(t > 0.0 && t < 1.0, "{t}");
        let rows = out.trace.rows();
        assert!(rows.windows(2).all(|w| w[1].t > w[0].t));
        assert!(out.final_field.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn slow_source_stays_global() {
        let domain = Domain::new(DomainKind::Interval, &[1.0], 1, None, 41).unwrap();
        let spec = ProblemSpec {
            m: 3.0,
            p: 2.0,
            q: 1.5,
            k1: 1.0,
            k2: 1.0,
            boundary: Boundary::Robin { h: 1.0 },
            source: SourceKind::GradientAbsorption,
            initial: InitialData::Eigenfunction { amplitude: 20.0 },
        };
        let out = run(&spec, &domain, &config(5.0)).unwrap();
        assert!(matches!(out.status, SimStatus::RanToEnd { .. }), "{:?}", out.status);
        let phi_max = out.trace.rows().iter().map(|r| r.phi).fold(0.0, f64::max);
        assert!(phi_max.is_finite() && phi_max <= 1e3 * out.trace.rows()[0].phi);
    }

    #[test]
    fn larger_absorption_never_raises_sup() {
        let domain = Domain::new(DomainKind::Interval, &[1.0], 1, None, 41).unwrap();
        let base = ProblemSpec {
            m: 2.0,
            p: 3.0,
            q: 2.0,
            k1: 1.0,
            k2: 0.5,
            boundary: Boundary::Robin { h: 1.0 },
            source: SourceKind::PowerAbsorption,
            initial: InitialData::Eigenfunction { amplitude: 1.0 },
        };
        let mut strong = base.clone();
        strong.k2 = 2.0;
        let cfg = SimConfig {
            t_end: 0.2,
            fixed_dt: Some(1e-4),
            cadence: 100,
            ..SimConfig::default()
        };
        let a = run(&base, &domain, &cfg).unwrap();
        let b = run(&strong, &domain, &cfg).unwrap();
        assert_eq!(a.trace.len(), b.trace.len());
        for (ra, rb) in a.trace.rows().iter().zip(b.trace.rows()) {
            assert_eq!(ra.t, rb.t);
            assert!(rb.sup_u <= ra.sup_u + 1e-6, "{} > {}", rb.sup_u, ra.sup_u);
        }
    }

    #[test]
    fn rejects_invalid_configuration() {
        let domain = Domain::new(DomainKind::Interval, &[1.0], 1, None, 11).unwrap();
        let spec = ProblemSpec {
            m: 2.0,
            p: 3.0,
            q: 2.0,
            k1: 1.0,
            k2: 1.0,
            boundary: Boundary::Dirichlet,
            source: SourceKind::PowerAbsorption,
            initial: InitialData::Constant { value: 1.0 },
        };
        assert!(matches!(run(&spec, &domain, &config(1.0)), Err(DynamicsError::InvalidInitialData(_))));
        let mut ok = spec.clone();
        ok.initial = InitialData::Bump { amplitude: 1.0 };
        assert!(run(&ok, &domain, &config(0.0)).is_err());
        let mut bad = ok.clone();
        bad.m = 1.0;
        assert!(matches!(run(&bad, &domain, &config(1.0)), Err(DynamicsError::InvalidProblem(_))));
    }

    #[test]
    fn oversized_fixed_step_is_a_step_failure() {
        let domain = Domain::new(DomainKind::Interval, &[1.0], 1, None, 101).unwrap();
        let spec = ProblemSpec {
            m: 2.0,
            p: 3.0,
            q: 2.0,
            k1: 1.0,
            k2: 1.0,
            boundary: Boundary::Dirichlet,
            source: SourceKind::PowerAbsorption,
            initial: InitialData::Bump { amplitude: 1.0 },
        };
        let cfg = SimConfig {
            fixed_dt: Some(0.1),
            ..config(1.0)
        };
        let out = run(&spec, &domain, &cfg).unwrap();
        assert!(matches!(out.status, SimStatus::StepFailure { .. }));
        assert_eq!(out.trace.len(), 1);
    }
}
