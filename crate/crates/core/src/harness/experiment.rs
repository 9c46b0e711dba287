use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Command, HarnessError, Mode, RunConfig, EXIT_NUMERICAL, EXIT_PASS, EXIT_VIOLATION};
use crate::criteria::{
    bubble_field, h0_coefficients, lemma4_sweep, positive_polynomial_field, robin_polynomial_field, thm1_upper_bound,
    thm2_global_bound, thm3_check_k2, thm3_constants, thm3_dual_check, thm3_lower_bound, CriteriaReport,
    H0Coefficients, LemmaChecker, LemmaParams, LemmaReport,
};
use crate::dynamics::{run, Barenblatt, InitialData, RunOutput, SimStatus};
use crate::functionals::{psi_monotonicity_violations, w_measure, Trace};
use crate::geometry::{Boundary, Domain, DomainKind, Field};
use crate::spectral::{
    check_h3, dirichlet_lambda1, eta_from_xi, h3_margin_upper_bound, robin_xi1, EIGEN_TOLERANCE,
};

/// Relative slack on every sandwich comparison against a simulated quantity.
pub const VERDICT_SLACK: f64 = 0.05;
/// Allowed decrease of `psi` per unit time, relative to its magnitude.
const PSI_MONOTONE_TOL: f64 = 1e-3;
/// Relative L-infinity error accepted on the finest convergence rung.
const CONVERGENCE_ERROR_LIMIT: f64 = 0.02;
const CONVERGENCE_MIN_ORDER: f64 = 1.0;
const LEMMA4_POINTS: usize = 50;

/// One comparison between a computed bound and the simulation or a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    /// `theorem` of the criteria report the verdict rests on.
    pub criteria: String,
    /// Trace file the compared quantity comes from, or `none`.
    pub trace: String,
    /// Unasserted verdicts are informational and never fail a run.
    pub asserted: bool,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSummary {
    pub lemma: String,
    pub fields: usize,
    pub inequalities: usize,
    pub min_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRung {
    pub resolution: usize,
    pub spacing: f64,
    pub steps: usize,
    /// `max |u - exact| / max exact` at the final time.
    pub relative_error: f64,
    /// Order against the previous rung.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub command: Command,
    /// Canonical text of the configuration that produced the report.
    pub config: String,
    pub status: Option<SimStatus>,
    pub criteria: Vec<CriteriaReport>,
    pub verdicts: Vec<Verdict>,
    pub lemmas: Vec<LemmaSummary>,
    pub convergence: Vec<ConvergenceRung>,
    pub diagnostics: Vec<String>,
    /// Deterministic work counters; wall-clock time is left to the caller.
    pub timings: BTreeMap<String, u64>,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    /// Simulation trace; empty for commands that do not simulate.
    pub trace: Trace,
}

struct Builder<'a> {
    config: &'a RunConfig,
    report: ExperimentReport,
    trace: Trace,
}

impl<'a> Builder<'a> {
    fn new(config: &'a RunConfig, command: Command) -> Self {
        Builder {
            config,
            report: ExperimentReport {
                command,
                config: config.to_text(),
                status: None,
                criteria: Vec::new(),
                verdicts: Vec::new(),
                lemmas: Vec::new(),
                convergence: Vec::new(),
                diagnostics: Vec::new(),
                timings: BTreeMap::new(),
                exit_code: EXIT_PASS,
            },
            trace: Trace::new(),
        }
    }

    fn trace_ref(&self) -> String {
        if self.trace.is_empty() {
            "none".into()
        } else {
            self.config.output.trace.clone()
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn verdict(&mut self, name: &str, criteria: &str, asserted: bool, passed: bool, value: f64, limit: f64, detail: String) {
        let trace = self.trace_ref();
        self.report.verdicts.push(Verdict {
            name: name.into(),
            criteria: criteria.into(),
            trace,
            asserted,
            passed,
            value,
            limit,
            detail,
        });
    }

    fn count(&mut self, key: &str, n: u64) {
        *self.report.timings.entry(key.to_string()).or_insert(0) += n;
    }

    fn note(&mut self, msg: impl Into<String>) {
        self.report.diagnostics.push(msg.into());
    }

    fn finish(mut self) -> ExperimentOutput {
        let violated = self.report.verdicts.iter().any(|v| v.asserted && !v.passed);
        let failed = matches!(self.report.status, Some(SimStatus::StepFailure { .. }));
        self.report.exit_code = if failed {
            EXIT_NUMERICAL
        } else if violated {
            EXIT_VIOLATION
        } else {
            EXIT_PASS
        };
        self.report.timings.insert("trace_rows".into(), self.trace.len() as u64);
        ExperimentOutput {
            report: self.report,
            trace: self.trace,
        }
    }
}

/// Runs `command` on a validated configuration.
///
/// Errors are configuration problems found late or numerical breakdowns;
/// verdict failures are reported through `exit_code`.
pub fn run_experiment(config: &RunConfig, command: Command) -> Result<ExperimentOutput, HarnessError> {
    let mut b = Builder::new(config, command);
    match command {
        Command::Simulate => simulate(&mut b)?,
        Command::Bounds => {
            let domain = config.domain.build(config.domain.resolution)?;
            let u0 = initial(config, &domain)?;
            hypotheses(&mut b);
            bounds(&mut b, &domain, &u0)?;
        }
        Command::Eigen => eigen(&mut b)?,
        Command::CheckLemmas => lemmas(&mut b)?,
        Command::Convergence => convergence(&mut b)?,
    }
    Ok(b.finish())
}

fn initial(config: &RunConfig, domain: &Domain) -> Result<Field, HarnessError> {
    config
        .problem
        .initial_field(domain)
        .map_err(|e| HarnessError::numerical("dynamics", e))
}

fn hypotheses(b: &mut Builder) {
    let msgs: &[&str] = match b.config.mode {
        Mode::Simulate | Mode::Convergence => &["no theorem selected: no hypotheses checked"],
        Mode::Theorem1 => &[
            "validated: Robin boundary, power-absorption source, m, q > 1, p >= max{m,q}",
            "validated: star-shaped domain constants m1, m2",
            "reported: psi(0) > 0 (theorem silent otherwise)",
            "unchecked: existence of a nonnegative classical solution up to blow-up",
        ],
        Mode::Theorem2 => &[
            "validated: Robin boundary, power-absorption source, p < m, k1 > 0",
            "validated: star-shaped domain constants m1, m2",
            "reported: Robin eigenvalue condition xi1(hm)/(hm) >= 2 m1 N/3 + m2 - 1 (margin in the report)",
            "unchecked: existence of a nonnegative classical solution",
        ],
        Mode::Theorem3 => &[
            "validated: three-dimensional Dirichlet domain, gradient-absorption source, k1, k2 > 0",
            "validated: exponent regime and delta interval",
            "reported: k2 threshold condition (both forms)",
            "unchecked: finite-time blow-up of W, which the lower bound presupposes",
        ],
    };
    for m in msgs {
        b.note(*m);
    }
}

fn max_phi(trace: &Trace) -> f64 {
    trace.rows().iter().map(|r| r.phi).fold(0.0, f64::max)
}

/// Bound computations for the configured theorem; returns the reports and
/// leaves simulation comparisons to the caller.
fn bounds(b: &mut Builder, domain: &Domain, u0: &Field) -> Result<(), HarnessError> {
    let spec = &b.config.problem;
    match b.config.mode {
        Mode::Simulate | Mode::Convergence => {}
        Mode::Theorem1 => {
            let r = thm1_upper_bound(u0, spec, domain).map_err(|e| HarnessError::numerical("criteria", e))?;
            b.report.criteria.push(r);
        }
        Mode::Theorem2 => {
            let r = thm2_global_bound(u0, spec, domain).map_err(|e| HarnessError::numerical("criteria", e))?;
            b.count("eigen_solves", 1);
            b.report.criteria.push(r);
        }
        Mode::Theorem3 => theorem3_bounds(b, domain, u0)?,
    }
    Ok(())
}

fn h0_report(c: &H0Coefficients) -> CriteriaReport {
    let mut r = CriteriaReport::new("h0");
    for (k, v) in [
        ("m", c.m),
        ("p", c.p),
        ("q", c.q),
        ("s", c.s),
        ("mu", c.mu),
        ("d", c.d),
        ("delta", c.delta),
        ("delta_lo", c.delta_interval.0),
        ("delta_hi", c.delta_interval.1),
        ("alpha", c.alpha),
        ("beta", c.beta),
        ("sigma_coeff", c.sigma_coeff),
        ("gamma", c.gamma),
    ] {
        r.set(k, v);
    }
    r.applicable = true;
    r
}

fn theorem3_bounds(b: &mut Builder, domain: &Domain, u0: &Field) -> Result<(), HarnessError> {
    let spec = b.config.problem.clone();
    let coeffs =
        h0_coefficients(spec.m, spec.p, spec.q, b.config.delta).map_err(|e| HarnessError::numerical("criteria", e))?;
    b.report.criteria.push(h0_report(&coeffs));
    let consts = thm3_constants(&coeffs, &spec, domain).map_err(|e| HarnessError::numerical("criteria", e))?;
    b.count("eigen_solves", 1);
    let dual = thm3_dual_check(&consts, &coeffs).map_err(|e| HarnessError::numerical("criteria", e))?;
    b.verdict(
        "k2_condition_forms_agree",
        "theorem3",
        true,
        dual.relative_disagreement <= 1e-10,
        dual.relative_disagreement,
        1e-10,
        format!("threshold form {:e}, c3/Phi(xi_m) form {:e}", dual.threshold_ratio, dual.lemma4_ratio),
    );
    let l4 = lemma4_sweep(&consts, &coeffs, LEMMA4_POINTS);
    b.verdict(
        "lemma4_minimum",
        "theorem3",
        true,
        l4.passed,
        l4.phi_at_xi_m,
        l4.sweep_min,
        format!("Phi(xi_m) against {} log-spaced points", l4.points),
    );
    let w0 = w_measure(u0, spec.m, spec.p, domain).map_err(|e| HarnessError::numerical("functionals", e))?;
    let satisfied = thm3_check_k2(consts.k1, consts.k2, consts.sigma_big, &coeffs)
        .map_err(|e| HarnessError::numerical("criteria", e))?;
    if satisfied {
        let r = thm3_lower_bound(w0, &consts, &coeffs).map_err(|e| HarnessError::numerical("criteria", e))?;
        b.report.criteria.push(r);
    } else {
        let mut r = CriteriaReport::new("theorem3");
        for (k, v) in consts.entries() {
            r.set(k, v);
        }
        r.set("W0", w0);
        r.diagnostics.push(format!(
            "theorem inapplicable: k2 = {} below the threshold {:e}",
            consts.k2, consts.k2_threshold
        ));
        b.report.criteria.push(r);
    }
    Ok(())
}

fn simulate(b: &mut Builder) -> Result<(), HarnessError> {
    let config = b.config;
    let domain = config.domain.build(config.domain.resolution)?;
    let u0 = initial(config, &domain)?;
    hypotheses(b);
    bounds(b, &domain, &u0)?;
    let out = run(&config.problem, &domain, &config.sim).map_err(|e| HarnessError::numerical("dynamics", e))?;
    absorb_run(b, out);
    compare(b);
    Ok(())
}

fn absorb_run(b: &mut Builder, out: RunOutput) {
    b.count("steps", out.steps as u64);
    for f in &out.flags {
        b.note(format!("dynamics: {f}"));
    }
    if let SimStatus::StepFailure { t, reason } = &out.status {
        b.note(format!("dynamics: step failure at t = {t}: {reason}"));
    }
    b.trace = out.trace;
    b.report.status = Some(out.status);
}

fn bound_of(b: &Builder, theorem: &str) -> Option<CriteriaReport> {
    b.report.criteria.iter().find(|r| r.theorem == theorem).cloned()
}

/// Sandwich comparisons between the bounds and the simulated trace.
fn compare(b: &mut Builder) {
    let Some(status) = b.report.status.clone() else {
        return;
    };
    if matches!(status, SimStatus::StepFailure { .. }) {
        return;
    }
    let t_end = b.config.sim.t_end;
    match b.config.mode {
        Mode::Simulate | Mode::Convergence => {}
        Mode::Theorem1 => {
            let Some(report) = bound_of(b, "theorem1") else { return };
            let Some(t_bound) = report.bound else {
                b.note("theorem1: no bound (psi(0) <= 0); nothing to compare");
                return;
            };
            match status.blowup_time() {
                Some(t_est) => b.verdict(
                    "blowup_before_upper_bound",
                    "theorem1",
                    true,
                    t_est <= t_bound * (1.0 + VERDICT_SLACK),
                    t_est,
                    t_bound,
                    format!("t_estimate <= T (slack {VERDICT_SLACK})"),
                ),
                None if t_end >= t_bound * (1.0 + VERDICT_SLACK) => b.verdict(
                    "blowup_before_upper_bound",
                    "theorem1",
                    true,
                    false,
                    t_end,
                    t_bound,
                    "no blow-up detected although the run passed T".into(),
                ),
                None => b.verdict(
                    "blowup_before_upper_bound",
                    "theorem1",
                    false,
                    true,
                    t_end,
                    t_bound,
                    "run ended before T without blow-up: inconclusive".into(),
                ),
            }
            let violations = psi_monotonicity_violations(&b.trace, PSI_MONOTONE_TOL);
            let worst = violations.iter().map(|v| v.relative).fold(0.0, f64::max);
            b.verdict(
                "psi_nondecreasing",
                "theorem1",
                true,
                violations.is_empty(),
                worst,
                PSI_MONOTONE_TOL,
                format!("{} decreases beyond tolerance", violations.len()),
            );
        }
        Mode::Theorem2 => {
            let Some(report) = bound_of(b, "theorem2") else { return };
            let (cap, conditional) = match report.bound {
                Some(c) => (c, false),
                None => match report.constants.get("conditional_cap") {
                    Some(c) => (*c, true),
                    None => return,
                },
            };
            let peak = max_phi(&b.trace);
            let label = if conditional { "conditional cap" } else { "C" };
            b.verdict(
                "phi_below_cap",
                "theorem2",
                true,
                peak <= cap * (1.0 + VERDICT_SLACK),
                peak,
                cap,
                format!("max phi over the trace against {label} (slack {VERDICT_SLACK})"),
            );
            b.verdict(
                "bounded_to_t_end",
                "theorem2",
                true,
                matches!(status, SimStatus::RanToEnd { .. }),
                status.blowup_time().unwrap_or(t_end),
                t_end,
                "simulation reaches t_end without blow-up".into(),
            );
        }
        Mode::Theorem3 => {
            let Some(report) = bound_of(b, "theorem3") else { return };
            let Some(t_low) = report.bound else { return };
            match status.blowup_time() {
                Some(t_est) => b.verdict(
                    "blowup_after_lower_bound",
                    "theorem3",
                    true,
                    t_est >= t_low * (1.0 - VERDICT_SLACK),
                    t_est,
                    t_low,
                    format!("t_estimate >= T_low (slack {VERDICT_SLACK})"),
                ),
                None => b.note(format!(
                    "theorem3: no blow-up detected by t = {t_end}; T_low = {t_low:e} reported as conditional"
                )),
            }
        }
    }
}

fn eigen(b: &mut Builder) -> Result<(), HarnessError> {
    let config = b.config;
    let domain = config.domain.build(config.domain.resolution)?;
    let spectral = |e| HarnessError::numerical("spectral", e);
    let mut r = CriteriaReport::new("spectral");
    let lambda = dirichlet_lambda1(&domain).map_err(spectral)?;
    b.count("eigen_iterations", lambda.iterations as u64);
    b.count("inner_iterations", lambda.inner_iterations as u64);
    r.set("lambda1", lambda.eigenvalue);
    r.set("lambda1_residual", lambda.residual);
    let mut residuals = vec![("lambda1", lambda.residual)];
    if let Boundary::Robin { h } = config.problem.boundary {
        let m = config.problem.m;
        let xi = robin_xi1(&domain, h).map_err(spectral)?;
        b.count("eigen_iterations", xi.iterations as u64);
        b.count("inner_iterations", xi.inner_iterations as u64);
        let h3 = check_h3(&domain, h, m).map_err(spectral)?;
        let star = domain.star_constants();
        r.set("xi1_h", xi.eigenvalue);
        r.set("xi1_h_residual", xi.residual);
        r.set("eta_h", eta_from_xi(xi.eigenvalue, h, &star, domain.dimension()));
        r.set("xi1_hm", h3.xi1);
        r.set("eta_hm", h3.sigma_robin);
        r.set("h3_margin", h3.margin);
        r.set("h3_margin_upper_bound", h3_margin_upper_bound(&domain));
        residuals.push(("xi1_h", xi.residual));
        residuals.push(("xi1_hm", h3.residual));
        r.applicable = h3.feasible;
        if !h3.feasible {
            r.diagnostics.push(format!(
                "Robin eigenvalue condition fails at h = {h}, m = {m} (margin {:e})",
                h3.margin
            ));
        }
    } else {
        r.applicable = true;
    }
    b.report.criteria.push(r);
    for (name, res) in residuals {
        b.verdict(
            &format!("{name}_rayleigh_residual"),
            "spectral",
            true,
            res <= 10.0 * EIGEN_TOLERANCE,
            res,
            10.0 * EIGEN_TOLERANCE,
            "relative eigen-residual within ten times the solver tolerance".into(),
        );
    }
    Ok(())
}

fn lemmas(b: &mut Builder) -> Result<(), HarnessError> {
    let config = b.config;
    let spec = &config.problem;
    let domain = config.domain.build(config.domain.resolution)?;
    let criteria = |e| HarnessError::numerical("criteria", e);
    let mut params = LemmaParams::new(spec.m);
    params.robin_h = spec.robin_h();
    if domain.dimension() == 3 {
        match h0_coefficients(spec.m, spec.p, spec.q, config.delta) {
            Ok(c) => params.coeffs = Some(c),
            Err(e) => b.note(format!("lemma3 skipped: {e}")),
        }
    }
    let checker = LemmaChecker::new(&domain, params.clone()).map_err(criteria)?;
    if params.robin_h.is_some() {
        b.count("eigen_solves", 2);
    }
    let samples = config.lemma_samples;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(samples);
    // each sample has its own seeded generator, so the split across threads
    // does not affect the results
    let results: Vec<Result<LemmaReport, HarnessError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let checker = &checker;
                let domain = &domain;
                s.spawn(move || {
                    (t..samples)
                        .step_by(threads)
                        .map(|j| {
                            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(j as u64));
                            let report = sample_field(domain, spec.boundary, &mut rng)
                                .and_then(|field| checker.check(&field))
                                .map_err(criteria);
                            (j, report)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let mut all: Vec<(usize, Result<LemmaReport, HarnessError>)> =
            handles.into_iter().flat_map(|h| h.join().expect("lemma worker panicked")).collect();
        all.sort_by_key(|(j, _)| *j);
        all.into_iter().map(|(_, r)| r).collect()
    });
    let reports: Vec<LemmaReport> = results.into_iter().collect::<Result<_, _>>()?;
    b.count("lemma_fields", samples as u64);

    let mut by_lemma: BTreeMap<String, LemmaSummary> = BTreeMap::new();
    for rep in &reports {
        let mut seen: Vec<&str> = Vec::new();
        for r in &rep.residuals {
            let entry = by_lemma.entry(r.lemma.clone()).or_insert_with(|| LemmaSummary {
                lemma: r.lemma.clone(),
                fields: 0,
                inequalities: 0,
                min_residual: f64::INFINITY,
                passed: true,
            });
            if !seen.contains(&r.lemma.as_str()) {
                entry.fields += 1;
                seen.push(&r.lemma);
            }
            entry.inequalities += 1;
            entry.min_residual = entry.min_residual.min(r.residual);
            entry.passed &= r.passed;
        }
        for s in &rep.skipped {
            if !b.report.diagnostics.contains(s) {
                b.report.diagnostics.push(s.clone());
            }
        }
    }
    for s in by_lemma.into_values() {
        b.verdict(
            &format!("{}_holds", s.lemma),
            "lemmas",
            true,
            s.passed,
            s.min_residual,
            -params.tolerance,
            format!("{} inequalities on {} fields", s.inequalities, s.fields),
        );
        b.report.lemmas.push(s);
    }

    if config.mode == Mode::Theorem3 {
        if let (Some(coeffs), Ok(lambda)) = (params.coeffs, dirichlet_lambda1(&domain)) {
            let consts = crate::criteria::Thm3Constants::compute(&coeffs, spec.k1, spec.k2, lambda.eigenvalue)
                .map_err(criteria)?;
            let l4 = lemma4_sweep(&consts, &coeffs, LEMMA4_POINTS);
            b.verdict(
                "lemma4_minimum",
                "lemmas",
                true,
                l4.passed,
                l4.phi_at_xi_m,
                l4.sweep_min,
                format!("Phi(xi_m) against {} log-spaced points", l4.points),
            );
        }
    }
    Ok(())
}

/// Random field matching the boundary condition: Robin polynomials on boxes,
/// boundary-vanishing bubbles for Dirichlet boxes, positive polynomials on
/// balls.
fn sample_field(domain: &Domain, boundary: Boundary, rng: &mut ChaCha8Rng) -> crate::criteria::Result<Field> {
    match (domain.kind(), boundary) {
        (DomainKind::Ball, _) => positive_polynomial_field(domain, rng),
        (_, Boundary::Robin { h }) => robin_polynomial_field(domain, h, rng),
        (_, Boundary::Dirichlet) => bubble_field(domain, rng),
    }
}

fn default_ladder(resolution: usize) -> Vec<usize> {
    let base = (resolution / 4).max(11);
    vec![base, 2 * base, 4 * base]
}

fn convergence(b: &mut Builder) -> Result<(), HarnessError> {
    let config = b.config;
    let spec = &config.problem;
    let InitialData::Barenblatt { mass, time } = spec.initial else {
        return Err(super::ConfigError::InvalidValue {
            key: "problem.u0".into(),
            message: "convergence runs need the barenblatt profile".into(),
        }
        .into());
    };
    if spec.source != crate::dynamics::SourceKind::None {
        return Err(super::ConfigError::InvalidValue {
            key: "problem.source".into(),
            message: "convergence runs need source = none".into(),
        }
        .into());
    }
    let ladder = if config.ladder.is_empty() {
        default_ladder(config.domain.resolution)
    } else {
        config.ladder.clone()
    };
    let profile =
        Barenblatt::new(spec.m, config.domain.dimension, mass).map_err(|e| HarnessError::numerical("dynamics", e))?;
    let t_final = time + config.sim.t_end;

    let runs: Vec<Result<(Domain, RunOutput), HarnessError>> = std::thread::scope(|s| {
        let handles: Vec<_> = ladder
            .iter()
            .map(|&n| {
                s.spawn(move || {
                    let domain = config.domain.build(n)?;
                    let out = run(spec, &domain, &config.sim).map_err(|e| HarnessError::numerical("dynamics", e))?;
                    Ok((domain, out))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("ladder worker panicked")).collect()
    });

    let mut rungs: Vec<ConvergenceRung> = Vec::new();
    let mut finest = None;
    for (n, res) in ladder.iter().zip(runs) {
        let (domain, out) = res?;
        b.count("steps", out.steps as u64);
        if !matches!(out.status, SimStatus::RanToEnd { .. }) {
            b.note(format!("convergence: rung {n} ended with {:?}", out.status));
            b.report.status = Some(out.status);
            b.trace = out.trace;
            return Ok(());
        }
        let center = domain.center().to_vec();
        let exact = domain.sample(|x| {
            let r2: f64 = x.iter().zip(&center).map(|(a, c)| (a - c).powi(2)).sum();
            profile.value_at_radius_sq(r2, t_final).unwrap_or(0.0)
        });
        let peak = exact.iter().copied().fold(0.0, f64::max);
        let err = out
            .final_field
            .values
            .iter()
            .zip(&exact)
            .map(|(a, e)| (a - e).abs())
            .fold(0.0, f64::max);
        let spacing = domain.min_spacing();
        let relative_error = err / peak;
        let order = rungs
            .last()
            .map(|prev| (prev.relative_error / relative_error).ln() / (prev.spacing / spacing).ln());
        rungs.push(ConvergenceRung {
            resolution: *n,
            spacing,
            steps: out.steps,
            relative_error,
            order,
        });
        finest = Some(out);
    }
    let out = finest.expect("ladder is nonempty");
    b.report.status = Some(out.status);
    b.trace = out.trace;
    let last = rungs.last().expect("ladder is nonempty").clone();
    b.verdict(
        "finest_error",
        "convergence",
        true,
        last.relative_error < CONVERGENCE_ERROR_LIMIT,
        last.relative_error,
        CONVERGENCE_ERROR_LIMIT,
        format!("relative L-inf error at {} nodes", last.resolution),
    );
    if rungs.len() >= 2 {
        let order = fitted_order(&rungs);
        b.verdict(
            "observed_order",
            "convergence",
            true,
            order >= CONVERGENCE_MIN_ORDER,
            order,
            CONVERGENCE_MIN_ORDER,
            format!("least-squares slope of log error against log spacing over {} rungs", rungs.len()),
        );
    }
    b.report.convergence = rungs;
    Ok(())
}

fn fitted_order(rungs: &[ConvergenceRung]) -> f64 {
    let xs: Vec<f64> = rungs.iter().map(|r| r.spacing.ln()).collect();
    let ys: Vec<f64> = rungs.iter().map(|r| r.relative_error.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
