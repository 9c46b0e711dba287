use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{CriteriaError, CriteriaReport, H0Coefficients, Result};
use crate::dynamics::{ProblemSpec, SourceKind};
use crate::functionals::{phi, psi_terms};
use crate::geometry::{Boundary, Domain, Field};
use crate::spectral::{check_h3, dirichlet_lambda1};

/// Best constant of `W^{1,2}_0 -> L^6` in three dimensions.
pub fn sobolev_constant() -> f64 {
    4f64.sqrt() / 3f64.sqrt() / PI.powf(2.0 / 3.0)
}

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CriteriaError::NonPositive(name, value))
    }
}

/// Upper bound `T = (m+1) phi(0) / ((p-1) psi(0))` on the blow-up time of
/// the Robin problem with `g = k1 u^p - k2 u^q`.
pub fn thm1_upper_bound(u0: &Field, spec: &ProblemSpec, domain: &Domain) -> Result<CriteriaReport> {
    if spec.source != SourceKind::PowerAbsorption {
        return Err(CriteriaError::Regime(format!(
            "the blow-up bound needs the power-absorption source, got {}",
            spec.source.name()
        )));
    }
    let Boundary::Robin { h } = spec.boundary else {
        return Err(CriteriaError::Regime("the blow-up bound needs a Robin boundary".into()));
    };
    let (m, p, q) = (spec.m, spec.p, spec.q);
    if !(m > 1.0 && q > 1.0 && p >= m.max(q)) {
        return Err(CriteriaError::Regime(format!(
            "need m, q > 1 and p >= max(m, q), got m = {m}, p = {p}, q = {q}"
        )));
    }
    let mut report = CriteriaReport::new("theorem1");
    let phi0 = phi(u0, m, domain)?;
    let terms = psi_terms(u0, spec, domain)?;
    let psi0 = terms.total();
    report.set("h", h);
    report.set("phi0", phi0);
    report.set("psi0", psi0);
    report.set("psi0_gradient", terms.gradient);
    report.set("psi0_reaction", terms.reaction);
    report.set("psi0_absorption", terms.absorption);
    report.set("psi0_boundary", terms.boundary);
    if psi0 > 0.0 {
        let t = (m + 1.0) * phi0 / ((p - 1.0) * psi0);
        report.applicable = true;
        report.bound = Some(t);
        report.set("T", t);
    } else {
        report.diagnostics.push("psi(0) <= 0: theorem silent".into());
    }
    Ok(report)
}

/// `max_x k1 x^(p+m) - eps x^(2m)` for `p < m`.
fn young_constant(eps: f64, k1: f64, m: f64, p: f64) -> f64 {
    k1 * (2.0 * m * eps / ((p + m) * k1)).powf((m + p) / (p - m)) * (m - p) / (2.0 * m)
}

fn phi_cap(sigma: f64, phi0: f64, spec: &ProblemSpec, measure: f64) -> (f64, f64, f64, f64) {
    let m = spec.m;
    let eps = sigma / 2.0;
    let c_eps = young_constant(eps, spec.k1, m, spec.p);
    let c0 = (m + 1.0) * sigma * measure.powf((1.0 - m) / (1.0 + m)) / 2.0;
    let c1 = (m + 1.0) * c_eps * measure;
    let cap = phi0.max((c1 / c0).powf((m + 1.0) / (2.0 * m)));
    (c_eps, c0, c1, cap)
}

/// Bound on `phi` for the Robin problem with `p < m`.
///
/// When the eigenvalue condition fails on the domain the theorem is reported
/// inapplicable, together with a conditional cap that uses the Robin
/// Poincare constant `xi_1(hm)` for `u^m` in place of `eta(hm)`.
pub fn thm2_global_bound(u0: &Field, spec: &ProblemSpec, domain: &Domain) -> Result<CriteriaReport> {
    if spec.source != SourceKind::PowerAbsorption {
        return Err(CriteriaError::Regime(format!(
            "global existence needs the power-absorption source, got {}",
            spec.source.name()
        )));
    }
    let Boundary::Robin { h } = spec.boundary else {
        return Err(CriteriaError::Regime("global existence needs a Robin boundary".into()));
    };
    let (m, p) = (spec.m, spec.p);
    if !(p < m) {
        return Err(CriteriaError::Regime(format!("need p < m, got p = {p}, m = {m}")));
    }
    if !(spec.q >= 1.0 && spec.k1 > 0.0) {
        return Err(CriteriaError::Regime(format!(
            "need q >= 1 and k1 > 0, got q = {}, k1 = {}",
            spec.q, spec.k1
        )));
    }
    let mut report = CriteriaReport::new("theorem2");
    let check = check_h3(domain, h, m)?;
    let phi0 = phi(u0, m, domain)?;
    let measure = domain.measure();
    report.set("phi0", phi0);
    report.set("h3_margin", check.margin);
    report.set("xi1_hm", check.xi1);
    report.set("sigma_robin", check.sigma_robin);
    if check.feasible && check.sigma_robin > 0.0 {
        let (c_eps, c0, c1, cap) = phi_cap(check.sigma_robin, phi0, spec, measure);
        report.set("C_eps", c_eps);
        report.set("C0", c0);
        report.set("C1", c1);
        report.set("C", cap);
        report.applicable = true;
        report.bound = Some(cap);
    } else {
        report.diagnostics.push(format!(
            "theorem inapplicable on this domain/h/m: xi1(hm)/(hm) falls short of the threshold by {:e}",
            -check.margin
        ));
        let (c_eps, c0, c1, cap) = phi_cap(check.xi1, phi0, spec, measure);
        report.set("conditional_C_eps", c_eps);
        report.set("conditional_C0", c0);
        report.set("conditional_C1", c1);
        report.set("conditional_cap", cap);
        report
            .diagnostics
            .push("conditional_cap uses sigma = xi1(hm), keeping the boundary flux term".into());
    }
    Ok(report)
}

/// Constants of the lower blow-up time bound for the Dirichlet problem with
/// gradient absorption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm3Constants {
    pub k1: f64,
    pub k2: f64,
    pub lambda1: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub gamma_sobolev: f64,
    pub sigma_big: f64,
    pub xi_m: f64,
    pub m_const: f64,
    pub n_const: f64,
    pub epsilon1: f64,
    pub epsilon2: f64,
    /// `k1 (k1 Sigma)^((1-mu)/(gamma-1))`
    pub k2_threshold: f64,
}

impl Thm3Constants {
    pub fn compute(coeffs: &H0Coefficients, k1: f64, k2: f64, lambda1: f64) -> Result<Self> {
        require_positive("k1", k1)?;
        require_positive("k2", k2)?;
        require_positive("lambda1", lambda1)?;
        let H0Coefficients {
            m,
            q,
            s,
            mu,
            d,
            delta,
            alpha,
            beta: _,
            sigma_coeff: sigma,
            gamma,
            ..
        } = *coeffs;
        let ms = m * s;
        if !(ms > 1.0) {
            return Err(CriteriaError::CoefficientBound { name: "ms - 1", value: ms - 1.0 });
        }
        let g = sobolev_constant();
        let md = m + d;
        let b = 2.0 * m + 3.0 * d;
        let e = (gamma - 1.0) / (1.0 - mu);
        let poincare = (2.0 * lambda1.sqrt() / (ms + q - 1.0)).powf(q);
        let c1 = m * m * (ms - 1.0) / s;
        let c2 = ms * k1;
        let c3 = 4.0 * c1 / (md * md);
        let epsilon1 = k2 * poincare * (gamma - mu) / (k1 * (gamma - 1.0));
        let c4 = c2 * (1.0 - mu) / (gamma - mu) * epsilon1.powf(-e);
        let g_delta = g.powf(3.0 * delta / md);
        let g_alpha = g.powf(6.0 * alpha / b);
        let c5 = g_delta * g_alpha * 3.0 * alpha * d * c4 * sigma / b;
        let c6 = 3.0 * delta * c4 * g_delta / (2.0 * md);
        let xi_m = (3.0 * delta * c5 / (c6 * (2.0 * md - 3.0 * delta))).powf(-3.0 * delta / (2.0 * md));
        let epsilon2 = xi_m;
        let m_const = g_delta * (1.0 - d) * epsilon2 * sigma * c4;
        let n_const = g_delta * g_alpha * (b - 3.0 * alpha) / b * epsilon2 * c4 * d * sigma;
        let sigma_big = (g_delta * s * s * md * md / (4.0 * m * (ms - 1.0)))
            / ((gamma - mu) / (gamma - 1.0) * poincare).powf(e)
            * (1.0 - mu)
            / (gamma - mu)
            * (6.0 * md * g_alpha * d * alpha * sigma / (b * (2.0 * md - 3.0 * delta))).powf(1.0 - 3.0 * delta / (2.0 * md));
        let k2_threshold = k1 * (k1 * sigma_big).powf(1.0 / e);
        let consts = Thm3Constants {
            k1,
            k2,
            lambda1,
            c1,
            c2,
            c3,
            c4,
            c5,
            c6,
            gamma_sobolev: g,
            sigma_big,
            xi_m,
            m_const,
            n_const,
            epsilon1,
            epsilon2,
            k2_threshold,
        };
        for (name, v) in [
            ("c1", c1),
            ("c3", c3),
            ("c4", c4),
            ("c5", c5),
            ("c6", c6),
            ("Sigma", sigma_big),
            ("xi_m", xi_m),
            ("M", m_const),
            ("N", n_const),
        ] {
            require_positive(name, v)?;
        }
        Ok(consts)
    }

    /// `Phi(xi) = c5 xi + c6 xi^(1 - 2(m+d)/(3 delta))`
    pub fn phi_lemma4(&self, coeffs: &H0Coefficients, xi: f64) -> f64 {
        let md = coeffs.m + coeffs.d;
        self.c5 * xi + self.c6 * xi.powf(1.0 - 2.0 * md / (3.0 * coeffs.delta))
    }

    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("k1", self.k1),
            ("k2", self.k2),
            ("lambda1", self.lambda1),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("c4", self.c4),
            ("c5", self.c5),
            ("c6", self.c6),
            ("Gamma", self.gamma_sobolev),
            ("Sigma", self.sigma_big),
            ("xi_m", self.xi_m),
            ("M", self.m_const),
            ("N", self.n_const),
            ("epsilon1", self.epsilon1),
            ("epsilon2", self.epsilon2),
            ("k2_threshold", self.k2_threshold),
        ]
    }
}

/// Constants for `spec` on a three-dimensional Dirichlet domain, with
/// `lambda_1` from the eigenvalue solver.
pub fn thm3_constants(coeffs: &H0Coefficients, spec: &ProblemSpec, domain: &Domain) -> Result<Thm3Constants> {
    if spec.source != SourceKind::GradientAbsorption {
        return Err(CriteriaError::Regime(format!(
            "the lower bound needs the gradient-absorption source, got {}",
            spec.source.name()
        )));
    }
    if spec.boundary != Boundary::Dirichlet {
        return Err(CriteriaError::Regime("the lower bound needs a Dirichlet boundary".into()));
    }
    if domain.dimension() != 3 {
        return Err(CriteriaError::DimensionMismatch {
            expected: 3,
            got: domain.dimension(),
        });
    }
    let lambda1 = dirichlet_lambda1(domain)?.eigenvalue;
    Thm3Constants::compute(coeffs, spec.k1, spec.k2, lambda1)
}

/// `k2 >= k1 (k1 Sigma)^((1-mu)/(gamma-1))`
pub fn thm3_check_k2(k1: f64, k2: f64, sigma_big: f64, coeffs: &H0Coefficients) -> Result<bool> {
    require_positive("k1", k1)?;
    require_positive("k2", k2)?;
    require_positive("Sigma", sigma_big)?;
    let threshold = k1 * (k1 * sigma_big).powf((1.0 - coeffs.mu) / (coeffs.gamma - 1.0));
    Ok(k2 >= threshold)
}

/// Both forms of the condition on `k2`, expressed as ratios that exceed 1
/// exactly when the condition holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct K2DualCheck {
    pub satisfied: bool,
    pub threshold: f64,
    /// `(k2 / threshold)^((gamma-1)/(1-mu))`
    pub threshold_ratio: f64,
    /// `c3 / Phi(xi_m)`
    pub lemma4_ratio: f64,
    pub relative_disagreement: f64,
}

/// Evaluates the threshold form and the `c3 >= Phi(xi_m)` form of the `k2`
/// condition and insists that they agree.
pub fn thm3_dual_check(consts: &Thm3Constants, coeffs: &H0Coefficients) -> Result<K2DualCheck> {
    let satisfied = thm3_check_k2(consts.k1, consts.k2, consts.sigma_big, coeffs)?;
    let e = (coeffs.gamma - 1.0) / (1.0 - coeffs.mu);
    let threshold_ratio = (consts.k2 / consts.k2_threshold).powf(e);
    let md = coeffs.m + coeffs.d;
    let delta = coeffs.delta;
    let r = 3.0 * delta / (2.0 * md);
    // right side of the lemma's condition, written out as stated
    let rhs = consts.c5
        * (consts.c5 / consts.c6).powf(-r)
        * (3.0 * delta / (2.0 * md - 3.0 * delta)).powf(-r)
        * (2.0 * md / (2.0 * md - 3.0 * delta));
    let at_min = consts.phi_lemma4(coeffs, consts.xi_m);
    let form_gap = (rhs - at_min).abs() / at_min;
    if form_gap > 1e-10 {
        return Err(CriteriaError::Internal(format!(
            "Phi(xi_m) = {at_min:e} differs from the closed form {rhs:e}"
        )));
    }
    let lemma4_ratio = consts.c3 / rhs;
    let relative_disagreement = (threshold_ratio - lemma4_ratio).abs() / threshold_ratio.max(lemma4_ratio);
    if relative_disagreement > 1e-10 {
        return Err(CriteriaError::Internal(format!(
            "k2 condition forms disagree: {threshold_ratio:e} vs {lemma4_ratio:e}"
        )));
    }
    Ok(K2DualCheck {
        satisfied,
        threshold: consts.k2_threshold,
        threshold_ratio,
        lemma4_ratio,
        relative_disagreement,
    })
}

/// `T_low = W0^(1-ab) / ((M W0^((1-b)a) + N) (ab - 1))`
pub fn thm3_lower_bound(w0: f64, consts: &Thm3Constants, coeffs: &H0Coefficients) -> Result<CriteriaReport> {
    require_positive("W0", w0)?;
    if !thm3_check_k2(consts.k1, consts.k2, consts.sigma_big, coeffs)? {
        return Err(CriteriaError::K2ConditionUnmet {
            k2: consts.k2,
            threshold: consts.k2_threshold,
        });
    }
    let ab = coeffs.alpha * coeffs.beta;
    if !(ab > 1.0) {
        return Err(CriteriaError::CoefficientBound { name: "alpha beta", value: ab });
    }
    let denom = (consts.m_const * w0.powf((1.0 - coeffs.beta) * coeffs.alpha) + consts.n_const) * (ab - 1.0);
    let t_low = w0.powf(1.0 - ab) / denom;
    let mut report = CriteriaReport::new("theorem3");
    for (k, v) in consts.entries() {
        report.set(k, v);
    }
    report.set("W0", w0);
    report.set("alpha", coeffs.alpha);
    report.set("beta", coeffs.beta);
    report.set("delta", coeffs.delta);
    report.set("T_low", t_low);
    report.applicable = true;
    report.bound = Some(t_low);
    report
        .diagnostics
        .push("conditional: valid for solutions whose W-measure blows up in finite time".into());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::InitialData;
    use crate::geometry::DomainKind;

    fn reference() -> (H0Coefficients, Thm3Constants) {
        let coeffs = super::super::h0_coefficients(2.5, 3.0, 2.0, None).unwrap();
        let consts = Thm3Constants::compute(&coeffs, 1.0, 1.0, 3.0 * PI * PI).unwrap();
        (coeffs, consts)
    }

    #[test]
    fn sobolev_constant_value() {
        let expected = 2.0 / 3f64.sqrt() / PI.powf(2.0 / 3.0);
        assert!((sobolev_constant() - expected).abs() < 1e-15);
        assert!((sobolev_constant() - 0.5383146).abs() < 1e-6);
    }

    #[test]
    fn reference_constants_positive_and_recorded() {
        let (coeffs, c) = reference();
        for (name, v) in c.entries() {
            assert!(v > 0.0, "{name} = {v}");
        }
        assert!((c.c1 - 2.5 * 2.5 * 4.0 / 2.0).abs() < 1e-12);
        assert!((c.c3 - 4.0 * c.c1 / 3.25f64.powi(2)).abs() < 1e-12);
        assert!((c.sigma_big - 0.0039043555).abs() < 1e-9, "{}", c.sigma_big);
        assert!((c.k2_threshold - 0.0601868).abs() < 1e-6, "{}", c.k2_threshold);
        assert!(coeffs.alpha * coeffs.beta > 7.0);
    }

    #[test]
    fn xi_m_minimises_phi() {
        let (coeffs, c) = reference();
        let at_min = c.phi_lemma4(&coeffs, c.xi_m);
        for j in 0..=200 {
            let xi = c.xi_m * 10f64.powf(-3.0 + 6.0 * j as f64 / 200.0);
            assert!(at_min <= c.phi_lemma4(&coeffs, xi) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn k2_threshold_is_inclusive_and_dual_forms_agree() {
        let coeffs = super::super::h0_coefficients(2.5, 3.0, 2.0, None).unwrap();
        let probe = Thm3Constants::compute(&coeffs, 1.0, 1.0, 3.0 * PI * PI).unwrap();
        let threshold = probe.k2_threshold;
        assert!(thm3_check_k2(1.0, threshold, probe.sigma_big, &coeffs).unwrap());
        assert!(!thm3_check_k2(1.0, threshold / 2.0, probe.sigma_big, &coeffs).unwrap());
        assert!(thm3_check_k2(0.0, 1.0, probe.sigma_big, &coeffs).is_err());
        for &(k1, factor) in &[(1.0, 1.0), (1.0, 0.5), (2.0, 3.0), (0.3, 10.0)] {
            let base = Thm3Constants::compute(&coeffs, k1, 1.0, 3.0 * PI * PI).unwrap();
            let c = Thm3Constants::compute(&coeffs, k1, factor * base.k2_threshold, 3.0 * PI * PI).unwrap();
            let dual = thm3_dual_check(&c, &coeffs).unwrap();
            assert!(dual.relative_disagreement <= 1e-10, "{dual:?}");
            assert_eq!(dual.satisfied, factor >= 1.0);
        }
    }

    #[test]
    fn lower_bound_monotonicity() {
        let coeffs = super::super::h0_coefficients(2.5, 3.0, 2.0, None).unwrap();
        let c = Thm3Constants::compute(&coeffs, 1.0, 1.0, 3.0 * PI * PI).unwrap();
        let t = |w0: f64, c: &Thm3Constants| thm3_lower_bound(w0, c, &coeffs).unwrap().bound.unwrap();
        let mut prev = f64::INFINITY;
        for w0 in [1e-3, 1e-2, 0.1, 1.0, 10.0] {
            let v = t(w0, &c);
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
        let mut doubled = c;
        doubled.n_const *= 2.0;
        assert!(t(0.5, &doubled) < t(0.5, &c));
        assert!(thm3_lower_bound(0.0, &c, &coeffs).is_err());
        let weak = Thm3Constants::compute(&coeffs, 1.0, c.k2_threshold / 2.0, 3.0 * PI * PI).unwrap();
        assert!(matches!(
            thm3_lower_bound(1.0, &weak, &coeffs),
            Err(CriteriaError::K2ConditionUnmet { .. })
        ));
    }

    fn sine_spec(amplitude: f64) -> ProblemSpec {
        ProblemSpec {
            m: 2.0,
            p: 3.0,
            q: 2.0,
            k1: 1.0,
            k2: 1.0,
            boundary: Boundary::Robin { h: 1.0 },
            source: SourceKind::PowerAbsorption,
            initial: InitialData::Sine { amplitude },
        }
    }

    #[test]
    fn theorem1_sine_refinement_and_silence() {
        let bound = |n: usize, a: f64| {
            let d = Domain::new(DomainKind::Interval, &[1.0], 1, None, n).unwrap();
            let spec = sine_spec(a);
            let u0 = spec.initial_field(&d).unwrap();
            thm1_upper_bound(&u0, &spec, &d).unwrap()
        };
        let small = bound(201, 0.5);
        assert!(!small.applicable && small.bound.is_none());
        assert!(small.diagnostics[0].contains("psi(0) <= 0"));
        let coarse = bound(201, 30.0).bound.unwrap();
        let fine = bound(2001, 30.0).bound.unwrap();
        assert!((coarse - fine).abs() <= 0.01 * fine, "{coarse} vs {fine}");
        let mut bad = sine_spec(10.0);
        bad.p = 1.5;
        let d = Domain::new(DomainKind::Interval, &[1.0], 1, None, 51).unwrap();
        let u0 = bad.initial_field(&d).unwrap();
        assert!(matches!(thm1_upper_bound(&u0, &bad, &d), Err(CriteriaError::Regime(_))));
    }

    #[test]
    fn theorem2_reports_conditional_cap() {
        let d = Domain::new(DomainKind::Interval, &[1.0], 1, None, 101).unwrap();
        let spec = ProblemSpec {
            m: 3.0,
            p: 2.0,
            q: 1.5,
            k1: 1.0,
            k2: 1.0,
            boundary: Boundary::Robin { h: 1.0 },
            source: SourceKind::PowerAbsorption,
            initial: InitialData::Eigenfunction { amplitude: 2.0 },
        };
        let u0 = spec.initial_field(&d).unwrap();
        let r = thm2_global_bound(&u0, &spec, &d).unwrap();
        assert!(!r.applicable && r.bound.is_none());
        assert!(r.constants["h3_margin"] < 0.0);
        let cap = r.constants["conditional_cap"];
        assert!(cap.is_finite() && cap >= r.constants["phi0"]);
        // C(eps) decreases as eps grows when m > p
        assert!(young_constant(0.2, 1.0, 3.0, 2.0) > young_constant(0.4, 1.0, 3.0, 2.0));
        let mut wrong = spec.clone();
        wrong.p = 4.0;
        assert!(thm2_global_bound(&u0, &wrong, &d).is_err());
    }

    #[test]
    fn young_constant_is_the_maximum() {
        for &(eps, k1, m, p) in &[(0.3, 1.0, 3.0, 2.0), (1.7, 2.5, 2.0, 1.2)] {
            let brute = (1..200000)
                .map(|i| {
                    let x = i as f64 * 1e-4;
                    k1 * x.powf(p + m) - eps * x.powf(2.0 * m)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let c = young_constant(eps, k1, m, p);
            assert!((c - brute).abs() < 1e-6 * c.abs().max(1.0), "{c} vs {brute}");
        }
    }
}
