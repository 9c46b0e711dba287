use rand::Rng;
use serde::{Deserialize, Serialize};

use super::theorems::sobolev_constant;
use super::{CriteriaError, H0Coefficients, Result, Thm3Constants};
use crate::geometry::{pow_nonneg, Boundary, Domain, DomainKind, Field, StarConstants};
use crate::spectral::{eta_from_xi, LaplaceOperator, EIGEN_TOLERANCE};

/// Inputs of the lemma checks beyond the field itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaParams {
    pub m: f64,
    /// Robin coefficient; enables the gradient inequality for Robin fields.
    pub robin_h: Option<f64>,
    /// Exponents for the three-dimensional interpolation inequalities.
    pub coeffs: Option<H0Coefficients>,
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
    pub tolerance: f64,
}

impl LemmaParams {
    pub fn new(m: f64) -> Self {
        LemmaParams {
            m,
            robin_h: None,
            coeffs: None,
            eps1: vec![0.1, 1.0, 10.0],
            eps2: vec![0.1, 1.0, 10.0],
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaResidual {
    pub lemma: String,
    pub inequality: String,
    /// The side claimed to be smaller.
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`
    pub residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub residuals: Vec<LemmaResidual>,
    pub skipped: Vec<String>,
}

impl LemmaReport {
    pub fn all_passed(&self) -> bool {
        self.residuals.iter().all(|r| r.passed)
    }

    pub fn min_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min)
    }

    fn push(&mut self, lemma: &str, inequality: String, lhs: f64, rhs: f64, tol: f64) {
        let residual = rhs - lhs;
        self.residuals.push(LemmaResidual {
            lemma: lemma.to_string(),
            inequality,
            lhs,
            rhs,
            residual,
            passed: residual >= -tol,
        });
    }
}

struct RobinData {
    h: f64,
    xi_h: f64,
    xi_hm: f64,
    op_h: LaplaceOperator,
    op_hm: LaplaceOperator,
}

/// Evaluates both sides of the auxiliary inequalities on grid fields.
///
/// Eigenvalues are computed once per checker; Poincare-type steps use the
/// energy form of the eigenvalue operator, for which they hold exactly.
pub struct LemmaChecker<'a> {
    domain: &'a Domain,
    params: LemmaParams,
    star: StarConstants,
    robin: Option<RobinData>,
}

impl<'a> LemmaChecker<'a> {
    pub fn new(domain: &'a Domain, params: LemmaParams) -> Result<Self> {
        if !(params.m > 1.0) {
            return Err(CriteriaError::Regime(format!("m must exceed 1, got {}", params.m)));
        }
        let robin = match params.robin_h {
            Some(h) => {
                let op_h = LaplaceOperator::new(domain, Boundary::Robin { h })?;
                let op_hm = LaplaceOperator::new(domain, Boundary::Robin { h: h * params.m })?;
                let xi_h = op_h.first_eigenpair(domain, EIGEN_TOLERANCE)?.eigenvalue;
                let xi_hm = op_hm.first_eigenpair(domain, EIGEN_TOLERANCE)?.eigenvalue;
                Some(RobinData {
                    h,
                    xi_h,
                    xi_hm,
                    op_h,
                    op_hm,
                })
            }
            None => None,
        };
        if params.coeffs.is_some() && domain.dimension() != 3 {
            return Err(CriteriaError::DimensionMismatch {
                expected: 3,
                got: domain.dimension(),
            });
        }
        Ok(LemmaChecker {
            domain,
            star: domain.star_constants(),
            params,
            robin,
        })
    }

    pub fn check(&self, v: &Field) -> Result<LemmaReport> {
        let d = self.domain;
        if v.values.len() != d.len() {
            return Err(CriteriaError::Geometry(crate::geometry::GeometryError::ShapeMismatch {
                expected: d.len(),
                got: v.values.len(),
            }));
        }
        let tol = self.params.tolerance;
        let mut report = LemmaReport::default();
        let n = d.dimension() as f64;
        let StarConstants { m1, m2, .. } = self.star;
        let vals = &v.values;
        let grad2 = d.gradient_norm_sq(vals)?;
        let int_v2 = d.integrate_volume_with(vals, |x| x * x)?;
        let int_grad2 = d.integrate_volume(&grad2)?;
        let v_grad: Vec<f64> = vals.iter().zip(&grad2).map(|(a, g)| a * g.sqrt()).collect();
        let int_v_grad = d.integrate_volume(&v_grad)?;
        let bnd_v2 = d.integrate_boundary(vals, 2.0)?;

        report.push(
            "lemma1",
            "int_dOmega V^2 <= 2 m1 N/3 int V^2 + 2 (m2 - 1) int V |grad V|".into(),
            bnd_v2,
            2.0 * m1 * n / 3.0 * int_v2 + 2.0 * (m2 - 1.0) * int_v_grad,
            tol,
        );

        if let Some(r) = &self.robin {
            self.check_robin_field(vals, r.h)?;
            let m = self.params.m;
            let vm: Vec<f64> = vals.iter().map(|x| pow_nonneg(*x, m)).collect();
            report.push(
                "lemma2",
                "xi1(h) int V^2 <= int |grad V|^2 + h int_dOmega V^2 (energy form)".into(),
                r.xi_h * r.op_h.mass_norm_sq(vals),
                r.op_h.energy(vals),
                tol,
            );
            report.push(
                "lemma2",
                "xi1(hm) int V^2m <= int |grad V^m|^2 + hm int_dOmega V^2m (energy form)".into(),
                r.xi_hm * r.op_hm.mass_norm_sq(&vm),
                r.op_hm.energy(&vm),
                tol,
            );
            let eta_h = eta_from_xi(r.xi_h, r.h, &self.star, d.dimension());
            report.push(
                "lemma2",
                format!("eta(h) int V^2 <= int |grad V|^2 with eta(h) = {eta_h:e}"),
                eta_h * int_v2,
                int_grad2,
                tol,
            );
            let sigma = eta_from_xi(r.xi_hm, r.h * m, &self.star, d.dimension());
            let grad_vm = d.integrate_volume(&d.gradient_norm_sq(&vm)?)?;
            let int_v2m = d.integrate_volume_with(vals, |x| pow_nonneg(x, 2.0 * m))?;
            report.push(
                "lemma2",
                format!("sigma int V^2m <= int |grad V^m|^2 with sigma = eta(hm) = {sigma:e}"),
                sigma * int_v2m,
                grad_vm,
                tol,
            );
        } else {
            report.skipped.push("lemma2: no Robin coefficient".into());
        }

        if let Some(c) = &self.params.coeffs {
            self.check_interpolation(vals, c, &mut report)?;
        } else {
            report.skipped.push("lemma3: no exponent set".into());
        }
        Ok(report)
    }

    fn check_robin_field(&self, vals: &[f64], h: f64) -> Result<()> {
        let d = self.domain;
        if !d.boundary_on_nodes() {
            return Ok(());
        }
        let grad = d.gradient(vals)?;
        let grid = d.grid();
        let sup = vals.iter().copied().fold(0.0, f64::max);
        let gmax = grad
            .iter()
            .map(|g| g.iter().map(|x| x.abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let scale = gmax + h * sup;
        if scale == 0.0 {
            return Ok(());
        }
        let mut worst: f64 = 0.0;
        for i in 0..d.len() {
            if !d.on_boundary()[i] {
                continue;
            }
            let idx = grid.multi_index(i);
            for k in 0..d.dimension() {
                let outward = if idx[k] == 0 {
                    -1.0
                } else if idx[k] + 1 == grid.shape[k] {
                    1.0
                } else {
                    continue;
                };
                worst = worst.max((outward * grad[i][k] + h * vals[i]).abs() / scale);
            }
        }
        if worst > 0.05 {
            return Err(CriteriaError::BcMismatch(worst));
        }
        Ok(())
    }

    fn check_interpolation(&self, vals: &[f64], c: &H0Coefficients, report: &mut LemmaReport) -> Result<()> {
        let d = self.domain;
        let tol = self.params.tolerance;
        let (m, mu, gamma, delta, dd, alpha, sigma) = (c.m, c.mu, c.gamma, c.delta, c.d, c.alpha, c.sigma_coeff);
        let int_pow = |e: f64| d.integrate_volume_with(vals, |x| pow_nonneg(x, e));
        let v_m1 = int_pow(m + 1.0)?;
        let v_mmu = int_pow(m + mu)?;
        let v_mgamma = int_pow(m + gamma)?;
        for &eps in &self.params.eps1 {
            let rhs = (gamma - 1.0) / (gamma - mu) * eps * v_mmu
                + (1.0 - mu) / (gamma - mu) * eps.powf(-(gamma - 1.0) / (1.0 - mu)) * v_mgamma;
            report.push("lemma3", format!("int V^(m+1) bound with eps1 = {eps}"), v_m1, rhs, tol);
        }
        let vanishes = d.boundary_on_nodes()
            && vals
                .iter()
                .zip(d.on_boundary())
                .all(|(v, b)| !*b || *v == 0.0);
        if !vanishes {
            report
                .skipped
                .push("lemma3 second part: field does not vanish on the boundary".into());
            return Ok(());
        }
        let md = m + dd;
        let b = 2.0 * m + 3.0 * dd;
        let g = sobolev_constant();
        let w: Vec<f64> = vals.iter().map(|x| pow_nonneg(*x, md / 2.0)).collect();
        let grad_w = d.integrate_volume(&d.gradient_norm_sq(&w)?)?;
        let v_m = int_pow(m)?;
        let g_delta = g.powf(3.0 * delta / md);
        let g_alpha = g.powf(6.0 * alpha / b);
        for &eps in &self.params.eps2 {
            let rhs = g_delta * g_alpha * 3.0 * alpha * dd * sigma / b * eps * grad_w
                + g_delta * g_alpha * dd * sigma * (b - 3.0 * alpha) / b * eps * v_m.powf(alpha * c.beta)
                + (1.0 - dd) * eps * g_delta * sigma * v_m.powf(alpha)
                + g_delta * 3.0 * delta / (2.0 * md) * eps.powf(1.0 - 2.0 * md / (3.0 * delta)) * grad_w;
            report.push("lemma3", format!("int V^(m+gamma) bound with eps2 = {eps}"), v_mgamma, rhs, tol);
        }
        Ok(())
    }
}

/// One-shot form of [`LemmaChecker::check`].
pub fn lemma_checks(v: &Field, domain: &Domain, params: &LemmaParams) -> Result<LemmaReport> {
    LemmaChecker::new(domain, params.clone())?.check(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma4Report {
    pub xi_m: f64,
    pub phi_at_xi_m: f64,
    pub sweep_min: f64,
    pub points: usize,
    pub passed: bool,
}

/// Compares `Phi(xi_m)` against `Phi` on a log-spaced sweep over six decades
/// around `xi_m`.
pub fn lemma4_sweep(consts: &Thm3Constants, coeffs: &H0Coefficients, points: usize) -> Lemma4Report {
    let points = points.max(2);
    let at_min = consts.phi_lemma4(coeffs, consts.xi_m);
    let sweep_min = (0..points)
        .map(|j| {
            let xi = consts.xi_m * 10f64.powf(-3.0 + 6.0 * j as f64 / (points - 1) as f64);
            consts.phi_lemma4(coeffs, xi)
        })
        .fold(f64::INFINITY, f64::min);
    Lemma4Report {
        xi_m: consts.xi_m,
        phi_at_xi_m: at_min,
        sweep_min,
        points,
        passed: at_min <= sweep_min * (1.0 + 1e-12),
    }
}

fn normalized(mut values: Vec<f64>) -> Field {
    let sup = values.iter().copied().fold(0.0, f64::max);
    if sup > 0.0 {
        values.iter_mut().for_each(|v| *v /= sup);
    }
    Field::new(values, 0.0)
}

fn require_box(domain: &Domain) -> Result<()> {
    if domain.kind() == DomainKind::Ball {
        return Err(CriteriaError::Regime("random polynomial fields need an interval or box".into()));
    }
    Ok(())
}

/// Random positive cubic per axis with `f'(0) = h f(0)` and
/// `f'(L) = -h f(L)`; the product satisfies the Robin condition on every face.
pub fn robin_polynomial_field<R: Rng>(domain: &Domain, h: f64, rng: &mut R) -> Result<Field> {
    require_box(domain)?;
    let dim = domain.dimension();
    let mut axes = Vec::with_capacity(dim);
    for k in 0..dim {
        let len = domain.extents()[k];
        let cubic = loop {
            let a: f64 = rng.gen_range(0.5..1.5);
            let e: f64 = rng.gen_range(-1.0..1.0) / len.powi(3);
            let b = h * a;
            let c = -(h * (a + b * len + e * len.powi(3)) + b + 3.0 * e * len * len) / (2.0 * len + h * len * len);
            let f = move |x: f64| a + b * x + c * x * x + e * x * x * x;
            if (0..=64).all(|j| f(len * j as f64 / 64.0) > 0.0) {
                break f;
            }
        };
        axes.push(cubic);
    }
    Ok(normalized(domain.sample(|x| x.iter().zip(&axes).map(|(xi, f)| f(*xi).max(0.0)).product())))
}

/// Random positive quadratic polynomial times the product bubble
/// `prod x_k (L_k - x_k)`; vanishes on the boundary of a box.
pub fn bubble_field<R: Rng>(domain: &Domain, rng: &mut R) -> Result<Field> {
    require_box(domain)?;
    let poly = random_positive_quadratic(domain, rng);
    let lengths = domain.extents().to_vec();
    Ok(normalized(domain.sample(|x| {
        let bubble: f64 = x.iter().zip(&lengths).map(|(xi, l)| (xi * (l - xi)).max(0.0)).product();
        bubble * poly(x)
    })))
}

/// Random positive quadratic polynomial on the domain.
pub fn positive_polynomial_field<R: Rng>(domain: &Domain, rng: &mut R) -> Result<Field> {
    let poly = random_positive_quadratic(domain, rng);
    Ok(normalized(domain.sample(|x| poly(x))))
}

fn random_positive_quadratic<R: Rng>(domain: &Domain, rng: &mut R) -> impl Fn(&[f64]) -> f64 {
    let dim = domain.dimension();
    let base: f64 = rng.gen_range(0.1..1.0);
    let linear: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    let quad: Vec<f64> = (0..dim * dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    let scale: Vec<f64> = domain.extents().iter().map(|l| 1.0 / l).collect();
    let center: Vec<f64> = domain.center().to_vec();
    let is_ball = domain.kind() == DomainKind::Ball;
    move |x: &[f64]| {
        // coordinates scaled into [0, 1]; all coefficients nonnegative
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(k, v)| {
                if is_ball {
                    0.5 * (1.0 + (v - center[k]) * scale[0])
                } else {
                    v * scale[k]
                }
            })
            .collect();
        let mut acc = base;
        for i in 0..dim {
            acc += linear[i] * y[i];
            for j in 0..dim {
                acc += quad[i * dim + j] * y[i] * y[j];
            }
        }
        acc
    }
}
