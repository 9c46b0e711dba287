//! First Dirichlet and Robin eigenvalues of the Laplacian and the Robin
//! feasibility condition built on them.
//!
//! The discrete problem is the generalized symmetric eigenproblem
//! `K w = xi M w` where `K` is the finite-volume stiffness assembled from the
//! domain faces and walls and `M` is the diagonal of control volumes. At a
//! Robin wall the normal derivative is eliminated through the boundary flux
//! `h w`, which on box domains is the half-cell form of a ghost node with a
//! centred normal difference. The smallest eigenvalue is found by unshifted
//! inverse iteration with preconditioned conjugate-gradient inner solves.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Boundary, Domain, Field, GeometryError, StarConstants};

/// Default relative residual at which inverse iteration stops.
pub const EIGEN_TOLERANCE: f64 = 1e-8;
const MAX_OUTER: usize = 2000;
const INNER_TOLERANCE: f64 = 1e-13;
/// Lower clamp on the node-to-sphere gap (in grid spacings) for Dirichlet
/// walls on balls.
pub(crate) const MIN_GAP_FRACTION: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("Robin parameter h must be positive, got {0}")]
    NonPositiveH(f64),
    #[error("diffusion exponent m must exceed 1, got {0}")]
    InvalidExponent(f64),
    #[error("inverse iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("inner conjugate-gradient solve stalled at relative residual {0:e}")]
    InnerSolve(f64),
    #[error("domain has no unknowns for this boundary condition")]
    Empty,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, SpectralError>;

/// Converged first eigenpair.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub eigenvalue: f64,
    /// First eigenfunction on the full grid, nonnegative with maximum 1.
    pub eigenvector: Field,
    /// Relative residual `|K w - xi M w|_{M^-1} / (xi |w|_M)`.
    pub residual: f64,
    pub iterations: usize,
    /// Total conjugate-gradient iterations spent in inner solves.
    pub inner_iterations: usize,
}

/// Symmetric positive-definite finite-volume Laplacian restricted to the
/// unknown (non-pinned) nodes.
#[derive(Debug, Clone)]
pub struct LaplaceOperator {
    nodes: Vec<usize>,
    slot: Vec<Option<usize>>,
    edges: Vec<(usize, usize, f64)>,
    diag_extra: Vec<f64>,
    mass: Vec<f64>,
}

impl LaplaceOperator {
    pub fn new(domain: &Domain, boundary: Boundary) -> Result<Self> {
        if let Boundary::Robin { h } = boundary {
            if !(h > 0.0) {
                return Err(SpectralError::NonPositiveH(h));
            }
        }
        let mut slot = vec![None; domain.len()];
        let mut nodes = Vec::new();
        for (i, s) in slot.iter_mut().enumerate() {
            if !domain.is_fixed(i, boundary) {
                *s = Some(nodes.len());
                nodes.push(i);
            }
        }
        if nodes.is_empty() {
            return Err(SpectralError::Empty);
        }
        let mut diag_extra = vec![0.0; nodes.len()];
        let mut edges = Vec::with_capacity(domain.faces().len());
        for f in domain.faces() {
            match (slot[f.a], slot[f.b]) {
                (Some(a), Some(b)) => edges.push((a, b, f.conductance)),
                (Some(a), None) => diag_extra[a] += f.conductance,
                (None, Some(b)) => diag_extra[b] += f.conductance,
                (None, None) => {}
            }
        }
        let spacing = domain.min_spacing();
        for w in domain.walls() {
            let Some(a) = slot[w.node] else { continue };
            match boundary {
                Boundary::Robin { h } => diag_extra[a] += h * w.area * w.normal_cos,
                Boundary::Dirichlet => {
                    // box boundary nodes are pinned; ball walls sit at `gap`
                    if w.gap > 0.0 {
                        diag_extra[a] += w.area / w.gap.max(MIN_GAP_FRACTION * spacing);
                    }
                }
            }
        }
        let mass = nodes.iter().map(|&i| domain.control_volumes()[i]).collect();
        Ok(LaplaceOperator {
            nodes,
            slot,
            edges,
            diag_extra,
            mass,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.nodes.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (yi, (xi, d)) in y.iter_mut().zip(x.iter().zip(&self.diag_extra)) {
            *yi = d * xi;
        }
        for &(a, b, c) in &self.edges {
            let flux = c * (x[a] - x[b]);
            y[a] += flux;
            y[b] -= flux;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = self.diag_extra.clone();
        for &(a, b, c) in &self.edges {
            d[a] += c;
            d[b] += c;
        }
        d
    }

    /// Discrete energy `x^T K x` of a grid function: the quadrature of
    /// `int |grad v|^2` by face differences plus the wall terms of the
    /// boundary condition (`h int v^2 ds` for Robin).
    pub fn energy(&self, values: &[f64]) -> f64 {
        let x = self.gather(values);
        let mut y = vec![0.0; x.len()];
        self.apply(&x, &mut y);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    /// `x^T M x` of a grid function.
    pub fn mass_norm_sq(&self, values: &[f64]) -> f64 {
        self.gather(values)
            .iter()
            .zip(&self.mass)
            .map(|(x, m)| m * x * x)
            .sum()
    }

    pub fn rayleigh_quotient(&self, values: &[f64]) -> f64 {
        self.energy(values) / self.mass_norm_sq(values)
    }

    fn gather(&self, values: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&i| values[i]).collect()
    }

    fn scatter(&self, x: &[f64], len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (&i, v) in self.nodes.iter().zip(x) {
            out[i] = *v;
        }
        out
    }

    /// Whether the grid node is an unknown of this operator.
    pub fn contains(&self, node: usize) -> bool {
        self.slot[node].is_some()
    }

    /// Jacobi-preconditioned conjugate gradients for `K x = b`.
    fn solve(&self, b: &[f64], x: &mut [f64], diag: &[f64]) -> Result<usize> {
        let n = b.len();
        let mut r = vec![0.0; n];
        let mut ap = vec![0.0; n];
        self.apply(x, &mut ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        let bnorm = norm(b).max(f64::MIN_POSITIVE);
        let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let cap = 20 * n + 100;
        for it in 0..cap {
            if norm(&r) <= INNER_TOLERANCE * bnorm {
                return Ok(it);
            }
            self.apply(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let rel = norm(&r) / bnorm;
        if rel < 1e-9 {
            Ok(cap)
        } else {
            Err(SpectralError::InnerSolve(rel))
        }
    }

    /// Smallest eigenpair by inverse iteration with shift 0.
    pub fn first_eigenpair(&self, domain: &Domain, tolerance: f64) -> Result<EigenResult> {
        let n = self.unknowns();
        let diag = self.diagonal();
        let mut w = vec![1.0; n];
        normalize_mass(&mut w, &self.mass);
        let mut kw = vec![0.0; n];
        let mut z = w.clone();
        let mut inner = 0;
        let mut residual = f64::INFINITY;
        for it in 1..=MAX_OUTER {
            let rhs: Vec<f64> = w.iter().zip(&self.mass).map(|(a, m)| a * m).collect();
            inner += self.solve(&rhs, &mut z, &diag)?;
            w.copy_from_slice(&z);
            normalize_mass(&mut w, &self.mass);
            // warm start for the next solve: z ~ w / xi
            self.apply(&w, &mut kw);
            let xi = dot(&w, &kw);
            let res_sq: f64 = kw
                .iter()
                .zip(w.iter().zip(&self.mass))
                .map(|(k, (x, m))| {
                    let r = k - xi * m * x;
                    r * r / m
                })
                .sum();
            residual = res_sq.sqrt() / xi;
            for (zi, wi) in z.iter_mut().zip(&w) {
                *zi = wi / xi;
            }
            if residual <= tolerance {
                let mut values = self.scatter(&w, domain.len());
                let sum: f64 = values.iter().sum();
                if sum < 0.0 {
                    values.iter_mut().for_each(|v| *v = -*v);
                }
                let max = values.iter().copied().fold(0.0, f64::max);
                for v in values.iter_mut() {
                    *v = (*v / max).max(0.0);
                }
                return Ok(EigenResult {
                    eigenvalue: xi,
                    eigenvector: Field::new(values, 0.0),
                    residual,
                    iterations: it,
                    inner_iterations: inner,
                });
            }
        }
        Err(SpectralError::NoConvergence {
            iterations: MAX_OUTER,
            residual,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize_mass(w: &mut [f64], mass: &[f64]) {
    let n: f64 = w.iter().zip(mass).map(|(x, m)| m * x * x).sum::<f64>().sqrt();
    w.iter_mut().for_each(|x| *x /= n);
}

/// First Dirichlet eigenvalue `lambda_1` of `-Laplace` (the optimal Poincare
/// constant).
pub fn dirichlet_lambda1(domain: &Domain) -> Result<EigenResult> {
    LaplaceOperator::new(domain, Boundary::Dirichlet)?.first_eigenpair(domain, EIGEN_TOLERANCE)
}

/// First eigenvalue `xi_1(h)` of `Laplace w + xi w = 0`, `w_nu + h w = 0`.
pub fn robin_xi1(domain: &Domain, h: f64) -> Result<EigenResult> {
    LaplaceOperator::new(domain, Boundary::Robin { h })?.first_eigenpair(domain, EIGEN_TOLERANCE)
}

/// `eta(h) = (3 xi1 - h (2 m1 N + 3 m2 - 3)) / (3 (h (m2 - 1) + 1))`.
pub fn eta_from_xi(xi1: f64, h: f64, star: &StarConstants, dim: usize) -> f64 {
    let n = dim as f64;
    (3.0 * xi1 - h * (2.0 * star.m1 * n + 3.0 * star.m2 - 3.0)) / (3.0 * (h * (star.m2 - 1.0) + 1.0))
}

/// `eta(h)` with `xi_1(h)` computed on the domain.
pub fn eta(domain: &Domain, h: f64) -> Result<f64> {
    let xi = robin_xi1(domain, h)?.eigenvalue;
    Ok(eta_from_xi(xi, h, &domain.star_constants(), domain.dimension()))
}

/// Right-hand side `2 m1 N / 3 + m2 - 1` of the Robin feasibility condition.
pub fn h3_threshold(star: &StarConstants, dim: usize) -> f64 {
    2.0 * star.m1 * dim as f64 / 3.0 + star.m2 - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H3Check {
    pub feasible: bool,
    /// `xi_1(hm)/(hm) - (2 m1 N/3 + m2 - 1)`
    pub margin: f64,
    pub h_effective: f64,
    pub xi1: f64,
    /// `eta(hm)`, the Robin constant of the gradient inequality for `V^m`.
    pub sigma_robin: f64,
    pub residual: f64,
}

/// Evaluates `xi_1(hm)/(hm) >= 2 m1 N/3 + m2 - 1`.
pub fn check_h3(domain: &Domain, h: f64, m: f64) -> Result<H3Check> {
    if !(m > 1.0) {
        return Err(SpectralError::InvalidExponent(m));
    }
    if !(h > 0.0) {
        return Err(SpectralError::NonPositiveH(h));
    }
    let hm = h * m;
    let eig = robin_xi1(domain, hm)?;
    let star = domain.star_constants();
    let margin = eig.eigenvalue / hm - h3_threshold(&star, domain.dimension());
    Ok(H3Check {
        feasible: margin >= 0.0,
        margin,
        h_effective: hm,
        xi1: eig.eigenvalue,
        sigma_robin: eta_from_xi(eig.eigenvalue, hm, &star, domain.dimension()),
        residual: eig.residual,
    })
}

/// Upper bound on the feasibility margin valid for every `h`.
///
/// The constant test function gives `xi_1(H) <= H |dOmega| / |Omega|` in the
/// discrete Rayleigh quotient, so the margin never exceeds
/// `wall_area / volume - (2 m1 N/3 + m2 - 1)`. The divergence theorem makes
/// this negative on every star-shaped domain.
pub fn h3_margin_upper_bound(domain: &Domain) -> f64 {
    let walls: f64 = domain.walls().iter().map(|w| w.area * w.normal_cos).sum();
    let volume: f64 = domain.control_volumes().iter().sum();
    walls / volume - h3_threshold(&domain.star_constants(), domain.dimension())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierProbe {
    pub m: f64,
    /// `(h, margin)` samples of the scan.
    pub samples: Vec<(f64, f64)>,
    /// Smallest `h` at which the margin changes sign, if any.
    pub frontier: Option<f64>,
    pub margin_upper_bound: f64,
}

/// Scans `h` over a log grid and bisects the first sign change of the
/// feasibility margin.
pub fn feasibility_frontier(domain: &Domain, m: f64, h_lo: f64, h_hi: f64, samples: usize) -> Result<FrontierProbe> {
    if !(h_lo > 0.0 && h_hi > h_lo) {
        return Err(SpectralError::NonPositiveH(h_lo));
    }
    let samples = samples.max(2);
    let mut scan = Vec::with_capacity(samples);
    for j in 0..samples {
        let t = j as f64 / (samples - 1) as f64;
        let h = h_lo * (h_hi / h_lo).powf(t);
        scan.push((h, check_h3(domain, h, m)?.margin));
    }
    let mut frontier = None;
    if let Some(w) = scan.windows(2).find(|w| (w[0].1 >= 0.0) != (w[1].1 >= 0.0)) {
        let (mut a, mut fa) = w[0];
        let mut b = w[1].0;
        for _ in 0..40 {
            let mid = (a * b).sqrt();
            let fm = check_h3(domain, mid, m)?.margin;
            if (fm >= 0.0) == (fa >= 0.0) {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
            if b / a - 1.0 < 1e-6 {
                break;
            }
        }
        frontier = Some((a * b).sqrt());
    }
    Ok(FrontierProbe {
        m,
        samples: scan,
        frontier,
        margin_upper_bound: h3_margin_upper_bound(domain),
    })
}
