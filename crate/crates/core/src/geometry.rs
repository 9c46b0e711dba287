//! Computational domains, star-shape constants and quadrature.
//!
//! Every domain is a uniform tensor grid of nodes. Boxes and intervals occupy
//! `[0, L_1] x ... x [0, L_N]` and carry nodes on their boundary. Balls of
//! radius `R` are embedded in the bounding box `[-R, R]^N`; only nodes strictly
//! inside the ball are active and the boundary is represented by "walls"
//! (grid faces between an active node and the exterior).
//!
//! The same skeleton serves three consumers:
//! * quadrature (`integrate_volume`, `integrate_boundary`),
//! * the finite-volume diffusion operator (`faces`, `walls`, `control_volumes`),
//! * the discrete gradient used by functionals and gradient sources.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("unsupported dimension {0} (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("interval domains are one-dimensional, got dimension {0}")]
    IntervalDimension(usize),
    #[error("extent {0} must be strictly positive")]
    NonPositiveExtent(f64),
    #[error("expected {expected} extents, got {got}")]
    ExtentCount { expected: usize, got: usize },
    #[error("star center must have {expected} coordinates, got {got}")]
    CenterDimension { expected: usize, got: usize },
    #[error("star center must lie strictly inside the domain")]
    CenterNotInterior,
    #[error("ball domains require the star center at the ball center")]
    BallCenter,
    #[error("resolution {0} is below the minimum of 4 nodes per axis")]
    Resolution(usize),
    #[error("field has {got} values but the domain grid has {expected} nodes")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("boundary power {0} must be at least 1")]
    BoundaryPower(f64),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Interval,
    Box,
    Ball,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Interval => "interval",
            DomainKind::Box => "box",
            DomainKind::Ball => "ball",
        }
    }
}

impl std::str::FromStr for DomainKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "interval" => Ok(DomainKind::Interval),
            "box" => Ok(DomainKind::Box),
            "ball" => Ok(DomainKind::Ball),
            other => Err(format!("unknown domain kind `{other}`")),
        }
    }
}

/// Boundary condition `k u_nu + h u = 0` with `k` in {0, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    /// `k = 0`: `u = 0` on the boundary.
    Dirichlet,
    /// `k = 1`: `u_nu = -h u` on the boundary.
    Robin { h: f64 },
}

/// Nonnegative grid function over a [`Domain`] at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn new(values: Vec<f64>, time: f64) -> Self {
        Field { values, time }
    }

    pub fn zeros(domain: &Domain) -> Self {
        Field::new(vec![0.0; domain.len()], 0.0)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Field::new(self.values.iter().map(|v| v * c).collect(), self.time)
    }
}

/// Geometric constants of a star-shaped domain with respect to its center `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarConstants {
    pub m1: f64,
    pub m2: f64,
    /// `min_{dOmega} (x - x0) . nu`
    pub support: f64,
    /// `max_{closure} |x - x0|`
    pub radius: f64,
}

/// Tensor grid of nodes; unused axes have a single node.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub shape: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    strides: [usize; 3],
}

impl Grid {
    fn new(shape: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Self {
        let strides = [1, shape[0], shape[0] * shape[1]];
        Grid {
            shape,
            spacing,
            origin,
            strides,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.strides[1] * idx[1] + self.strides[2] * idx[2]
    }

    #[inline]
    pub fn multi_index(&self, i: usize) -> [usize; 3] {
        let k = i / self.strides[2];
        let r = i % self.strides[2];
        [r % self.shape[0], r / self.shape[0], k]
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [f64; 3] {
        let idx = self.multi_index(i);
        [
            self.origin[0] + idx[0] as f64 * self.spacing[0],
            self.origin[1] + idx[1] as f64 * self.spacing[1],
            self.origin[2] + idx[2] as f64 * self.spacing[2],
        ]
    }
}

/// Interior face between two active nodes; `conductance = area / spacing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub a: usize,
    pub b: usize,
    pub conductance: f64,
}

/// Piece of the discrete boundary attached to one node.
///
/// On boxes the node lies on the boundary (`gap == 0`). On balls the wall is
/// the grid face towards an exterior node; `gap` is the distance along the axis
/// from the node to the sphere and `normal_cos = |nu_axis|` projects the grid
/// face onto the true surface so that `sum(area * normal_cos)` approximates the
/// surface measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub node: usize,
    pub area: f64,
    pub gap: f64,
    pub normal_cos: f64,
}

/// Surface quadrature point with an interpolation stencil into the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePoint {
    pub weight: f64,
    pub stencil: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    dim: usize,
    extents: Vec<f64>,
    center: [f64; 3],
    resolution: usize,
    grid: Grid,
    active: Vec<bool>,
    on_boundary: Vec<bool>,
    weights: Vec<f64>,
    control: Vec<f64>,
    faces: Vec<Face>,
    walls: Vec<Wall>,
    surface: Vec<SurfacePoint>,
    measure: f64,
    boundary_measure: f64,
}

impl Domain {
    /// Builds a domain. `center` defaults to the canonical center (midpoint of
    /// a box, center of a ball).
    pub fn new(
        kind: DomainKind,
        extents: &[f64],
        dimension: usize,
        center: Option<&[f64]>,
        resolution: usize,
    ) -> Result<Self> {
        if !(1..=3).contains(&dimension) {
            return Err(GeometryError::UnsupportedDimension(dimension));
        }
        if kind == DomainKind::Interval && dimension != 1 {
            return Err(GeometryError::IntervalDimension(dimension));
        }
        if resolution < 4 {
            return Err(GeometryError::Resolution(resolution));
        }
        if let Some(&bad) = extents.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(GeometryError::NonPositiveExtent(bad));
        }
        let extents: Vec<f64> = match kind {
            DomainKind::Ball => {
                if extents.len() != 1 {
                    return Err(GeometryError::ExtentCount {
                        expected: 1,
                        got: extents.len(),
                    });
                }
                extents.to_vec()
            }
            _ if extents.len() == dimension => extents.to_vec(),
            // a single extent is broadcast to a cube
            _ if extents.len() == 1 => vec![extents[0]; dimension],
            _ => {
                return Err(GeometryError::ExtentCount {
                    expected: dimension,
                    got: extents.len(),
                })
            }
        };

        let mut x0 = [0.0; 3];
        match center {
            Some(c) => {
                if c.len() != dimension {
                    return Err(GeometryError::CenterDimension {
                        expected: dimension,
                        got: c.len(),
                    });
                }
                x0[..dimension].copy_from_slice(c);
            }
            None => {
                if kind != DomainKind::Ball {
                    for k in 0..dimension {
                        x0[k] = 0.5 * extents[k];
                    }
                }
            }
        }
        match kind {
            DomainKind::Ball => {
                let r = extents[0];
                if x0.iter().any(|c| c.abs() > 1e-12 * r) {
                    return Err(GeometryError::BallCenter);
                }
            }
            _ => {
                for k in 0..dimension {
                    if !(x0[k] > 0.0 && x0[k] < extents[k]) {
                        return Err(GeometryError::CenterNotInterior);
                    }
                }
            }
        }

        match kind {
            DomainKind::Interval | DomainKind::Box => {
                Ok(Self::build_box(kind, dimension, extents, x0, resolution))
            }
            DomainKind::Ball => Ok(Self::build_ball(dimension, extents, resolution)),
        }
    }

    fn build_box(
        kind: DomainKind,
        dim: usize,
        extents: Vec<f64>,
        center: [f64; 3],
        n: usize,
    ) -> Self {
        let mut shape = [1usize; 3];
        let mut spacing = [1.0; 3];
        for k in 0..dim {
            shape[k] = n;
            spacing[k] = extents[k] / (n - 1) as f64;
        }
        let grid = Grid::new(shape, spacing, [0.0; 3]);
        let len = grid.len();

        // 1D trapezoid weights per axis; unused axes weigh 1
        let axis_weight = |k: usize, i: usize| -> f64 {
            if k >= dim {
                1.0
            } else if i == 0 || i == n - 1 {
                0.5 * spacing[k]
            } else {
                spacing[k]
            }
        };

        let mut weights = vec![0.0; len];
        let mut on_boundary = vec![false; len];
        let mut faces = Vec::with_capacity(dim * len);
        let mut walls = Vec::new();
        let mut surface = Vec::new();
        for (i, w) in weights.iter_mut().enumerate() {
            let idx = grid.multi_index(i);
            *w = (0..3).map(|k| axis_weight(k, idx[k])).product();
            for k in 0..dim {
                let others: f64 = (0..3)
                    .filter(|&j| j != k)
                    .map(|j| axis_weight(j, idx[j]))
                    .product();
                if idx[k] + 1 < n {
                    faces.push(Face {
                        a: i,
                        b: i + grid.stride(k),
                        conductance: others / spacing[k],
                    });
                }
                if idx[k] == 0 || idx[k] == n - 1 {
                    on_boundary[i] = true;
                    walls.push(Wall {
                        node: i,
                        area: others,
                        gap: 0.0,
                        normal_cos: 1.0,
                    });
                    surface.push(SurfacePoint {
                        weight: others,
                        stencil: vec![(i, 1.0)],
                    });
                }
            }
        }

        let measure = extents.iter().product();
        let boundary_measure = if dim == 1 {
            2.0
        } else {
            (0..dim)
                .map(|k| {
                    2.0 * (0..dim)
                        .filter(|&j| j != k)
                        .map(|j| extents[j])
                        .product::<f64>()
                })
                .sum()
        };

        Domain {
            kind,
            dim,
            extents,
            center,
            resolution: n,
            grid,
            active: vec![true; len],
            on_boundary,
            control: weights.clone(),
            weights,
            faces,
            walls,
            surface,
            measure,
            boundary_measure,
        }
    }

    fn build_ball(dim: usize, extents: Vec<f64>, n: usize) -> Self {
        let r = extents[0];
        let h = 2.0 * r / (n - 1) as f64;
        let mut shape = [1usize; 3];
        let mut spacing = [1.0; 3];
        let mut origin = [0.0; 3];
        for k in 0..dim {
            shape[k] = n;
            spacing[k] = h;
            origin[k] = -r;
        }
        let grid = Grid::new(shape, spacing, origin);
        let len = grid.len();
        let norm2 = |x: &[f64; 3]| x[0] * x[0] + x[1] * x[1] + x[2] * x[2];

        let active: Vec<bool> = (0..len)
            .map(|i| norm2(&grid.coords(i)) < r * r * (1.0 - 1e-12))
            .collect();

        let cell = h.powi(dim as i32);
        let face_area = h.powi(dim as i32 - 1);
        let mut faces = Vec::new();
        let mut walls = Vec::new();
        let mut on_boundary = vec![false; len];
        for i in 0..len {
            if !active[i] {
                continue;
            }
            let idx = grid.multi_index(i);
            let x = grid.coords(i);
            let rx = norm2(&x).sqrt();
            for k in 0..dim {
                for dir in [-1i64, 1] {
                    let j = idx[k] as i64 + dir;
                    let neighbour_active = j >= 0
                        && (j as usize) < n
                        && active[(i as i64 + dir * grid.stride(k) as i64) as usize];
                    if neighbour_active {
                        if dir == 1 {
                            faces.push(Face {
                                a: i,
                                b: i + grid.stride(k),
                                conductance: face_area / h,
                            });
                        }
                    } else {
                        on_boundary[i] = true;
                        let s = dir as f64;
                        let gap = -s * x[k] + (x[k] * x[k] + r * r - rx * rx).max(0.0).sqrt();
                        let normal_cos = if rx > 0.0 { x[k].abs() / rx } else { 1.0 };
                        walls.push(Wall {
                            node: i,
                            area: face_area,
                            gap,
                            normal_cos,
                        });
                    }
                }
            }
        }

        let weights = ball_volume_weights(&grid, &active, dim, r);
        let control: Vec<f64> = active
            .iter()
            .map(|&a| if a { cell } else { 0.0 })
            .collect();
        let surface = sphere_quadrature(&grid, &active, dim, r, n);

        Domain {
            kind: DomainKind::Ball,
            dim,
            extents,
            center: [0.0; 3],
            resolution: n,
            grid,
            active,
            on_boundary,
            weights,
            control,
            faces,
            walls,
            surface,
            measure: ball_measure(dim, r),
            boundary_measure: sphere_measure(dim, r),
        }
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn center(&self) -> &[f64] {
        &self.center[..self.dim]
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    /// Nodes that carry a wall: on the box boundary, or ball nodes adjacent to
    /// the exterior.
    pub fn on_boundary(&self) -> &[bool] {
        &self.on_boundary
    }

    /// Whether boundary nodes sit exactly on the boundary (box/interval).
    pub fn boundary_on_nodes(&self) -> bool {
        self.kind != DomainKind::Ball
    }

    /// Nodes whose value is pinned to zero under `boundary`.
    pub fn is_fixed(&self, i: usize, boundary: Boundary) -> bool {
        !self.active[i]
            || (matches!(boundary, Boundary::Dirichlet) && self.boundary_on_nodes() && self.on_boundary[i])
    }

    pub fn volume_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn control_volumes(&self) -> &[f64] {
        &self.control
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn walls(&self) -> &[Wall] {
        &self.walls
    }

    pub fn surface_points(&self) -> &[SurfacePoint] {
        &self.surface
    }

    /// Exact `|Omega|`.
    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// Exact `|dOmega|` (counting measure in 1D).
    pub fn boundary_measure(&self) -> f64 {
        self.boundary_measure
    }

    /// Smallest grid spacing.
    pub fn min_spacing(&self) -> f64 {
        self.grid.spacing[..self.dim]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn coords(&self, i: usize) -> [f64; 3] {
        self.grid.coords(i)
    }

    /// Evaluates `f` at every active node; inactive nodes get 0.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                if self.active[i] {
                    let x = self.grid.coords(i);
                    f(&x[..self.dim])
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Star-shape constants `m1`, `m2` relative to the domain center, computed
    /// analytically for each supported kind.
    pub fn star_constants(&self) -> StarConstants {
        let (support, radius) = match self.kind {
            DomainKind::Ball => (self.extents[0], self.extents[0]),
            DomainKind::Interval | DomainKind::Box => {
                let mut support = f64::INFINITY;
                let mut far2 = 0.0;
                for k in 0..self.dim {
                    let lo = self.center[k];
                    let hi = self.extents[k] - self.center[k];
                    support = support.min(lo.min(hi));
                    far2 += lo.max(hi).powi(2);
                }
                (support, f64::sqrt(far2))
            }
        };
        StarConstants {
            m1: 3.0 / (2.0 * support),
            m2: 1.0 + radius / support,
            support,
            radius,
        }
    }

    fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(GeometryError::ShapeMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        Ok(())
    }

    /// Quadrature of `int_Omega values dx`; exact for constants.
    pub fn integrate_volume(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values)?;
        Ok(self.weights.iter().zip(values).map(|(w, v)| w * v).sum())
    }

    /// Quadrature of `int_Omega f(values) dx`.
    pub fn integrate_volume_with<F: Fn(f64) -> f64>(&self, values: &[f64], f: F) -> Result<f64> {
        self.check_len(values)?;
        Ok(self
            .weights
            .iter()
            .zip(values)
            .filter(|(w, _)| **w != 0.0)
            .map(|(w, v)| w * f(*v))
            .sum())
    }

    /// Quadrature of `int_dOmega values^power ds`.
    pub fn integrate_boundary(&self, values: &[f64], power: f64) -> Result<f64> {
        if !(power >= 1.0) {
            return Err(GeometryError::BoundaryPower(power));
        }
        self.check_len(values)?;
        Ok(self
            .surface
            .iter()
            .map(|p| {
                let v: f64 = p.stencil.iter().map(|&(i, w)| w * values[i]).sum();
                p.weight * pow_nonneg(v, power)
            })
            .sum())
    }

    /// Second-order gradient: centered in the interior, one-sided (three
    /// point) where a neighbour is missing.
    pub fn gradient(&self, values: &[f64]) -> Result<Vec<[f64; 3]>> {
        self.check_len(values)?;
        let mut out = vec![[0.0; 3]; self.len()];
        for (i, g) in out.iter_mut().enumerate() {
            if self.active[i] {
                *g = self.gradient_at(values, i);
            }
        }
        Ok(out)
    }

    /// Squared Euclidean norm of the discrete gradient at every node.
    pub fn gradient_norm_sq(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check_len(values)?;
        Ok((0..self.len())
            .map(|i| {
                if self.active[i] {
                    let g = self.gradient_at(values, i);
                    g[0] * g[0] + g[1] * g[1] + g[2] * g[2]
                } else {
                    0.0
                }
            })
            .collect())
    }

    #[inline]
    fn gradient_at(&self, u: &[f64], i: usize) -> [f64; 3] {
        let idx = self.grid.multi_index(i);
        let mut g = [0.0; 3];
        for k in 0..self.dim {
            let s = self.grid.stride(k);
            let h = self.grid.spacing[k];
            let n = self.grid.shape[k];
            let ok = |steps: i64| -> bool {
                let j = idx[k] as i64 + steps;
                j >= 0
                    && (j as usize) < n
                    && self.active[(i as i64 + steps * s as i64) as usize]
            };
            let at = |steps: i64| u[(i as i64 + steps * s as i64) as usize];
            g[k] = match (ok(-1), ok(1)) {
                (true, true) => (at(1) - at(-1)) / (2.0 * h),
                (false, true) => {
                    if ok(2) {
                        (-3.0 * u[i] + 4.0 * at(1) - at(2)) / (2.0 * h)
                    } else {
                        (at(1) - u[i]) / h
                    }
                }
                (true, false) => {
                    if ok(-2) {
                        (3.0 * u[i] - 4.0 * at(-1) + at(-2)) / (2.0 * h)
                    } else {
                        (u[i] - at(-1)) / h
                    }
                }
                (false, false) => 0.0,
            };
        }
        g
    }
}

#[inline]
pub(crate) fn pow_nonneg(v: f64, power: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else if power == 1.0 {
        v
    } else if power == 2.0 {
        v * v
    } else {
        v.powf(power)
    }
}

pub fn ball_measure(dim: usize, r: f64) -> f64 {
    match dim {
        1 => 2.0 * r,
        2 => PI * r * r,
        _ => 4.0 / 3.0 * PI * r.powi(3),
    }
}

pub fn sphere_measure(dim: usize, r: f64) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI * r,
        _ => 4.0 * PI * r * r,
    }
}

/// Volume weights for a ball: each active node receives the part of its cell
/// lying inside the ball, plus the inside part of exterior cells adjacent to it.
/// The total is normalised to the exact ball measure.
fn ball_volume_weights(grid: &Grid, active: &[bool], dim: usize, r: f64) -> Vec<f64> {
    const SUB: usize = 8;
    let h = grid.spacing[0];
    let cell = h.powi(dim as i32);
    let half_diag = 0.5 * h * (dim as f64).sqrt();
    let len = grid.len();
    let mut weights = vec![0.0; len];

    let fraction = |x: &[f64; 3]| -> f64 {
        let rx = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if rx + half_diag <= r {
            return 1.0;
        }
        if rx - half_diag >= r {
            return 0.0;
        }
        let subs = SUB.pow(dim as u32);
        let mut inside = 0usize;
        for s in 0..subs {
            let mut p = [0.0; 3];
            let mut rem = s;
            for k in 0..dim {
                let c = rem % SUB;
                rem /= SUB;
                p[k] = x[k] - 0.5 * h + (c as f64 + 0.5) * h / SUB as f64;
            }
            if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] < r * r {
                inside += 1;
            }
        }
        inside as f64 / subs as f64
    };

    for i in 0..len {
        let x = grid.coords(i);
        let f = fraction(&x);
        if f == 0.0 {
            continue;
        }
        if active[i] {
            weights[i] += f * cell;
            continue;
        }
        // hand the sliver to the first active axis neighbour
        let idx = grid.multi_index(i);
        'search: for k in 0..dim {
            for dir in [-1i64, 1] {
                let j = idx[k] as i64 + dir;
                if j >= 0 && (j as usize) < grid.shape[k] {
                    let nb = (i as i64 + dir * grid.stride(k) as i64) as usize;
                    if active[nb] {
                        weights[nb] += f * cell;
                        break 'search;
                    }
                }
            }
        }
    }
    let total: f64 = weights.iter().sum();
    let scale = ball_measure(dim, r) / total;
    weights.iter_mut().for_each(|w| *w *= scale);
    weights
}

/// Analytic parametrisation of the sphere with multilinear interpolation of
/// grid values restricted to active nodes.
fn sphere_quadrature(grid: &Grid, active: &[bool], dim: usize, r: f64, n: usize) -> Vec<SurfacePoint> {
    let mut points: Vec<([f64; 3], f64)> = Vec::new();
    match dim {
        1 => {
            points.push(([-r, 0.0, 0.0], 1.0));
            points.push(([r, 0.0, 0.0], 1.0));
        }
        2 => {
            let m = 4 * n;
            let w = 2.0 * PI * r / m as f64;
            for j in 0..m {
                let th = 2.0 * PI * (j as f64 + 0.5) / m as f64;
                points.push(([r * th.cos(), r * th.sin(), 0.0], w));
            }
        }
        _ => {
            let nz = 2 * n;
            let nphi = 4 * n;
            let w = 4.0 * PI * r * r / (nz * nphi) as f64;
            for a in 0..nz {
                let z = -1.0 + (a as f64 + 0.5) * 2.0 / nz as f64;
                let rho = (1.0 - z * z).sqrt();
                for b in 0..nphi {
                    let ph = 2.0 * PI * (b as f64 + 0.5) / nphi as f64;
                    points.push(([r * rho * ph.cos(), r * rho * ph.sin(), r * z], w));
                }
            }
        }
    }
    points
        .into_iter()
        .map(|(y, weight)| SurfacePoint {
            weight,
            stencil: interpolation_stencil(grid, active, dim, &y),
        })
        .collect()
}

fn interpolation_stencil(grid: &Grid, active: &[bool], dim: usize, y: &[f64; 3]) -> Vec<(usize, f64)> {
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for k in 0..dim {
        let t = (y[k] - grid.origin[k]) / grid.spacing[k];
        let i = (t.floor().max(0.0) as usize).min(grid.shape[k] - 2);
        base[k] = i;
        frac[k] = (t - i as f64).clamp(0.0, 1.0);
    }
    let mut stencil = Vec::new();
    let mut total = 0.0;
    for corner in 0..(1usize << dim) {
        let mut idx = base;
        let mut w = 1.0;
        for k in 0..dim {
            if corner & (1 << k) != 0 {
                idx[k] += 1;
                w *= frac[k];
            } else {
                w *= 1.0 - frac[k];
            }
        }
        let i = grid.index(idx);
        if active[i] && w > 0.0 {
            stencil.push((i, w));
            total += w;
        }
    }
    if total > 1e-12 {
        stencil.iter_mut().for_each(|s| s.1 /= total);
        return stencil;
    }
    // no active corner: nearest active node
    let mut best = None;
    let mut best_d = f64::INFINITY;
    for (i, &a) in active.iter().enumerate() {
        if a {
            let x = grid.coords(i);
            let d: f64 = (0..dim).map(|k| (x[k] - y[k]).powi(2)).sum();
            if d < best_d {
                best_d = d;
                best = Some(i);
            }
        }
    }
    best.map(|i| vec![(i, 1.0)]).unwrap_or_default()
}
