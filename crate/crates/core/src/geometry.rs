//! Container `Omega`, substrate `S = T^d \ closure(Omega)` and the distance data
//! the tension construction and the scheme need.
//!
//! Every shape is described analytically; masks are cell-center samples of its
//! exact signed distance, which is positive inside `Omega`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridError, Point, ScalarField, TorusGrid, VectorField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("shape not supported in dimension {dim}: {what}")]
    Unsupported { dim: usize, what: String },
    #[error("container comes within {margin:.4} of the torus seam, at least {required:.4} is required")]
    SeamMargin { margin: f64, required: f64 },
    #[error("strip width {delta} is not below the reach {reach} of the boundary")]
    DeltaExceedsReach { delta: f64, reach: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Analytic description of the container `Omega`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// `Omega` is the whole torus and the substrate is empty.
    Torus,
    /// Disk (ball in 3D).
    Disk { center: Vec<f64>, radius: f64 },
    /// Axis-aligned ellipse, two dimensions only.
    Ellipse { center: Vec<f64>, semi_axes: Vec<f64> },
    /// Slab `lower < x[axis] < upper`, periodic in the remaining axes.
    /// `axis` defaults to the last coordinate.
    Band {
        lower: f64,
        upper: f64,
        #[serde(default)]
        axis: Option<usize>,
    },
    /// Convex polygon inflated by `radius` (corners become circular arcs).
    RoundedPolygon { vertices: Vec<[f64; 2]>, radius: f64 },
}

impl Shape {
    pub fn validate(&self, dim: usize) -> Result<(), GeometryError> {
        let bad = |s: &str| Err(GeometryError::InvalidShape(s.to_string()));
        match self {
            Shape::Torus => Ok(()),
            Shape::Disk { center, radius } => {
                if center.len() != dim {
                    return bad("disk center length must equal the grid dimension");
                }
                if !(*radius > 0.0) {
                    return bad("disk radius must be positive");
                }
                Ok(())
            }
            Shape::Ellipse { center, semi_axes } => {
                if dim != 2 {
                    return Err(GeometryError::Unsupported { dim, what: "ellipse".into() });
                }
                if center.len() != 2 || semi_axes.len() != 2 {
                    return bad("ellipse needs a 2-vector center and two semi-axes");
                }
                if semi_axes.iter().any(|&a| !(a > 0.0)) {
                    return bad("ellipse semi-axes must be positive");
                }
                Ok(())
            }
            Shape::Band { lower, upper, axis } => {
                if axis.is_some_and(|a| a >= dim) {
                    return bad("band axis out of range");
                }
                if !(lower < upper) || *lower < 0.0 || *upper > 1.0 {
                    return bad("band needs 0 <= lower < upper <= 1");
                }
                Ok(())
            }
            Shape::RoundedPolygon { vertices, radius } => {
                if dim != 2 {
                    return Err(GeometryError::Unsupported { dim, what: "rounded polygon".into() });
                }
                if vertices.len() < 3 {
                    return bad("polygon needs at least three vertices");
                }
                if !(*radius > 0.0) {
                    return bad("rounding radius must be positive");
                }
                if !polygon_is_convex(vertices) {
                    return bad("polygon core must be convex");
                }
                Ok(())
            }
        }
    }

    /// Exact signed distance to the boundary, positive inside.
    pub fn signed_distance(&self, x: Point, dim: usize) -> f64 {
        match self {
            Shape::Torus => f64::INFINITY,
            Shape::Disk { center, radius } => {
                let mut r2 = 0.0;
                for a in 0..dim {
                    r2 += (x[a] - center[a]).powi(2);
                }
                radius - r2.sqrt()
            }
            Shape::Ellipse { center, semi_axes } => {
                let y0 = x[0] - center[0];
                let y1 = x[1] - center[1];
                ellipse_signed_distance(semi_axes[0], semi_axes[1], y0, y1)
            }
            Shape::Band { lower, upper, axis } => {
                let t = x[axis.unwrap_or(dim - 1)];
                if t > *lower && t < *upper {
                    (t - lower).min(upper - t)
                } else if t <= *lower {
                    -(lower - t).min(t + 1.0 - upper)
                } else {
                    -(t - upper).min(lower + 1.0 - t)
                }
            }
            Shape::RoundedPolygon { vertices, radius } => radius - polygon_signed_distance(vertices, x),
        }
    }

    /// Smallest distance at which parallel strips of the boundary stop being smooth.
    pub fn reach(&self) -> f64 {
        match self {
            Shape::Torus => f64::INFINITY,
            Shape::Disk { radius, .. } => *radius,
            Shape::Ellipse { semi_axes, .. } => {
                let a = semi_axes[0].max(semi_axes[1]);
                let b = semi_axes[0].min(semi_axes[1]);
                b * b / a
            }
            Shape::Band { lower, upper, .. } => {
                let w = upper - lower;
                (0.5 * w).min(0.5 * (1.0 - w))
            }
            Shape::RoundedPolygon { radius, .. } => *radius,
        }
    }

    /// Per-axis extent of `Omega`; `None` marks axes along which it is periodic.
    pub fn extent(&self, dim: usize) -> [Option<(f64, f64)>; 3] {
        let mut out = [None; 3];
        match self {
            Shape::Torus => {}
            Shape::Disk { center, radius } => {
                for a in 0..dim {
                    out[a] = Some((center[a] - radius, center[a] + radius));
                }
            }
            Shape::Ellipse { center, semi_axes } => {
                for a in 0..2 {
                    out[a] = Some((center[a] - semi_axes[a], center[a] + semi_axes[a]));
                }
            }
            Shape::Band { lower, upper, axis } => {
                out[axis.unwrap_or(dim - 1)] = Some((*lower, *upper));
            }
            Shape::RoundedPolygon { vertices, radius } => {
                for a in 0..2 {
                    let lo = vertices.iter().map(|v| v[a]).fold(f64::INFINITY, f64::min);
                    let hi = vertices.iter().map(|v| v[a]).fold(f64::NEG_INFINITY, f64::max);
                    out[a] = Some((lo - radius, hi + radius));
                }
            }
        }
        out
    }

    /// Exact measure of `Omega`.
    pub fn measure(&self, dim: usize) -> f64 {
        use std::f64::consts::PI;
        match self {
            Shape::Torus => 1.0,
            Shape::Disk { radius, .. } => {
                if dim == 2 {
                    PI * radius * radius
                } else {
                    4.0 / 3.0 * PI * radius.powi(3)
                }
            }
            Shape::Ellipse { semi_axes, .. } => PI * semi_axes[0] * semi_axes[1],
            Shape::Band { lower, upper, .. } => upper - lower,
            Shape::RoundedPolygon { vertices, radius } => {
                let area = polygon_area(vertices).abs();
                area + polygon_perimeter(vertices) * radius + PI * radius * radius
            }
        }
    }

    /// Exact `H^{d-1}` measure of the boundary (2D shapes and balls).
    pub fn perimeter(&self, dim: usize) -> f64 {
        use std::f64::consts::PI;
        match self {
            Shape::Torus => 0.0,
            Shape::Disk { radius, .. } => {
                if dim == 2 {
                    2.0 * PI * radius
                } else {
                    4.0 * PI * radius * radius
                }
            }
            Shape::Ellipse { semi_axes, .. } => {
                let (a, b) = (semi_axes[0], semi_axes[1]);
                let quad = gauss_quad::legendre::GaussLegendre::new(64.try_into().unwrap());
                quad.integrate(0.0, 2.0 * PI, |t| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt())
            }
            Shape::Band { .. } => 2.0,
            Shape::RoundedPolygon { vertices, radius } => polygon_perimeter(vertices) + 2.0 * PI * radius,
        }
    }
}

/// Which side of `boundary(Omega)` a strip lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Inside `Omega`, `0 < d_s < delta`.
    Inner,
    /// Outside `Omega`, `0 < -d_s < delta`.
    Outer,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Inner => 1.0,
            Side::Outer => -1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Geometry {
    grid: TorusGrid,
    shape: Shape,
    delta: f64,
    omega_mask: ScalarField,
    substrate_mask: ScalarField,
    signed_distance: ScalarField,
    normals: VectorField,
    bounded_axes: [bool; 3],
}

/// Default strip width in cells.
pub const DEFAULT_DELTA_CELLS: f64 = 8.0;

/// Builds masks, signed distance and boundary normals for `shape` on `grid`.
///
/// `delta = None` selects `8 * spacing`.
pub fn build_geometry(shape: &Shape, grid: TorusGrid, delta: Option<f64>) -> Result<Geometry, GeometryError> {
    let dim = grid.dim();
    shape.validate(dim)?;
    let h = grid.spacing();
    let delta = delta.unwrap_or(DEFAULT_DELTA_CELLS * h);
    if !(delta >= 0.0) {
        return Err(GeometryError::InvalidShape("delta must be nonnegative".into()));
    }
    let reach = shape.reach();
    if delta >= reach {
        return Err(GeometryError::DeltaExceedsReach { delta, reach });
    }

    let extent = shape.extent(dim);
    let mut bounded_axes = [false; 3];
    let required = delta + 2.0 * h;
    let mut margin = f64::INFINITY;
    for a in 0..dim {
        if let Some((lo, hi)) = extent[a] {
            bounded_axes[a] = true;
            margin = margin.min(lo).min(1.0 - hi);
        }
    }
    if margin < required {
        return Err(GeometryError::SeamMargin { margin, required });
    }

    let signed_distance = ScalarField::from_fn(grid, |x| shape.signed_distance(x, dim));
    let omega_mask = signed_distance.map(|d| if d > 0.0 { 1.0 } else { 0.0 });
    let substrate_mask = match shape {
        Shape::Torus => ScalarField::zeros(grid),
        _ => omega_mask.map(|m| 1.0 - m),
    };

    let mut normals = VectorField::empty(grid);
    if !matches!(shape, Shape::Torus) {
        let band = delta + 2.0 * h;
        for c in 0..grid.len() {
            if signed_distance.get(c).abs() < band {
                normals.set(c, analytic_normal(shape, grid.center(c), dim));
            }
        }
    }

    Ok(Geometry { grid, shape: shape.clone(), delta, omega_mask, substrate_mask, signed_distance, normals, bounded_axes })
}

/// Outer unit normal of `Omega`, `-grad d_s / |grad d_s|`, by central differences
/// of the analytic signed distance.
pub fn analytic_normal(shape: &Shape, x: Point, dim: usize) -> Point {
    let eps = 1e-7;
    let mut g = [0.0; 3];
    for a in 0..dim {
        let mut xp = x;
        let mut xm = x;
        xp[a] += eps;
        xm[a] -= eps;
        g[a] = -(shape.signed_distance(xp, dim) - shape.signed_distance(xm, dim)) / (2.0 * eps);
    }
    let n = crate::grid::norm(&g);
    if n > 0.0 {
        for v in g.iter_mut() {
            *v /= n;
        }
    }
    g
}

impl Geometry {
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn omega_mask(&self) -> &ScalarField {
        &self.omega_mask
    }

    pub fn substrate_mask(&self) -> &ScalarField {
        &self.substrate_mask
    }

    pub fn signed_distance(&self) -> &ScalarField {
        &self.signed_distance
    }

    pub fn normals(&self) -> &VectorField {
        &self.normals
    }

    pub fn in_omega(&self, c: usize) -> bool {
        self.omega_mask.get(c) > 0.5
    }

    pub fn has_substrate(&self) -> bool {
        !matches!(self.shape, Shape::Torus)
    }

    /// Axes along which `Omega` is bounded; the torus seam is pinned only there.
    pub fn bounded_axes(&self) -> [bool; 3] {
        self.bounded_axes
    }

    pub fn omega_cells(&self) -> Vec<usize> {
        (0..self.grid.len()).filter(|&c| self.in_omega(c)).collect()
    }

    /// Discrete measure of `Omega`.
    pub fn omega_measure(&self) -> f64 {
        self.omega_mask.integral()
    }

    /// Indicator of `Omega_delta^+` or `Omega_delta^-` for this geometry's `delta`.
    pub fn band_mask(&self, side: Side) -> ScalarField {
        self.band_mask_width(side, self.delta)
    }

    pub fn band_mask_width(&self, side: Side, delta: f64) -> ScalarField {
        let s = side.sign();
        self.signed_distance.map(|d| {
            let t = s * d;
            if t > 0.0 && t < delta {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Cells on the first layer of the torus seam along bounded axes.
    pub fn is_seam(&self, c: usize) -> bool {
        let idx = self.grid.multi(c);
        (0..self.grid.dim()).any(|a| self.bounded_axes[a] && idx[a] == 0)
    }

    pub fn normal_at(&self, x: Point) -> Point {
        analytic_normal(&self.shape, x, self.grid.dim())
    }

    /// Closest point of `boundary(Omega)` to `x`, for `x` within the reach.
    pub fn project(&self, x: Point) -> Point {
        let dim = self.grid.dim();
        let mut p = x;
        // Two Newton-type passes make the projection exact to rounding for curved shapes.
        for _ in 0..2 {
            let d = self.shape.signed_distance(p, dim);
            let nu = analytic_normal(&self.shape, p, dim);
            for a in 0..dim {
                p[a] += d * nu[a];
            }
        }
        p
    }

    /// Length (area in 3D) of `boundary(Omega)` from `|grad H(d_s)|` with a
    /// Heaviside smoothed over two cells.
    pub fn perimeter_estimate(&self) -> f64 {
        let g = self.grid;
        let eps = 2.0 * g.spacing();
        let smooth = self.signed_distance.map(|d| {
            if d >= eps {
                1.0
            } else if d <= -eps {
                0.0
            } else {
                0.5 * (1.0 + d / eps + (std::f64::consts::PI * d / eps).sin() / std::f64::consts::PI)
            }
        });
        let mut total = 0.0;
        for c in 0..g.len() {
            let mut g2 = 0.0;
            for a in 0..g.dim() {
                let p = smooth.get(g.neighbor(c, a, 1));
                let m = smooth.get(g.neighbor(c, a, -1));
                g2 += ((p - m) / (2.0 * g.spacing())).powi(2);
            }
            total += g2.sqrt();
        }
        total * g.cell_volume()
    }
}

fn ellipse_signed_distance(a0: f64, a1: f64, y0: f64, y1: f64) -> f64 {
    // Work in the first quadrant with the major axis first.
    let (e0, e1, z0, z1) = if a0 >= a1 { (a0, a1, y0.abs(), y1.abs()) } else { (a1, a0, y1.abs(), y0.abs()) };
    let inside = (z0 / e0).powi(2) + (z1 / e1).powi(2) < 1.0;
    let d = ellipse_distance_quadrant(e0, e1, z0, z1);
    if inside {
        d
    } else {
        -d
    }
}

/// Distance from `(y0, y1)` (nonnegative) to the ellipse with semi-axes `e0 >= e1`,
/// by bisection on the Lagrange multiplier of the closest-point problem.
fn ellipse_distance_quadrant(e0: f64, e1: f64, y0: f64, y1: f64) -> f64 {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g != 0.0 {
                let r0 = (e0 / e1).powi(2);
                let sbar = ellipse_root(r0, z0, z1, g);
                let x0 = r0 * y0 / (sbar + r0);
                let x1 = y1 / (sbar + 1.0);
                ((x0 - y0).powi(2) + (x1 - y1).powi(2)).sqrt()
            } else {
                0.0
            }
        } else {
            (y1 - e1).abs()
        }
    } else {
        let numer0 = e0 * y0;
        let denom0 = e0 * e0 - e1 * e1;
        if numer0 < denom0 {
            let xde0 = numer0 / denom0;
            let x0 = e0 * xde0;
            let x1 = e1 * (1.0 - xde0 * xde0).sqrt();
            ((x0 - y0).powi(2) + x1 * x1).sqrt()
        } else {
            (y0 - e0).abs()
        }
    }
}

fn ellipse_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
    let mut s = 0.0;
    for _ in 0..1100 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let ratio0 = n0 / (s + r0);
        let ratio1 = z1 / (s + 1.0);
        let gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if gs > 0.0 {
            s0 = s;
        } else if gs < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

fn polygon_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    (0..n).map(|i| {
        let (p, q) = (v[i], v[(i + 1) % n]);
        p[0] * q[1] - q[0] * p[1]
    })
    .sum::<f64>()
        * 0.5
}

fn polygon_perimeter(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    (0..n).map(|i| {
        let (p, q) = (v[i], v[(i + 1) % n]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    })
    .sum()
}

fn polygon_is_convex(v: &[[f64; 2]]) -> bool {
    let n = v.len();
    let mut sign = 0.0;
    for i in 0..n {
        let (a, b, c) = (v[i], v[(i + 1) % n], v[(i + 2) % n]);
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        if cross.abs() < 1e-14 {
            continue;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return false;
        }
    }
    sign != 0.0
}

/// Signed distance to a convex polygon, negative inside.
fn polygon_signed_distance(v: &[[f64; 2]], x: Point) -> f64 {
    let n = v.len();
    let orient = polygon_area(v).signum();
    let mut dist = f64::INFINITY;
    let mut inside = true;
    for i in 0..n {
        let (p, q) = (v[i], v[(i + 1) % n]);
        let (ex, ey) = (q[0] - p[0], q[1] - p[1]);
        let (wx, wy) = (x[0] - p[0], x[1] - p[1]);
        let t = ((wx * ex + wy * ey) / (ex * ex + ey * ey)).clamp(0.0, 1.0);
        dist = dist.min((wx - t * ex).hypot(wy - t * ey));
        if orient * (ex * wy - ey * wx) < 0.0 {
            inside = false;
        }
    }
    if inside {
        -dist
    } else {
        dist
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn disk(r: f64) -> Shape {
        Shape::Disk { center: vec![0.5, 0.5], radius: r }
    }

    #[test]
    fn disk_mask_area() {
        let g = TorusGrid::new(2, 256).unwrap();
        let geo = build_geometry(&disk(0.3), g, None).unwrap();
        assert!((geo.omega_measure() - PI * 0.09).abs() < 2.0 / 256.0);
        for c in 0..g.len() {
            assert_eq!(geo.omega_mask().get(c) * geo.substrate_mask().get(c), 0.0);
            assert!(geo.omega_mask().get(c) + geo.substrate_mask().get(c) <= 1.0);
            assert_eq!(geo.signed_distance().get(c) > 0.0, geo.in_omega(c));
        }
    }

    #[test]
    fn flat_band_normals() {
        let g = TorusGrid::new(2, 128).unwrap();
        let shape = Shape::Band { lower: 0.25, upper: 0.75, axis: None };
        let geo = build_geometry(&shape, g, None).unwrap();
        let mut seen = 0;
        for (c, nu) in geo.normals().iter() {
            assert!((crate::grid::norm(&nu) - 1.0).abs() < 1e-10);
            if g.center(c)[1] < 0.5 {
                assert!(nu[0].abs() < 1e-6 && (nu[1] + 1.0).abs() < 1e-6, "{nu:?}");
                seen += 1;
            }
        }
        assert!(seen > 0);
        assert!(!geo.bounded_axes()[0] && geo.bounded_axes()[1]);
    }

    #[test]
    fn ellipse_center_distance_matches_dense_sampling() {
        let shape = Shape::Ellipse { center: vec![0.5, 0.5], semi_axes: vec![0.35, 0.2] };
        let d = shape.signed_distance([0.5, 0.5, 0.0], 2);
        // Brute force: minimum distance over a dense boundary sample.
        let m = 200_000;
        let brute = (0..m)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / m as f64;
                (0.35 * t.cos()).hypot(0.2 * t.sin())
            })
            .fold(f64::INFINITY, f64::min);
        assert!((d - 0.2).abs() < 1e-3);
        assert!((d - brute).abs() < 1e-9);
        // Off-center points against the same oracle.
        for &(px, py) in &[(0.62, 0.55), (0.9, 0.5), (0.5, 0.8), (0.1, 0.2)] {
            let x = [px - 0.5, py - 0.5];
            let brute = (0..m)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / m as f64;
                    (0.35 * t.cos() - x[0]).hypot(0.2 * t.sin() - x[1])
                })
                .fold(f64::INFINITY, f64::min);
            let d = shape.signed_distance([px, py, 0.0], 2);
            assert!((d.abs() - brute).abs() < 1e-6, "{px},{py}: {d} vs {brute}");
        }
    }

    #[test]
    fn band_masks() {
        let g = TorusGrid::new(2, 256).unwrap();
        let geo = build_geometry(&disk(0.3), g, Some(0.0)).unwrap();
        assert_eq!(geo.band_mask(Side::Inner).sum(), 0.0);
        assert_eq!(geo.band_mask(Side::Outer).sum(), 0.0);

        let geo = build_geometry(&disk(0.3), g, Some(0.05)).unwrap();
        let inner = geo.band_mask(Side::Inner);
        let outer = geo.band_mask(Side::Outer);
        let exact = PI * (0.09 - 0.0625);
        assert!((inner.integral() - exact).abs() < 0.02 * exact);
        for c in 0..g.len() {
            let d = geo.signed_distance().get(c);
            assert!(inner.get(c) * outer.get(c) == 0.0);
            if d == 0.0 {
                assert_eq!(inner.get(c) + outer.get(c), 0.0);
            }
        }
    }

    #[test]
    fn rejects_seam_contact_and_large_delta() {
        let g = TorusGrid::new(2, 64).unwrap();
        let near_seam = Shape::Disk { center: vec![0.5, 0.5], radius: 0.49 };
        assert!(matches!(build_geometry(&near_seam, g, None), Err(GeometryError::SeamMargin { .. })));
        assert!(matches!(build_geometry(&disk(0.1), g, Some(0.2)), Err(GeometryError::DeltaExceedsReach { .. })));
    }

    #[test]
    fn perimeter_estimate_converges() {
        let exact = 2.0 * PI * 0.3;
        let errs: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&n| {
                let g = TorusGrid::new(2, n).unwrap();
                let geo = build_geometry(&disk(0.3), g, None).unwrap();
                (geo.perimeter_estimate() - exact).abs()
            })
            .collect();
        // O(1/n): error times n stays bounded.
        for (e, n) in errs.iter().zip([64.0, 128.0, 256.0]) {
            assert!(e * n < 2.0 * exact, "{errs:?}");
        }
    }

    #[test]
    fn rounded_polygon_distance() {
        let shape = Shape::RoundedPolygon {
            vertices: vec![[0.3, 0.3], [0.7, 0.3], [0.7, 0.7], [0.3, 0.7]],
            radius: 0.1,
        };
        shape.validate(2).unwrap();
        assert!((shape.signed_distance([0.5, 0.5, 0.0], 2) - 0.3).abs() < 1e-12);
        assert!((shape.signed_distance([0.5, 0.15, 0.0], 2) + 0.05).abs() < 1e-12);
        let corner = 0.7 + 0.1 / 2f64.sqrt();
        assert!(shape.signed_distance([corner, corner, 0.0], 2).abs() < 1e-12);
        let g = TorusGrid::new(2, 256).unwrap();
        let geo = build_geometry(&shape, g, None).unwrap();
        assert!((geo.omega_measure() - shape.measure(2)).abs() < 0.01 * shape.measure(2));
    }

    #[test]
    fn projection_lands_on_boundary() {
        let g = TorusGrid::new(2, 64).unwrap();
        let shape = Shape::Ellipse { center: vec![0.5, 0.5], semi_axes: vec![0.3, 0.2] };
        let geo = build_geometry(&shape, g, None).unwrap();
        for x in [[0.81, 0.5, 0.0], [0.5, 0.68, 0.0], [0.7, 0.62, 0.0]] {
            let p = geo.project(x);
            assert!(shape.signed_distance(p, 2).abs() < 1e-10);
        }
    }
}
