//! Parametric particle shapes and boundary curves (two dimensions) used to
//! evaluate the sharp interfacial energy without grid gradients.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Geometry, Shape};
use crate::grid::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error("invalid particle shape: {0}")]
    Invalid(String),
    #[error("particle boundary is not closed: {0}")]
    Open(String),
    #[error("polygon edges {0} and {1} intersect")]
    SelfIntersection(usize, usize),
    #[error("particle leaves the container near ({0:.4}, {1:.4})")]
    OutsideContainer(f64, f64),
    #[error("only two-dimensional shapes are supported")]
    Dimension,
}

/// Smooth or piecewise-smooth planar curve parametrized over `t in [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Curve {
    Segment { a: [f64; 2], b: [f64; 2] },
    /// Arc of the ellipse `center + (a cos s, b sin s)` for `s` from `from` to `to`.
    EllipseArc { center: [f64; 2], semi_axes: [f64; 2], from: f64, to: f64 },
}

impl Curve {
    pub fn circle_arc(center: [f64; 2], radius: f64, from: f64, to: f64) -> Self {
        Curve::EllipseArc { center, semi_axes: [radius, radius], from, to }
    }

    pub fn point(&self, t: f64) -> Point {
        match self {
            Curve::Segment { a, b } => [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), 0.0],
            Curve::EllipseArc { center, semi_axes, from, to } => {
                let s = from + t * (to - from);
                [center[0] + semi_axes[0] * s.cos(), center[1] + semi_axes[1] * s.sin(), 0.0]
            }
        }
    }

    pub fn velocity(&self, t: f64) -> [f64; 2] {
        match self {
            Curve::Segment { a, b } => [b[0] - a[0], b[1] - a[1]],
            Curve::EllipseArc { semi_axes, from, to, .. } => {
                let s = from + t * (to - from);
                let w = to - from;
                [-semi_axes[0] * s.sin() * w, semi_axes[1] * s.cos() * w]
            }
        }
    }

    /// Unit normal (right of the direction of travel).
    pub fn normal(&self, t: f64) -> Point {
        let v = self.velocity(t);
        let s = v[0].hypot(v[1]);
        [v[1] / s, -v[0] / s, 0.0]
    }

    pub fn length(&self) -> f64 {
        self.integrate(&|_, _| 1.0, 1e-13)
    }

    /// `int f(x, nu) ds` by adaptive Simpson to absolute tolerance `tol`.
    pub fn integrate(&self, f: &impl Fn(&Point, &Point) -> f64, tol: f64) -> f64 {
        let g = |t: f64| {
            let v = self.velocity(t);
            f(&self.point(t), &self.normal(t)) * v[0].hypot(v[1])
        };
        // Split in eight to keep the adaptive recursion from stopping early on
        // symmetric integrands.
        (0..8).map(|k| crate::quadrature::adaptive_simpson(&g, k as f64 / 8.0, (k + 1) as f64 / 8.0, tol / 8.0)).sum()
    }

    /// Composite Simpson with a fixed number of intervals, for order checks.
    pub fn integrate_simpson(&self, f: &impl Fn(&Point, &Point) -> f64, intervals: u32) -> f64 {
        crate::quadrature::simpson(0.0, 1.0, intervals, |t| {
            let v = self.velocity(t);
            f(&self.point(t), &self.normal(t)) * v[0].hypot(v[1])
        })
    }
}

/// Particle `P` described parametrically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Circle { center: [f64; 2], radius: f64 },
    Ellipse { center: [f64; 2], semi_axes: [f64; 2] },
    /// Circular cap resting on the lower boundary of a band container, with
    /// interior contact angle `angle_deg` measured inside the particle.
    Cap { center_x: f64, radius: f64, angle_deg: f64 },
    /// Closed simple polygon.
    Polygon { vertices: Vec<[f64; 2]> },
}

/// Wetted part of the substrate boundary: a segment of the base line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub left: [f64; 2],
    pub right: [f64; 2],
}

impl ShapeSpec {
    pub fn validate(&self) -> Result<(), ShapeError> {
        let bad = |s: &str| Err(ShapeError::Invalid(s.to_string()));
        match self {
            ShapeSpec::Circle { radius, .. } if !(*radius > 0.0) => bad("circle radius must be positive"),
            ShapeSpec::Ellipse { semi_axes, .. } if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) => {
                bad("ellipse semi-axes must be positive")
            }
            ShapeSpec::Cap { radius, angle_deg, .. } => {
                if !(*radius > 0.0) {
                    return bad("cap radius must be positive");
                }
                if !(*angle_deg > 0.0 && *angle_deg < 180.0) {
                    return bad("cap contact angle must lie strictly between 0 and 180 degrees");
                }
                Ok(())
            }
            ShapeSpec::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(ShapeError::Open("a polygon needs at least three vertices".into()));
                }
                let n = vertices.len();
                for i in 0..n {
                    for j in i + 1..n {
                        // Adjacent edges share a vertex; only disjoint pairs are tested.
                        if j == i + 1 || (i == 0 && j == n - 1) {
                            continue;
                        }
                        if segments_cross(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n]) {
                            return Err(ShapeError::SelfIntersection(i, j));
                        }
                    }
                }
                if polygon_area(vertices).abs() == 0.0 {
                    return bad("degenerate polygon");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Height of the substrate line a cap rests on.
    fn base(&self, geometry: &Geometry) -> Result<f64, ShapeError> {
        match geometry.shape() {
            Shape::Band { lower, axis, .. } if axis.unwrap_or(1) == 1 => Ok(*lower),
            _ => Err(ShapeError::Invalid("a cap needs a band container bounded along the second axis".into())),
        }
    }

    fn cap_circle(&self, base: f64) -> ([f64; 2], f64, f64) {
        if let ShapeSpec::Cap { center_x, radius, angle_deg } = self {
            let theta = angle_deg.to_radians();
            ([*center_x, base - radius * theta.cos()], *radius, theta)
        } else {
            unreachable!()
        }
    }

    pub fn contains(&self, x: &Point, geometry: &Geometry) -> bool {
        match self {
            ShapeSpec::Circle { center, radius } => (x[0] - center[0]).hypot(x[1] - center[1]) < *radius,
            ShapeSpec::Ellipse { center, semi_axes } => {
                ((x[0] - center[0]) / semi_axes[0]).powi(2) + ((x[1] - center[1]) / semi_axes[1]).powi(2) < 1.0
            }
            ShapeSpec::Cap { .. } => match self.base(geometry) {
                Ok(base) => {
                    let (c, r, _) = self.cap_circle(base);
                    x[1] > base && (x[0] - c[0]).hypot(x[1] - c[1]) < r
                }
                Err(_) => false,
            },
            ShapeSpec::Polygon { vertices } => point_in_polygon(vertices, x),
        }
    }

    /// Free boundary `Gamma` as curves, and the wetted segment if any.
    pub fn boundary(&self, geometry: &Geometry) -> Result<(Vec<Curve>, Option<Contact>), ShapeError> {
        if geometry.grid().dim() != 2 {
            return Err(ShapeError::Dimension);
        }
        self.validate()?;
        let out = match self {
            ShapeSpec::Circle { center, radius } => (vec![Curve::circle_arc(*center, *radius, 0.0, 2.0 * PI)], None),
            ShapeSpec::Ellipse { center, semi_axes } => {
                (vec![Curve::EllipseArc { center: *center, semi_axes: *semi_axes, from: 0.0, to: 2.0 * PI }], None)
            }
            ShapeSpec::Cap { .. } => {
                let base = self.base(geometry)?;
                let (c, r, theta) = self.cap_circle(base);
                // The arc above the base line spans the angle 2 theta.
                let from = 0.5 * PI - theta;
                let to = 0.5 * PI + theta;
                let half = r * theta.sin();
                let contact = Contact { left: [c[0] - half, base], right: [c[0] + half, base] };
                (vec![Curve::circle_arc(c, r, from, to)], Some(contact))
            }
            ShapeSpec::Polygon { vertices } => {
                let n = vertices.len();
                ((0..n).map(|i| Curve::Segment { a: vertices[i], b: vertices[(i + 1) % n] }).collect(), None)
            }
        };
        self.check_inside(geometry, &out.0)?;
        Ok(out)
    }

    fn check_inside(&self, geometry: &Geometry, curves: &[Curve]) -> Result<(), ShapeError> {
        let dim = geometry.grid().dim();
        let tol = 1e-9;
        for c in curves {
            for k in 0..=64 {
                let p = c.point(k as f64 / 64.0);
                if !matches!(geometry.shape(), Shape::Torus) && geometry.shape().signed_distance(p, dim) < -tol {
                    return Err(ShapeError::OutsideContainer(p[0], p[1]));
                }
            }
        }
        Ok(())
    }

    /// Area of `P`.
    pub fn area(&self, geometry: &Geometry) -> Result<f64, ShapeError> {
        Ok(match self {
            ShapeSpec::Circle { radius, .. } => PI * radius * radius,
            ShapeSpec::Ellipse { semi_axes, .. } => PI * semi_axes[0] * semi_axes[1],
            ShapeSpec::Cap { radius, angle_deg, .. } => {
                let _ = self.base(geometry)?;
                let t = angle_deg.to_radians();
                // Circular segment with half-angle theta seen from the center.
                radius * radius * (t - t.sin() * t.cos())
            }
            ShapeSpec::Polygon { vertices } => polygon_area(vertices).abs(),
        })
    }
}

/// Boundary of the container as curves (two dimensions).
pub fn container_boundary(shape: &Shape) -> Result<Vec<Curve>, ShapeError> {
    Ok(match shape {
        Shape::Torus => Vec::new(),
        Shape::Disk { center, radius } => {
            if center.len() != 2 {
                return Err(ShapeError::Dimension);
            }
            vec![Curve::circle_arc([center[0], center[1]], *radius, 0.0, 2.0 * PI)]
        }
        Shape::Ellipse { center, semi_axes } => vec![Curve::EllipseArc {
            center: [center[0], center[1]],
            semi_axes: [semi_axes[0], semi_axes[1]],
            from: 0.0,
            to: 2.0 * PI,
        }],
        Shape::Band { lower, upper, axis } => {
            let along = |v: f64, t0: f64, t1: f64| match axis.unwrap_or(1) {
                1 => Curve::Segment { a: [t0, v], b: [t1, v] },
                _ => Curve::Segment { a: [v, t0], b: [v, t1] },
            };
            vec![along(*lower, 0.0, 1.0), along(*upper, 1.0, 0.0)]
        }
        Shape::RoundedPolygon { vertices, radius } => {
            let n = vertices.len();
            let ccw = polygon_area(vertices) > 0.0;
            let mut out = Vec::new();
            for i in 0..n {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                let e = [b[0] - a[0], b[1] - a[1]];
                let l = e[0].hypot(e[1]);
                // Outward normal of the edge.
                let nu = if ccw { [e[1] / l, -e[0] / l] } else { [-e[1] / l, e[0] / l] };
                let off = |p: [f64; 2]| [p[0] + radius * nu[0], p[1] + radius * nu[1]];
                out.push(Curve::Segment { a: off(a), b: off(b) });
                let c = vertices[(i + 1) % n];
                let next = vertices[(i + 2) % n];
                let e2 = [next[0] - c[0], next[1] - c[1]];
                let l2 = e2[0].hypot(e2[1]);
                let nu2 = if ccw { [e2[1] / l2, -e2[0] / l2] } else { [-e2[1] / l2, e2[0] / l2] };
                let mut from = nu[1].atan2(nu[0]);
                let mut to = nu2[1].atan2(nu2[0]);
                if ccw {
                    while to < from {
                        to += 2.0 * PI;
                    }
                } else {
                    while from < to {
                        from += 2.0 * PI;
                    }
                }
                out.push(Curve::circle_arc(c, *radius, from, to));
            }
            out
        }
    })
}

fn polygon_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i][0] * v[(i + 1) % n][1] - v[(i + 1) % n][0] * v[i][1]).sum::<f64>()
}

fn point_in_polygon(v: &[[f64; 2]], x: &Point) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a[1] > x[1]) != (b[1] > x[1]) && x[0] < (b[0] - a[0]) * (x[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}
