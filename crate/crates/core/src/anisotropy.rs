//! Direction-dependent surface-tension factors `gamma(nu)`, their duals, and
//! the anisotropy a convolution kernel induces.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{dot, norm, Point};
use crate::kernel::{sphere_integral, unit_ball_volume, Kernel, KernelError, KernelSpec};
use crate::report::Report;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnisotropyError {
    #[error("invalid anisotropy: {0}")]
    Invalid(String),
    #[error("induced anisotropy quadrature did not converge: last two levels {previous} and {last}")]
    NotConverged { previous: f64, last: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Serializable anisotropy descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnisotropySpec {
    /// `c0 |nu|`.
    Isotropic { c0: f64 },
    /// `sqrt(nu . A nu)` for a symmetric positive definite `A` given row by row.
    Elliptic { matrix: Vec<Vec<f64>> },
    /// Tabulated anisotropy induced by a kernel.
    KernelInduced {
        kernel: KernelSpec,
        #[serde(default)]
        resolution: Option<usize>,
    },
    /// `sum_i w_i |nu_i|`; not strictly convex.
    Crystalline { weights: Vec<f64> },
}

/// Dense direction table with periodic interpolation.
#[derive(Debug, Clone)]
enum Table {
    /// Values at angles `2 pi k / len`, interpolated by periodic Catmull-Rom cubics.
    Planar(Vec<f64>),
    /// Values on a latitude-longitude grid: `theta_i = pi i / (rows - 1)`,
    /// `phi_j = 2 pi j / cols`, bilinear interpolation.
    Spherical { rows: usize, cols: usize, values: Vec<f64> },
}

#[derive(Debug, Clone)]
enum Family {
    Isotropic { c0: f64 },
    Elliptic { a: DMatrix<f64>, a_inv: DMatrix<f64> },
    Table(Table),
    Crystalline { weights: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct Anisotropy {
    dim: usize,
    family: Family,
    lower: f64,
    upper: f64,
}

/// Default number of tabulated directions in 2D.
pub const PLANAR_TABLE_SIZE: usize = 4096;
/// Default latitude rows of 3D tables; longitude uses twice as many columns.
pub const SPHERICAL_TABLE_ROWS: usize = 25;

impl Anisotropy {
    pub fn new(spec: &AnisotropySpec, dim: usize) -> Result<Self, AnisotropyError> {
        match spec {
            AnisotropySpec::Isotropic { c0 } => Self::isotropic(dim, *c0),
            AnisotropySpec::Elliptic { matrix } => {
                if matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) {
                    return Err(AnisotropyError::Invalid(format!("elliptic matrix must be {dim}x{dim}")));
                }
                Self::elliptic(DMatrix::from_fn(dim, dim, |i, j| matrix[i][j]))
            }
            AnisotropySpec::KernelInduced { kernel, resolution } => {
                let k = Kernel::new(kernel, dim)?;
                Self::from_kernel(&k, *resolution)
            }
            AnisotropySpec::Crystalline { weights } => Self::crystalline(weights.clone()),
        }
    }

    pub fn isotropic(dim: usize, c0: f64) -> Result<Self, AnisotropyError> {
        if !(c0 > 0.0) {
            return Err(AnisotropyError::Invalid("c0 must be positive".into()));
        }
        Ok(Self { dim, family: Family::Isotropic { c0 }, lower: c0, upper: c0 })
    }

    pub fn elliptic(a: DMatrix<f64>) -> Result<Self, AnisotropyError> {
        let dim = a.nrows();
        if a.ncols() != dim || !(2..=3).contains(&dim) {
            return Err(AnisotropyError::Invalid("elliptic matrix must be square of size 2 or 3".into()));
        }
        if (&a - a.transpose()).abs().max() > 1e-12 * a.abs().max() {
            return Err(AnisotropyError::Invalid("elliptic matrix must be symmetric".into()));
        }
        let eig = SymmetricEigen::new(a.clone());
        let min = eig.eigenvalues.min();
        let max = eig.eigenvalues.max();
        if !(min > 0.0) {
            return Err(AnisotropyError::Invalid("elliptic matrix must be positive definite".into()));
        }
        let a_inv = a.clone().try_inverse().ok_or_else(|| AnisotropyError::Invalid("singular matrix".into()))?;
        Ok(Self { dim, family: Family::Elliptic { a, a_inv }, lower: min.sqrt(), upper: max.sqrt() })
    }

    pub fn crystalline(weights: Vec<f64>) -> Result<Self, AnisotropyError> {
        let dim = weights.len();
        if !(2..=3).contains(&dim) || weights.iter().any(|&w| !(w > 0.0)) {
            return Err(AnisotropyError::Invalid("crystalline needs 2 or 3 positive weights".into()));
        }
        let lower = weights.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        Ok(Self { dim, family: Family::Crystalline { weights }, lower, upper })
    }

    /// Tabulates `induced_gamma(kernel, .)` over directions.
    pub fn from_kernel(kernel: &Kernel, resolution: Option<usize>) -> Result<Self, AnisotropyError> {
        let dim = kernel.dim();
        if dim == 2 {
            let len = resolution.unwrap_or(PLANAR_TABLE_SIZE);
            // Even kernels induce even anisotropies, so half the circle suffices.
            let computed = if len.is_multiple_of(2) { len / 2 } else { len };
            let first: Vec<f64> = (0..computed)
                .into_par_iter()
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / len as f64;
                    induced_gamma(kernel, &[t.cos(), t.sin(), 0.0])
                })
                .collect::<Result<_, _>>()?;
            let values = (0..len).map(|k| first[k % computed]).collect();
            Ok(Self::from_table(dim, Table::Planar(values)))
        } else {
            let rows = resolution.unwrap_or(SPHERICAL_TABLE_ROWS);
            let cols = 2 * (rows - 1);
            let values: Vec<f64> = (0..rows * cols)
                .into_par_iter()
                .map(|idx| {
                    let (i, j) = (idx / cols, idx % cols);
                    induced_gamma(kernel, &spherical_direction(i, j, rows, cols))
                })
                .collect::<Result<_, _>>()?;
            Ok(Self::from_table(dim, Table::Spherical { rows, cols, values }))
        }
    }

    /// Tabulated anisotropy from samples of `f` on unit directions.
    pub fn tabulate(dim: usize, resolution: usize, f: impl Fn(&Point) -> f64 + Sync) -> Self {
        if dim == 2 {
            let values = (0..resolution)
                .into_par_iter()
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / resolution as f64;
                    f(&[t.cos(), t.sin(), 0.0])
                })
                .collect();
            Self::from_table(dim, Table::Planar(values))
        } else {
            let rows = resolution;
            let cols = 2 * (rows - 1);
            let values = (0..rows * cols)
                .into_par_iter()
                .map(|idx| f(&spherical_direction(idx / cols, idx % cols, rows, cols)))
                .collect();
            Self::from_table(dim, Table::Spherical { rows, cols, values })
        }
    }

    fn from_table(dim: usize, table: Table) -> Self {
        let mut out = Self { dim, family: Family::Table(table), lower: 0.0, upper: 0.0 };
        // Bounds of the interpolant, from dense oversampling.
        let (lo, hi) = out.sampled_extremes(16);
        out.lower = lo * (1.0 - 1e-9);
        out.upper = hi * (1.0 + 1e-9);
        out
    }

    fn sampled_extremes(&self, oversample: usize) -> (f64, f64) {
        let dirs: Vec<Point> = match &self.family {
            Family::Table(Table::Planar(v)) => {
                let m = v.len() * oversample;
                (0..m).map(|k| {
                    let t = 2.0 * PI * k as f64 / m as f64;
                    [t.cos(), t.sin(), 0.0]
                })
                .collect()
            }
            Family::Table(Table::Spherical { rows, cols, .. }) => {
                let (r, c) = ((rows - 1) * 2 + 1, cols * 2);
                (0..r * c).map(|idx| spherical_direction(idx / c, idx % c, r, c)).collect()
            }
            _ => return (self.lower, self.upper),
        };
        dirs.iter().map(|d| self.eval(d)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `c_gamma`.
    pub fn lower_bound(&self) -> f64 {
        self.lower
    }

    /// `C_gamma`.
    pub fn upper_bound(&self) -> f64 {
        self.upper
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::Isotropic { .. } => "isotropic",
            Family::Elliptic { .. } => "elliptic",
            Family::Table(_) => "tabulated",
            Family::Crystalline { .. } => "crystalline",
        }
    }

    /// Whether the family satisfies the smoothness and strict convexity the
    /// theory assumes.
    pub fn is_admissible(&self) -> bool {
        !matches!(self.family, Family::Crystalline { .. })
    }

    pub fn eval(&self, nu: &Point) -> f64 {
        match &self.family {
            Family::Isotropic { c0 } => c0 * norm(nu),
            Family::Elliptic { a, .. } => quadratic_form(a, nu, self.dim).max(0.0).sqrt(),
            Family::Crystalline { weights } => weights.iter().enumerate().map(|(i, w)| w * nu[i].abs()).sum(),
            Family::Table(table) => {
                let r = norm(nu);
                if r == 0.0 {
                    return 0.0;
                }
                r * table.interpolate(&[nu[0] / r, nu[1] / r, nu[2] / r])
            }
        }
    }

    /// `sup { nu* . nu : gamma(nu) <= 1 }`.
    pub fn dual(&self, nu_star: &Point) -> f64 {
        match &self.family {
            Family::Isotropic { c0 } => norm(nu_star) / c0,
            Family::Elliptic { a_inv, .. } => quadratic_form(a_inv, nu_star, self.dim).max(0.0).sqrt(),
            _ => numeric_support(self.dim, nu_star, |nu| self.eval(nu)),
        }
    }

    /// The dual `gamma^o` as an anisotropy: closed form where available,
    /// otherwise a table of numerically computed values.
    pub fn dual_anisotropy(&self, resolution: Option<usize>) -> Self {
        match &self.family {
            Family::Isotropic { c0 } => Self::isotropic(self.dim, 1.0 / c0).expect("positive"),
            Family::Elliptic { a_inv, .. } => Self::elliptic(a_inv.clone()).expect("inverse of SPD is SPD"),
            _ => {
                let res = resolution.unwrap_or(if self.dim == 2 { PLANAR_TABLE_SIZE } else { SPHERICAL_TABLE_ROWS });
                Self::tabulate(self.dim, res, |d| self.dual(d))
            }
        }
    }

    /// Multiplies `gamma` by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        let family = match &self.family {
            Family::Isotropic { c0 } => Family::Isotropic { c0: c0 * s },
            Family::Elliptic { a, a_inv } => Family::Elliptic { a: a * (s * s), a_inv: a_inv / (s * s) },
            Family::Crystalline { weights } => Family::Crystalline { weights: weights.iter().map(|w| w * s).collect() },
            Family::Table(Table::Planar(v)) => Family::Table(Table::Planar(v.iter().map(|x| x * s).collect())),
            Family::Table(Table::Spherical { rows, cols, values }) => Family::Table(Table::Spherical {
                rows: *rows,
                cols: *cols,
                values: values.iter().map(|x| x * s).collect(),
            }),
        };
        Self { dim: self.dim, family, lower: self.lower * s, upper: self.upper * s }
    }

    /// `|B_gamma| = (1/d) int_{S^{d-1}} gamma(xi)^{-d} dxi`.
    pub fn ball_volume(&self) -> f64 {
        let mut axis = [0.0; 3];
        axis[self.dim - 1] = 1.0;
        let d = self.dim as i32;
        sphere_integral(self.dim, &axis, 7, |xi| self.eval(&xi).powi(-d)) / self.dim as f64
    }

    /// Rescaled copy with `|B_gamma| = omega_d`.
    pub fn normalized(&self) -> Self {
        let s = (self.ball_volume() / unit_ball_volume(self.dim)).powf(1.0 / self.dim as f64);
        self.scaled(s)
    }

    /// Samples `(angle, value)` on `count` equally spaced planar directions.
    pub fn direction_table(&self, count: usize) -> Vec<(f64, f64)> {
        (0..count)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / count as f64;
                (t, self.eval(&[t.cos(), t.sin(), 0.0]))
            })
            .collect()
    }

    /// Homogeneity, bounds, evenness and strict convexity of `gamma^2`.
    pub fn validate(&self, samples: usize, seed: u64) -> Report {
        let mut report = Report::new("anisotropy");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut hom, mut even) = (0.0f64, 0.0f64);
        let (mut below, mut above) = (0.0f64, 0.0f64);
        let mut min_ratio = f64::INFINITY;
        let mut worst_dir = [0.0; 3];
        for k in 0..samples {
            let nu = random_unit(&mut rng, self.dim);
            let lambda: f64 = rng.random_range(-10.0..10.0);
            let g = self.eval(&nu);
            let scaled = [lambda * nu[0], lambda * nu[1], lambda * nu[2]];
            hom = hom.max((self.eval(&scaled) - lambda.abs() * g).abs() / (lambda.abs() * g).max(1e-300));
            even = even.max((self.eval(&[-nu[0], -nu[1], -nu[2]]) - g).abs() / g);
            below = below.max(self.lower - g);
            above = above.max(g - self.upper);
            if k < samples.min(200) {
                let (lo, hi) = hessian_extremes(self.dim, &nu, |x| self.eval(x).powi(2));
                let ratio = lo / hi;
                if ratio < min_ratio {
                    min_ratio = ratio;
                    worst_dir = nu;
                }
            }
        }
        report.check("homogeneity", hom <= 1e-12, hom, "max relative |gamma(l nu) - |l| gamma(nu)|");
        report.check("evenness", even <= 1e-12, even, "max relative |gamma(-nu) - gamma(nu)|");
        report.check(
            "bounds",
            below.max(above) <= 1e-12 * self.upper,
            below.max(above),
            &format!("c_gamma = {:.6}, C_gamma = {:.6}", self.lower, self.upper),
        );
        report.check(
            "strict_convexity",
            min_ratio > 1e-6,
            min_ratio,
            &format!("min eigenvalue / max eigenvalue of the Hessian of gamma^2, worst at {worst_dir:?}"),
        );
        report
    }
}

impl Table {
    fn interpolate(&self, nu: &Point) -> f64 {
        match self {
            Table::Planar(v) => {
                let n = v.len();
                let t = nu[1].atan2(nu[0]).rem_euclid(2.0 * PI) / (2.0 * PI) * n as f64;
                let i = t.floor() as isize;
                let s = t - i as f64;
                let at = |k: isize| v[k.rem_euclid(n as isize) as usize];
                let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
                // Catmull-Rom cubic through p1, p2.
                0.5 * (2.0 * p1
                    + (p2 - p0) * s
                    + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s * s
                    + (3.0 * p1 - p0 - 3.0 * p2 + p3) * s * s * s)
            }
            Table::Spherical { rows, cols, values } => {
                let theta = nu[2].clamp(-1.0, 1.0).acos();
                let phi = nu[1].atan2(nu[0]).rem_euclid(2.0 * PI);
                let ti = theta / PI * (*rows - 1) as f64;
                let pj = phi / (2.0 * PI) * *cols as f64;
                let i0 = (ti.floor() as usize).min(rows - 2);
                let j0 = pj.floor() as usize % cols;
                let j1 = (j0 + 1) % cols;
                let (a, b) = (ti - i0 as f64, pj - pj.floor());
                let at = |i: usize, j: usize| values[i * cols + j];
                (1.0 - a) * ((1.0 - b) * at(i0, j0) + b * at(i0, j1)) + a * ((1.0 - b) * at(i0 + 1, j0) + b * at(i0 + 1, j1))
            }
        }
    }
}

fn spherical_direction(i: usize, j: usize, rows: usize, cols: usize) -> Point {
    let theta = PI * i as f64 / (rows - 1) as f64;
    let phi = 2.0 * PI * j as f64 / cols as f64;
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn quadratic_form(a: &DMatrix<f64>, v: &Point, dim: usize) -> f64 {
    let x = DVector::from_fn(dim, |i, _| v[i]);
    (x.transpose() * a * &x)[(0, 0)]
}

fn random_unit(rng: &mut impl Rng, dim: usize) -> Point {
    loop {
        let mut x = [0.0; 3];
        for v in x.iter_mut().take(dim) {
            *v = rng.random_range(-1.0..1.0);
        }
        let r = norm(&x);
        if r > 1e-3 && r <= 1.0 {
            return [x[0] / r, x[1] / r, x[2] / r];
        }
    }
}

/// Extreme eigenvalues of the central-difference Hessian of `f` at `x`, step `1e-4`.
fn hessian_extremes(dim: usize, x: &Point, f: impl Fn(&Point) -> f64) -> (f64, f64) {
    let eps = 1e-4;
    let shifted = |i: usize, si: f64, j: usize, sj: f64| {
        let mut y = *x;
        y[i] += si;
        y[j] += sj;
        f(&y)
    };
    let h = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            (shifted(i, eps, i, 0.0) - 2.0 * f(x) + shifted(i, -eps, i, 0.0)) / (eps * eps)
        } else {
            (shifted(i, eps, j, eps) - shifted(i, eps, j, -eps) - shifted(i, -eps, j, eps) + shifted(i, -eps, j, -eps))
                / (4.0 * eps * eps)
        }
    });
    let eig = SymmetricEigen::new(h);
    (eig.eigenvalues.min(), eig.eigenvalues.max())
}

/// `sup_{|nu|=1} nu* . nu / gamma(nu)` by dense sampling plus local refinement.
fn numeric_support(dim: usize, nu_star: &Point, gamma: impl Fn(&Point) -> f64) -> f64 {
    if norm(nu_star) == 0.0 {
        return 0.0;
    }
    let ratio = |nu: &Point| dot(nu_star, nu) / gamma(nu);
    if dim == 2 {
        let m = 8192;
        let f = |t: f64| ratio(&[t.cos(), t.sin(), 0.0]);
        let step = 2.0 * PI / m as f64;
        let best = (0..m).max_by(|&a, &b| f(a as f64 * step).total_cmp(&f(b as f64 * step))).unwrap();
        let t = golden_max(&f, (best as f64 - 1.0) * step, (best as f64 + 1.0) * step);
        f(t).max(f(best as f64 * step))
    } else {
        let (rows, cols) = (129, 256);
        let mut best = (0, 0, f64::NEG_INFINITY);
        for i in 0..rows {
            for j in 0..cols {
                let v = ratio(&spherical_direction(i, j, rows, cols));
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        // Coordinate refinement in (theta, phi) around the best node.
        let dir = |th: f64, ph: f64| [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
        let mut th = PI * best.0 as f64 / (rows - 1) as f64;
        let mut ph = 2.0 * PI * best.1 as f64 / cols as f64;
        let (mut dth, mut dph) = (PI / (rows - 1) as f64, 2.0 * PI / cols as f64);
        for _ in 0..40 {
            th = golden_max(&|t| ratio(&dir(t, ph)), th - dth, th + dth);
            ph = golden_max(&|p| ratio(&dir(th, p)), ph - dph, ph + dph);
            dth *= 0.5;
            dph *= 0.5;
        }
        ratio(&dir(th, ph)).max(best.2)
    }
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `1/2 int |x . nu| K(x) dx` by polar product quadrature, refined until two
/// successive levels agree to `1e-8`.
pub fn induced_gamma(kernel: &Kernel, nu: &Point) -> Result<f64, AnisotropyError> {
    let dim = kernel.dim();
    let r = norm(nu);
    if r == 0.0 {
        return Ok(0.0);
    }
    let axis = [nu[0] / r, nu[1] / r, nu[2] / r];
    let d = dim as i32;
    let at_level = |level: u32| sphere_integral(dim, &axis, level, |xi| 0.5 * dot(&xi, &axis).abs() * kernel.radial_moment(&xi, d));
    let max_level = if dim == 2 { 9 } else { 5 };
    let mut previous = at_level(0);
    for level in 1..=max_level {
        let current = at_level(level);
        if (current - previous).abs() < 1e-8 {
            return Ok(r * current);
        }
        previous = current;
        if level == max_level {
            return Err(AnisotropyError::NotConverged { previous, last: current });
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_evaluations() {
        let iso = Anisotropy::isotropic(2, 1.0).unwrap();
        assert_eq!(iso.eval(&[3.0, 4.0, 0.0]), 5.0);
        let ell = Anisotropy::elliptic(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]))).unwrap();
        assert!((ell.eval(&[1.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((ell.eval(&[0.0, 1.0, 0.0]) - 2.0).abs() < 1e-15);
        assert!((ell.eval(&[1.0, 1.0, 0.0]) - 5f64.sqrt()).abs() < 1e-15);
        assert!((ell.dual(&[0.0, 1.0, 0.0]) - 0.5).abs() < 1e-15);
        assert_eq!(ell.eval(&[0.0; 3]), 0.0);
    }

    #[test]
    fn crystalline_fails_convexity_only() {
        let c = Anisotropy::crystalline(vec![1.0, 1.0]).unwrap();
        let report = c.validate(500, 3);
        assert!(!report.get("strict_convexity").unwrap().passed);
        assert!(report.get("homogeneity").unwrap().passed);
        assert!(report.get("bounds").unwrap().passed);
        assert!(!c.is_admissible());
    }

    #[test]
    fn gaussian_induces_inverse_sqrt_pi() {
        let k = Kernel::gaussian(2);
        let g = induced_gamma(&k, &[0.6, 0.8, 0.0]).unwrap();
        assert!((g - 1.0 / PI.sqrt()).abs() < 1e-9);
        let k3 = Kernel::gaussian(3);
        let g3 = induced_gamma(&k3, &[0.0, 0.6, 0.8]).unwrap();
        assert!((g3 - 1.0 / PI.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn normalization_hits_unit_ball_volume() {
        let ell = Anisotropy::elliptic(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]))).unwrap();
        // {sqrt(x.Ax) <= 1} is an ellipse with semi-axes 1 and 1/2.
        assert!((ell.ball_volume() - PI / 2.0).abs() < 1e-9);
        let n = ell.normalized();
        assert!((n.ball_volume() - PI).abs() < 1e-9);
    }
}
