//! Convolution kernels, their parabolic scaling `K_h(x) = h^{-d/2} K(x / sqrt h)`
//! and periodic convolution on the torus.

use std::f64::consts::PI;

use log::warn;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{norm, GridError, Point, ScalarField, TorusGrid};
use crate::fft::GridFft;
use crate::quadrature;
use crate::report::Report;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("invalid kernel: {0}")]
    Invalid(String),
    #[error("smoothing parameter must be positive, got {0}")]
    NonPositiveH(f64),
    #[error("kernel width sqrt(h) = {width:.3e} is below one grid spacing {spacing:.3e}")]
    Unresolved { width: f64, spacing: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Serializable kernel descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `(4 pi)^{-d/2} exp(-|x|^2 / 4)`.
    Gaussian,
    /// `det(L) G(L x)` for an invertible matrix `L` given row by row.
    EllipticGaussian { matrix: Vec<Vec<f64>> },
    /// Unit-mass cone `c (1 - |x| / radius)` on the ball of the given radius.
    Triangular { radius: f64 },
}

#[derive(Debug, Clone)]
enum Profile {
    Gaussian,
    Elliptic { l: DMatrix<f64>, det: f64, sigma_min: f64, sigma_max: f64 },
    Triangular { radius: f64, height: f64 },
}

/// Lower bound `K >= a` on the ball `B_b(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Positivity {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone)]
pub struct Kernel {
    dim: usize,
    spec: KernelSpec,
    profile: Profile,
}

/// Radius (in unscaled units) beyond which the Gaussian and `|x| G` carry
/// relative mass below `1e-10`.
const GAUSSIAN_CUTOFF: f64 = 12.0;

pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => PI,
        3 => 4.0 / 3.0 * PI,
        _ => PI.powf(dim as f64 / 2.0) / gamma_half_integer(dim + 2),
    }
}

// Gamma(k / 2) for integer k >= 1.
fn gamma_half_integer(k: usize) -> f64 {
    if k == 1 {
        PI.sqrt()
    } else if k == 2 {
        1.0
    } else {
        (k as f64 / 2.0 - 1.0) * gamma_half_integer(k - 2)
    }
}

fn gaussian(dim: usize, r2: f64) -> f64 {
    (4.0 * PI).powf(-(dim as f64) / 2.0) * (-r2 / 4.0).exp()
}

impl Kernel {
    pub fn new(spec: &KernelSpec, dim: usize) -> Result<Self, KernelError> {
        if !(2..=3).contains(&dim) {
            return Err(KernelError::Invalid(format!("dimension {dim} not supported")));
        }
        let profile = match spec {
            KernelSpec::Gaussian => Profile::Gaussian,
            KernelSpec::EllipticGaussian { matrix } => {
                if matrix.len() != dim || matrix.iter().any(|row| row.len() != dim) {
                    return Err(KernelError::Invalid(format!("elliptic matrix must be {dim}x{dim}")));
                }
                let l = DMatrix::from_fn(dim, dim, |i, j| matrix[i][j]);
                let det = l.determinant();
                if !(det > 0.0) {
                    return Err(KernelError::Invalid("elliptic matrix must have positive determinant".into()));
                }
                let sv = l.clone().singular_values();
                let sigma_min = sv.iter().copied().fold(f64::INFINITY, f64::min);
                let sigma_max = sv.iter().copied().fold(0.0, f64::max);
                Profile::Elliptic { l, det, sigma_min, sigma_max }
            }
            KernelSpec::Triangular { radius } => {
                if !(*radius > 0.0) {
                    return Err(KernelError::Invalid("triangular radius must be positive".into()));
                }
                let height = (dim as f64 + 1.0) / (unit_ball_volume(dim) * radius.powi(dim as i32));
                Profile::Triangular { radius: *radius, height }
            }
        };
        Ok(Self { dim, spec: spec.clone(), profile })
    }

    pub fn gaussian(dim: usize) -> Self {
        Self::new(&KernelSpec::Gaussian, dim).expect("gaussian kernel in supported dimension")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.profile, Profile::Gaussian)
    }

    pub fn is_compact(&self) -> bool {
        matches!(self.profile, Profile::Triangular { .. })
    }

    pub fn eval(&self, x: &Point) -> f64 {
        match &self.profile {
            Profile::Gaussian => gaussian(self.dim, x[0] * x[0] + x[1] * x[1] + x[2] * x[2]),
            Profile::Elliptic { l, det, .. } => {
                let mut r2 = 0.0;
                for i in 0..self.dim {
                    let mut y = 0.0;
                    for j in 0..self.dim {
                        y += l[(i, j)] * x[j];
                    }
                    r2 += y * y;
                }
                det * gaussian(self.dim, r2)
            }
            Profile::Triangular { radius, height } => {
                let r = norm(x);
                if r < *radius {
                    height * (1.0 - r / radius)
                } else {
                    0.0
                }
            }
        }
    }

    /// Analytic gradient; zero at the apex of the triangular kernel.
    pub fn gradient(&self, x: &Point) -> Point {
        let mut g = [0.0; 3];
        match &self.profile {
            Profile::Gaussian => {
                let k = self.eval(x);
                for a in 0..self.dim {
                    g[a] = -0.5 * x[a] * k;
                }
            }
            Profile::Elliptic { l, .. } => {
                // grad = -1/2 K(x) L^T L x
                let k = self.eval(x);
                let mut y = [0.0; 3];
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        y[i] += l[(i, j)] * x[j];
                    }
                }
                for a in 0..self.dim {
                    let mut s = 0.0;
                    for i in 0..self.dim {
                        s += l[(i, a)] * y[i];
                    }
                    g[a] = -0.5 * k * s;
                }
            }
            Profile::Triangular { radius, height } => {
                let r = norm(x);
                if r > 0.0 && r < *radius {
                    for a in 0..self.dim {
                        g[a] = -height / radius * x[a] / r;
                    }
                }
            }
        }
        g
    }

    /// Analytic total mass. All built-in kernels are normalized.
    pub fn mass(&self) -> f64 {
        1.0
    }

    /// Constant `c_K` in `|x| K(x) <= c_K K(x/2)`.
    pub fn decay_constant(&self) -> f64 {
        let gaussian_c = (8.0f64 / 3.0).sqrt() * (-0.5f64).exp();
        match &self.profile {
            Profile::Gaussian => gaussian_c,
            Profile::Elliptic { sigma_min, .. } => gaussian_c / sigma_min,
            Profile::Triangular { radius, .. } => *radius,
        }
    }

    pub fn positivity(&self) -> Positivity {
        match &self.profile {
            Profile::Gaussian => Positivity { a: gaussian(self.dim, 1.0), b: 1.0 },
            Profile::Elliptic { det, sigma_max, .. } => Positivity { a: det * gaussian(self.dim, 1.0), b: 1.0 / sigma_max },
            Profile::Triangular { radius, height } => Positivity { a: 0.5 * height, b: 0.5 * radius },
        }
    }

    /// Radius outside which the kernel is zero or negligible.
    pub fn cutoff_radius(&self) -> f64 {
        match &self.profile {
            Profile::Gaussian => GAUSSIAN_CUTOFF,
            Profile::Elliptic { sigma_min, .. } => GAUSSIAN_CUTOFF / sigma_min,
            Profile::Triangular { radius, .. } => *radius,
        }
    }

    /// `int_0^R r^power K(r xi) dr` along the unit direction `xi`.
    pub fn radial_moment(&self, xi: &Point, power: i32) -> f64 {
        let rule = quadrature::legendre(12);
        let r_max = self.cutoff_radius();
        quadrature::composite(&rule, 0.0, r_max, 24, |r| {
            let x = [r * xi[0], r * xi[1], r * xi[2]];
            r.powi(power) * self.eval(&x)
        })
    }

    /// Mass by polar quadrature, independent of the analytic normalization.
    pub fn mass_quadrature(&self) -> f64 {
        let mut axis = [0.0; 3];
        axis[self.dim - 1] = 1.0;
        sphere_integral(self.dim, &axis, 4, |xi| self.radial_moment(&xi, self.dim as i32 - 1))
    }

    /// Checks symmetry, nonnegativity, unit mass, the decay inequality and the
    /// positivity bound on `samples` random points.
    pub fn validate(&self, samples: usize, seed: u64) -> Report {
        let mut report = Report::new("kernel");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r_max = self.cutoff_radius();
        let mut asym: f64 = 0.0;
        let mut min_value = f64::INFINITY;
        let mut worst_decay: f64 = 0.0;
        let pos = self.positivity();
        let mut min_inner = f64::INFINITY;
        let k0 = self.eval(&[0.0; 3]);
        for _ in 0..samples {
            let x = random_in_ball(&mut rng, self.dim, r_max);
            let kx = self.eval(&x);
            let neg = [-x[0], -x[1], -x[2]];
            asym = asym.max((kx - self.eval(&neg)).abs() / k0);
            min_value = min_value.min(kx);
            let half = [0.5 * x[0], 0.5 * x[1], 0.5 * x[2]];
            let kh = self.eval(&half);
            if kx > 0.0 && kh > 0.0 {
                worst_decay = worst_decay.max(norm(&x) * kx / kh);
            }
            let y = random_in_ball(&mut rng, self.dim, pos.b);
            min_inner = min_inner.min(self.eval(&y));
        }
        report.check("symmetry", asym <= 1e-14, asym, "max |K(x) - K(-x)| / K(0)");
        report.check("nonnegative", min_value >= 0.0, min_value, "minimum sampled value");
        let mass = self.mass_quadrature();
        report.check("unit_mass", (mass - 1.0).abs() < 1e-8, mass, "polar quadrature of K");
        let c_k = self.decay_constant();
        report.check(
            "decay",
            worst_decay <= c_k * (1.0 + 1e-9),
            worst_decay,
            &format!("sampled sup |x|K(x)/K(x/2), stored c_K = {c_k:.6}"),
        );
        report.check(
            "positive_near_origin",
            min_inner >= pos.a,
            min_inner,
            &format!("min over B_b with a = {:.6e}, b = {:.4}", pos.a, pos.b),
        );
        report
    }
}

fn random_in_ball(rng: &mut impl Rng, dim: usize, radius: f64) -> Point {
    loop {
        let mut x = [0.0; 3];
        for v in x.iter_mut().take(dim) {
            *v = rng.random_range(-radius..radius);
        }
        if norm(&x) <= radius {
            return x;
        }
    }
}

/// Orthonormal frame `(e1, e2)` completing the unit vector `nu` in 3D.
pub(crate) fn complete_frame(nu: &Point) -> (Point, Point) {
    let helper = if nu[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = crate::grid::dot(&helper, nu);
    let mut e1 = [helper[0] - d * nu[0], helper[1] - d * nu[1], helper[2] - d * nu[2]];
    let n1 = norm(&e1);
    for v in e1.iter_mut() {
        *v /= n1;
    }
    let e2 = [nu[1] * e1[2] - nu[2] * e1[1], nu[2] * e1[0] - nu[0] * e1[2], nu[0] * e1[1] - nu[1] * e1[0]];
    (e1, e2)
}

/// Integral of `g` over the unit sphere, parametrized relative to `axis` so the
/// great circle `xi . axis = 0` lies on panel boundaries. `level` doubles the
/// number of panels.
pub fn sphere_integral(dim: usize, axis: &Point, level: u32, g: impl Fn(Point) -> f64 + Sync) -> f64 {
    let rule = quadrature::legendre(8);
    let panels = 1usize << level;
    if dim == 2 {
        let perp = [-axis[1], axis[0], 0.0];
        let f = |alpha: f64| {
            let (s, c) = alpha.sin_cos();
            g([c * axis[0] + s * perp[0], c * axis[1] + s * perp[1], 0.0])
        };
        quadrature::composite(&rule, -PI / 2.0, PI / 2.0, panels, f)
            + quadrature::composite(&rule, PI / 2.0, 3.0 * PI / 2.0, panels, f)
    } else {
        let (e1, e2) = complete_frame(axis);
        let m = 8 * panels;
        let dphi = 2.0 * PI / m as f64;
        let ring = |theta: f64| {
            let (st, ct) = theta.sin_cos();
            let s: f64 = (0..m)
                .into_par_iter()
                .map(|k| {
                    let (sp, cp) = (k as f64 * dphi).sin_cos();
                    let xi = [
                        ct * axis[0] + st * (cp * e1[0] + sp * e2[0]),
                        ct * axis[1] + st * (cp * e1[1] + sp * e2[1]),
                        ct * axis[2] + st * (cp * e1[2] + sp * e2[2]),
                    ];
                    g(xi)
                })
                .sum();
            s * dphi * st
        };
        quadrature::composite(&rule, 0.0, PI / 2.0, panels, ring) + quadrature::composite(&rule, PI / 2.0, PI, panels, ring)
    }
}

/// Parity used when symmetrizing sampled kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Samples `f` at every cell offset, summing periodic images up to `images`
/// torus periods away, then enforces the requested parity exactly.
pub fn sample_periodized(grid: TorusGrid, images: usize, cutoff: f64, parity: Parity, f: impl Fn(&Point) -> f64 + Sync) -> ScalarField {
    let dim = grid.dim();
    let m = images as isize;
    let mut shifts = Vec::new();
    for i in -m..=m {
        for j in -m..=m {
            for k in if dim == 3 { -m..=m } else { 0..=0 } {
                shifts.push([i as f64, j as f64, k as f64]);
            }
        }
    }
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|c| {
            let x = grid.offset_vector(c);
            let mut s = 0.0;
            for sh in &shifts {
                let y = [x[0] + sh[0], x[1] + sh[1], if dim == 3 { x[2] + sh[2] } else { 0.0 }];
                if norm(&y) <= cutoff {
                    s += f(&y);
                }
            }
            s
        })
        .collect();
    let sign = match parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
    };
    let sym: Vec<f64> = (0..grid.len()).map(|c| 0.5 * (values[c] + sign * values[grid.negated(c)])).collect();
    ScalarField::from_values(grid, sym).expect("sample count matches grid")
}

/// Circular convolution with a fixed sampled kernel through precomputed spectra.
#[derive(Debug, Clone)]
pub struct Convolver {
    fft: GridFft,
    spectrum: Vec<Complex64>,
}

impl Convolver {
    /// `samples` holds kernel values indexed by cell offset; the operator is
    /// `f -> spacing^d sum_y samples(y) f(x - y)`.
    pub fn new(samples: &ScalarField) -> Self {
        let grid = samples.grid();
        let fft = GridFft::new(grid);
        let w = grid.cell_volume();
        let mut spectrum: Vec<Complex64> = samples.values().iter().map(|&v| Complex64::new(v * w, 0.0)).collect();
        fft.forward(&mut spectrum);
        Self { fft, spectrum }
    }

    pub fn grid(&self) -> TorusGrid {
        self.fft.grid()
    }

    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField, GridError> {
        self.check(f)?;
        let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.run(&mut data);
        ScalarField::from_values(self.grid(), data.into_iter().map(|z| z.re).collect())
    }

    /// Two real convolutions packed into one complex transform.
    pub fn apply_pair(&self, f: &ScalarField, g: &ScalarField) -> Result<(ScalarField, ScalarField), GridError> {
        self.check(f)?;
        self.check(g)?;
        let mut data: Vec<Complex64> = f.values().iter().zip(g.values()).map(|(&a, &b)| Complex64::new(a, b)).collect();
        self.run(&mut data);
        let re = data.iter().map(|z| z.re).collect();
        let im = data.iter().map(|z| z.im).collect();
        Ok((ScalarField::from_values(self.grid(), re)?, ScalarField::from_values(self.grid(), im)?))
    }

    fn run(&self, data: &mut [Complex64]) {
        self.fft.forward(data);
        data.par_iter_mut().zip(self.spectrum.par_iter()).for_each(|(z, k)| *z *= k);
        self.fft.inverse(data);
    }

    fn check(&self, f: &ScalarField) -> Result<(), GridError> {
        if f.grid() != self.grid() {
            return Err(GridError::Mismatch);
        }
        Ok(())
    }
}

/// Kernel `K_h` sampled on a grid, with its convolution operator.
#[derive(Debug, Clone)]
pub struct SampledKernel {
    kernel: Kernel,
    h: f64,
    values: ScalarField,
    discrete_mass: f64,
    under_resolved: bool,
    convolver: Convolver,
}

/// Samples `K_h` on `grid`. Warns when `sqrt(h) < 3 * spacing`, fails when
/// `sqrt(h) < spacing`.
pub fn scale(kernel: &Kernel, grid: TorusGrid, h: f64) -> Result<SampledKernel, KernelError> {
    if grid.dim() != kernel.dim() {
        return Err(KernelError::Invalid(format!(
            "kernel dimension {} differs from grid dimension {}",
            kernel.dim(),
            grid.dim()
        )));
    }
    if !(h > 0.0) {
        return Err(KernelError::NonPositiveH(h));
    }
    let width = h.sqrt();
    let spacing = grid.spacing();
    if width < spacing {
        return Err(KernelError::Unresolved { width, spacing });
    }
    let under_resolved = width < 3.0 * spacing;
    if under_resolved {
        warn!("kernel under-resolved: sqrt(h) = {width:.3e} < 3 * spacing = {:.3e}", 3.0 * spacing);
    }
    let cutoff = width * kernel.cutoff_radius();
    let images = ((cutoff - 0.5).ceil().max(1.0)) as usize;
    let norm_factor = h.powf(-(grid.dim() as f64) / 2.0);
    let values = sample_periodized(grid, images, cutoff, Parity::Even, |y| {
        let x = [y[0] / width, y[1] / width, y[2] / width];
        norm_factor * kernel.eval(&x)
    });
    let discrete_mass = values.sum() * grid.cell_volume();
    let convolver = Convolver::new(&values);
    Ok(SampledKernel { kernel: kernel.clone(), h, values, discrete_mass, under_resolved, convolver })
}

impl SampledKernel {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn grid(&self) -> TorusGrid {
        self.values.grid()
    }

    /// Samples indexed by cell offset.
    pub fn values(&self) -> &ScalarField {
        &self.values
    }

    pub fn discrete_mass(&self) -> f64 {
        self.discrete_mass
    }

    pub fn is_under_resolved(&self) -> bool {
        self.under_resolved
    }

    /// Sampled value at offset zero.
    pub fn center_value(&self) -> f64 {
        self.values.get(0)
    }

    /// Copy rescaled to unit discrete mass.
    pub fn normalized(&self) -> Self {
        let s = 1.0 / self.discrete_mass;
        let values = self.values.map(|v| v * s);
        let convolver = Convolver::new(&values);
        Self { values, discrete_mass: 1.0, convolver, ..self.clone() }
    }

    /// Offsets whose sample is positive, with their values.
    pub fn support(&self) -> Vec<(usize, f64)> {
        self.values.values().iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, &v)| (i, v)).collect()
    }

    pub fn convolve(&self, f: &ScalarField) -> Result<ScalarField, KernelError> {
        Ok(self.convolver.apply(f)?)
    }

    pub fn convolve_pair(&self, f: &ScalarField, g: &ScalarField) -> Result<(ScalarField, ScalarField), KernelError> {
        Ok(self.convolver.apply_pair(f, g)?)
    }

    /// `dx^d sum_y K_h(y) f(x - y)` by direct summation over every offset.
    /// Quadratic in the cell count; meant as a reference for small grids.
    pub fn convolve_direct(&self, f: &ScalarField) -> Result<ScalarField, KernelError> {
        let grid = self.grid();
        f.check_same(&self.values)?;
        let w = grid.cell_volume();
        let k = self.values.values();
        let out: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|x| {
                let xi = grid.multi(x);
                let mut acc = 0.0;
                for (y, &ky) in k.iter().enumerate() {
                    let yi = grid.multi(y);
                    let src = grid.linear([
                        (xi[0] + grid.n() - yi[0]) % grid.n(),
                        if grid.dim() > 1 { (xi[1] + grid.n() - yi[1]) % grid.n() } else { 0 },
                        if grid.dim() > 2 { (xi[2] + grid.n() - yi[2]) % grid.n() } else { 0 },
                    ]);
                    acc += ky * f.get(src);
                }
                w * acc
            })
            .collect();
        Ok(ScalarField::from_values(grid, out)?)
    }

    /// Per-axis samples of `grad K_h`, odd-symmetrized.
    pub fn gradient_samples(&self) -> Vec<ScalarField> {
        let grid = self.grid();
        let width = self.h.sqrt();
        let cutoff = width * self.kernel.cutoff_radius();
        let images = ((cutoff - 0.5).ceil().max(1.0)) as usize;
        let factor = self.h.powf(-(grid.dim() as f64 + 1.0) / 2.0);
        (0..grid.dim())
            .map(|a| {
                sample_periodized(grid, images, cutoff, Parity::Odd, |y| {
                    let x = [y[0] / width, y[1] / width, y[2] / width];
                    factor * self.kernel.gradient(&x)[a]
                })
            })
            .collect()
    }
}
