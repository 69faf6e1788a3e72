//! The nonlocal energy `E_h`, the sharp interfacial energy it approximates,
//! and numerical checks of the pointwise limit, approximate monotonicity and
//! the auxiliary inequalities behind compactness.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anisotropy::Anisotropy;
use crate::geometry::Geometry;
use crate::grid::{deterministic_sum, deterministic_sum_by, GridError, ScalarField, TorusGrid};
use crate::kernel::{scale, Convolver, Kernel, KernelError, KernelSpec, SampledKernel};
use crate::report::Report;
use crate::shapes::{container_boundary, ShapeError, ShapeSpec};
use crate::tensions::{ModifiedTensions, RawTensions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("invalid phase field: {0}")]
    InvalidPhase(String),
    #[error("sqrt(h) = {width:.3e} is below 3 grid spacings ({spacing:.3e} each)")]
    Resolution { width: f64, spacing: f64 },
    #[error("convergence study needs at least two resolvable values of h, got {0}")]
    TooFewLevels(usize),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Phase indicator `u` with values in `[0, 1]`, zero outside the container.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    field: ScalarField,
}

impl PhaseField {
    pub fn new(field: ScalarField, geometry: &Geometry) -> Result<Self, EnergyError> {
        if field.grid() != geometry.grid() {
            return Err(GridError::Mismatch.into());
        }
        for c in 0..field.grid().len() {
            let v = field.get(c);
            if !(0.0..=1.0).contains(&v) {
                return Err(EnergyError::InvalidPhase(format!("value {v} at cell {c} outside [0, 1]")));
            }
            if v != 0.0 && !geometry.in_omega(c) {
                return Err(EnergyError::InvalidPhase(format!("nonzero value {v} at cell {c} outside the container")));
            }
        }
        Ok(Self { field })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self { field: ScalarField::zeros(grid) }
    }

    /// Cell-center indicator of a parametric shape, clipped to the container.
    pub fn from_shape(shape: &ShapeSpec, geometry: &Geometry) -> Result<Self, EnergyError> {
        shape.validate()?;
        if geometry.grid().dim() != 2 {
            return Err(ShapeError::Dimension.into());
        }
        let grid = geometry.grid();
        let mut field = ScalarField::zeros(grid);
        for c in 0..grid.len() {
            if geometry.in_omega(c) && shape.contains(&grid.center(c), geometry) {
                field.set(c, 1.0);
            }
        }
        Ok(Self { field })
    }

    /// Indicator of the container cells where `pred(center)` holds.
    pub fn from_predicate(geometry: &Geometry, pred: impl Fn(&crate::grid::Point) -> bool) -> Self {
        let grid = geometry.grid();
        let mut out = ScalarField::zeros(grid);
        for c in 0..grid.len() {
            if geometry.in_omega(c) && pred(&grid.center(c)) {
                out.set(c, 1.0);
            }
        }
        Self { field: out }
    }

    /// Independent uniform values in `[0, 1]` on the container cells.
    pub fn random(geometry: &Geometry, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = geometry.grid();
        let mut field = ScalarField::zeros(grid);
        for c in 0..grid.len() {
            let v: f64 = rng.random();
            if geometry.in_omega(c) {
                field.set(c, v);
            }
        }
        Self { field }
    }

    /// Random `{0, 1}` values on the container cells.
    pub fn random_binary(geometry: &Geometry, seed: u64) -> Self {
        let mut u = Self::random(geometry, seed);
        u.field = u.field.map(|v| if v > 0.5 { 1.0 } else { 0.0 });
        u
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn into_field(self) -> ScalarField {
        self.field
    }

    pub fn grid(&self) -> TorusGrid {
        self.field.grid()
    }

    pub fn get(&self, c: usize) -> f64 {
        self.field.get(c)
    }

    pub fn volume(&self) -> f64 {
        self.field.integral()
    }

    pub fn is_binary(&self) -> bool {
        self.field.values().iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// `int u (1 - u)`.
    pub fn defect(&self) -> f64 {
        let v = self.field.values();
        deterministic_sum_by(v.len(), |i| v[i] * (1.0 - v[i])) * self.grid().cell_volume()
    }

    /// Flips cell `c` of a binary field.
    pub fn flipped(&self, c: usize) -> Self {
        let mut field = self.field.clone();
        field.set(c, 1.0 - field.get(c));
        Self { field }
    }

    /// Number of cells that differ from `other`.
    pub fn difference_count(&self, other: &PhaseField) -> usize {
        self.field.values().iter().zip(other.field.values()).filter(|(a, b)| a != b).count()
    }
}

/// The three contributions to `E_h` and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    pub pv: f64,
    pub sp: f64,
    pub sv: f64,
    pub total: f64,
}

/// `E_h` for fixed geometry, tensions and `h`, with the convolutions of the
/// container and substrate indicators cached.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    geometry: Geometry,
    tensions: ModifiedTensions,
    kernel: SampledKernel,
    k_omega: ScalarField,
    k_substrate: ScalarField,
}

impl EnergyModel {
    pub fn new(geometry: &Geometry, tensions: &ModifiedTensions, kernel: SampledKernel) -> Result<Self, EnergyError> {
        let grid = geometry.grid();
        if tensions.grid() != grid || kernel.grid() != grid {
            return Err(GridError::Mismatch.into());
        }
        let (k_omega, k_substrate) = kernel.convolve_pair(geometry.omega_mask(), geometry.substrate_mask())?;
        Ok(Self { geometry: geometry.clone(), tensions: tensions.clone(), kernel, k_omega, k_substrate })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn tensions(&self) -> &ModifiedTensions {
        &self.tensions
    }

    pub fn kernel(&self) -> &SampledKernel {
        &self.kernel
    }

    pub fn h(&self) -> f64 {
        self.kernel.h()
    }

    /// Cached `K_h * 1_S`.
    pub fn substrate_convolution(&self) -> &ScalarField {
        &self.k_substrate
    }

    pub fn terms(&self, u: &PhaseField) -> Result<EnergyTerms, EnergyError> {
        let ku = self.kernel.convolve(u.field())?;
        Ok(self.terms_with(u, &ku))
    }

    fn terms_with(&self, u: &PhaseField, ku: &ScalarField) -> EnergyTerms {
        let grid = self.geometry.grid();
        let scale = grid.cell_volume() / self.h().sqrt();
        let om = self.geometry.omega_mask().values();
        let (uv, kuv) = (u.field().values(), ku.values());
        let (ko, ks) = (self.k_omega.values(), self.k_substrate.values());
        let t = &self.tensions;
        let (pv, sp, sv) = (t.pv.values(), t.sp.values(), t.sv.values());
        let n = grid.len();
        let pv_term = deterministic_sum_by(n, |i| if om[i] > 0.5 { pv[i] * uv[i] * (ko[i] - kuv[i]) } else { 0.0 });
        let sp_term = deterministic_sum_by(n, |i| if om[i] > 0.5 { sp[i] * uv[i] * ks[i] } else { 0.0 });
        let sv_term = deterministic_sum_by(n, |i| if om[i] > 0.5 { sv[i] * (1.0 - uv[i]) * ks[i] } else { 0.0 });
        let (a, b, c) = (scale * pv_term, scale * sp_term, scale * sv_term);
        EnergyTerms { pv: a, sp: b, sv: c, total: a + b + c }
    }

    pub fn energy(&self, u: &PhaseField) -> Result<f64, EnergyError> {
        Ok(self.terms(u)?.total)
    }

    /// Energy in the symmetric three-phase form
    /// `(1 / 2 sqrt h) sum_{i,j} int gamma_ij u^i K_h * u^j` over the torus,
    /// with `u^1 = u`, `u^2 = 1_Omega - u`, `u^3 = 1_S`. It agrees with
    /// [`EnergyModel::energy`] when the tensions are constant.
    pub fn symmetric_energy(&self, u: &PhaseField) -> Result<f64, EnergyError> {
        let grid = self.geometry.grid();
        let ku = self.kernel.convolve(u.field())?;
        let om = self.geometry.omega_mask().values();
        let sm = self.geometry.substrate_mask().values();
        let uv = u.field().values();
        let (ku, ko, ks) = (ku.values(), self.k_omega.values(), self.k_substrate.values());
        let t = &self.tensions;
        let (pv, sp, sv) = (t.pv.values(), t.sp.values(), t.sv.values());
        let total = deterministic_sum_by(grid.len(), |i| {
            let (u1, u2, u3) = (uv[i], om[i] - uv[i], sm[i]);
            let (k1, k2, k3) = (ku[i], ko[i] - ku[i], ks[i]);
            pv[i] * (u1 * k2 + u2 * k1) + sp[i] * (u1 * k3 + u3 * k1) + sv[i] * (u2 * k3 + u3 * k2)
        });
        Ok(0.5 * grid.cell_volume() / self.h().sqrt() * total)
    }

    /// First variation of `E_h` at `u`, up to the factor `spacing^d / sqrt h`:
    /// `gamma_PV K_h * (1_Omega - u) - K_h * (gamma_PV u) + (gamma_SP - gamma_SV) K_h * 1_S`
    /// on container cells, zero elsewhere.
    pub fn comparison_field(&self, u: &PhaseField) -> Result<ScalarField, EnergyError> {
        let t = &self.tensions;
        let gu = t.pv.zip_map(u.field(), |g, v| g * v)?;
        let (ku, kgu) = self.kernel.convolve_pair(u.field(), &gu)?;
        Ok(self.assemble_comparison(&ku, &kgu))
    }

    /// Comparison field together with `K_h * u`.
    pub fn comparison_with_convolution(&self, u: &PhaseField) -> Result<(ScalarField, ScalarField), EnergyError> {
        let gu = self.tensions.pv.zip_map(u.field(), |g, v| g * v)?;
        let (ku, kgu) = self.kernel.convolve_pair(u.field(), &gu)?;
        let phi = self.assemble_comparison(&ku, &kgu);
        Ok((phi, ku))
    }

    fn assemble_comparison(&self, ku: &ScalarField, kgu: &ScalarField) -> ScalarField {
        let grid = self.geometry.grid();
        let t = &self.tensions;
        let om = self.geometry.omega_mask().values();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                if om[i] > 0.5 {
                    t.pv.get(i) * (self.k_omega.get(i) - ku.get(i)) - kgu.get(i)
                        + (t.sp.get(i) - t.sv.get(i)) * self.k_substrate.get(i)
                } else {
                    0.0
                }
            })
            .collect();
        ScalarField::from_values(grid, values).expect("sizes match")
    }

    /// Exact change of `E_h` when the binary cell `c` flips, from the
    /// comparison field: `(dx^d / sqrt h)(s phi(c) - dx^d gamma_PV(c) K_h(0))`
    /// with `s = +1` for `0 -> 1` and `s = -1` for `1 -> 0`.
    pub fn flip_delta(&self, phi: &ScalarField, u: &PhaseField, c: usize) -> f64 {
        let w = self.geometry.grid().cell_volume();
        let s = if u.get(c) == 0.0 { 1.0 } else { -1.0 };
        w / self.h().sqrt() * (s * phi.get(c) - w * self.tensions.pv.get(c) * self.kernel.center_value())
    }
}

/// `E_h(u)` in one call.
pub fn approx_energy(u: &PhaseField, geometry: &Geometry, tensions: &ModifiedTensions, kernel: &SampledKernel) -> Result<f64, EnergyError> {
    EnergyModel::new(geometry, tensions, kernel.clone())?.energy(u)
}

/// Relative tolerance of the adaptive line quadrature in [`sharp_energy`].
pub const SHARP_TOLERANCE: f64 = 1e-11;

/// Sharp energy of a parametric particle:
/// `int_Gamma gamma_PV gamma(nu) + int_wet gamma_SP + int_{dOmega \ wet} gamma_SV`.
pub fn sharp_energy(shape: &ShapeSpec, raw: &RawTensions, gamma: &Anisotropy, geometry: &Geometry) -> Result<f64, EnergyError> {
    let (free, contact) = shape.boundary(geometry)?;
    let free_len: f64 = free.iter().map(|c| c.length()).sum();
    let tol = SHARP_TOLERANCE * free_len.max(1e-300);
    let mut total = 0.0;
    for c in &free {
        total += c.integrate(&|x, nu| raw.pv.eval(x) * gamma.eval(nu), tol);
    }
    if geometry.has_substrate() {
        for c in container_boundary(geometry.shape())? {
            total += c.integrate(&|x, _| raw.sv.eval(x), tol);
        }
        if let Some(k) = contact {
            let wet = crate::shapes::Curve::Segment { a: k.left, b: k.right };
            total += wet.integrate(&|x, _| raw.sp.eval(x) - raw.sv.eval(x), tol);
        }
    }
    Ok(total)
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub approx: f64,
    pub sharp: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log rel_err` against `log h`.
    pub order: f64,
    pub strictly_decreasing: bool,
}

/// `E_h` of a shape indicator along a decreasing sequence of `h`, compared to
/// the sharp energy.
pub fn convergence_study(
    shape: &ShapeSpec,
    raw: &RawTensions,
    gamma: &Anisotropy,
    geometry: &Geometry,
    tensions: &ModifiedTensions,
    kernel: &Kernel,
    h_seq: &[f64],
) -> Result<ConvergenceTable, EnergyError> {
    let grid = geometry.grid();
    let u = PhaseField::from_shape(shape, geometry)?;
    let sharp = sharp_energy(shape, raw, gamma, geometry)?;
    let mut rows = Vec::new();
    for &h in h_seq {
        if h.sqrt() < 3.0 * grid.spacing() {
            warn!("dropping h = {h:e}: sqrt(h) is below three grid spacings");
            continue;
        }
        let k = scale(kernel, grid, h)?;
        let approx = approx_energy(&u, geometry, tensions, &k)?;
        rows.push(ConvergenceRow { h, approx, sharp, rel_err: ((approx - sharp) / sharp).abs() });
    }
    if rows.len() < 2 {
        return Err(EnergyError::TooFewLevels(rows.len()));
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].rel_err < w[0].rel_err);
    let order = loglog_slope(&rows.iter().map(|r| (r.h, r.rel_err)).collect::<Vec<_>>());
    Ok(ConvergenceTable { rows, order, strictly_decreasing })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Outcome of comparing `E_{N^2 h}` with `E_h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monotonicity {
    pub h: f64,
    pub n: usize,
    /// `E_{N^2 h}(u)` in symmetric form.
    pub lhs: f64,
    /// `E_h(u)` in symmetric form.
    pub rhs: f64,
    /// Lipschitz remainder `C_{N,h}(u)` from iterating the subadditivity bound.
    pub remainder: f64,
    /// Smallest `c >= 0` with `lhs <= (1 + c N sqrt h) rhs`.
    pub c_est: f64,
    /// `remainder / (N sqrt h rhs)`: the constant the remainder bound supplies.
    pub c_fit: f64,
}

impl Monotonicity {
    /// `lhs <= rhs (1 + 1e-10)`.
    pub fn exact_holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-10)
    }

    /// `lhs <= rhs + remainder`, with the same relative slack.
    pub fn bound_holds(&self) -> bool {
        self.lhs <= (self.rhs + self.remainder) * (1.0 + 1e-10)
    }
}

/// Compares the energies at `N^2 h` and `h` and evaluates the remainder
/// `(1 / N sqrt h) sum_{i != j} sum_s dx^d K_h(s) sum_x dx^d u^i(x) u^j(x - s)
/// sum_{n < N} |gamma_ij(x) - gamma_ij(x + n s)|`. Constant tension fields
/// contribute nothing and are skipped.
pub fn monotonicity_check(
    u: &PhaseField,
    geometry: &Geometry,
    tensions: &ModifiedTensions,
    kernel: &Kernel,
    h: f64,
    n: usize,
) -> Result<Monotonicity, EnergyError> {
    let grid = geometry.grid();
    let n = n.max(1);
    for hh in [h, (n * n) as f64 * h] {
        if hh.sqrt() < 3.0 * grid.spacing() {
            return Err(EnergyError::Resolution { width: hh.sqrt(), spacing: grid.spacing() });
        }
    }
    let small = EnergyModel::new(geometry, tensions, scale(kernel, grid, h)?)?;
    let large = EnergyModel::new(geometry, tensions, scale(kernel, grid, (n * n) as f64 * h)?)?;
    let rhs = small.symmetric_energy(u)?;
    let lhs = large.symmetric_energy(u)?;
    let remainder = if n > 1 { lipschitz_remainder(u, geometry, tensions, small.kernel(), n) } else { 0.0 };
    let scale_c = n as f64 * h.sqrt();
    let c_est = if rhs > 0.0 { ((lhs / rhs - 1.0) / scale_c).max(0.0) } else { 0.0 };
    let c_fit = if rhs > 0.0 { remainder / (scale_c * rhs) } else { 0.0 };
    Ok(Monotonicity { h, n, lhs, rhs, remainder, c_est, c_fit })
}

fn lipschitz_remainder(u: &PhaseField, geometry: &Geometry, t: &ModifiedTensions, k: &SampledKernel, n: usize) -> f64 {
    let grid = geometry.grid();
    let w = grid.cell_volume();
    let om = geometry.omega_mask();
    let phases = [u.field().clone(), om.zip_map(u.field(), |a, b| a - b).expect("same grid"), geometry.substrate_mask().clone()];
    let pairs: [(usize, usize, &ScalarField); 3] = [(0, 1, &t.pv), (0, 2, &t.sp), (1, 2, &t.sv)];
    // Kernel offsets carrying all but a 1e-15 fraction of the mass.
    let kv = k.values();
    let kmax = kv.max();
    let shifts: Vec<(usize, f64)> = (0..grid.len()).filter(|&s| kv.get(s) > 1e-15 * kmax).map(|s| (s, kv.get(s))).collect();
    let mut total = 0.0;
    for &(a, b, gamma) in &pairs {
        if gamma.max() == gamma.min() {
            continue;
        }
        for (i, j) in [(a, b), (b, a)] {
            let (ui, uj) = (&phases[i], &phases[j]);
            let support: Vec<[usize; 3]> = (0..grid.len()).filter(|&x| ui.get(x) != 0.0).map(|x| grid.multi(x)).collect();
            if support.is_empty() || uj.max() == 0.0 {
                continue;
            }
            let dim = grid.dim();
            let size = grid.n();
            let strides = [grid.stride(0), grid.stride(1), grid.stride(2)];
            let lin = |p: &[usize; 3]| (0..dim).map(|a| p[a] * strides[a]).sum::<usize>();
            let per_shift: Vec<f64> = shifts
                .par_iter()
                .map(|&(s, ks)| {
                    // Offsets reduced to [0, n) so that wrapping is one subtraction.
                    let up = grid.multi(s);
                    let down: Vec<usize> = (0..3).map(|a| if a < dim { (size - up[a]) % size } else { 0 }).collect();
                    let mut acc = 0.0;
                    for p in &support {
                        let mut q = [0usize; 3];
                        for a in 0..dim {
                            q[a] = p[a] + down[a];
                            if q[a] >= size {
                                q[a] -= size;
                            }
                        }
                        let x = lin(p);
                        let v = ui.get(x) * uj.get(lin(&q));
                        if v == 0.0 {
                            continue;
                        }
                        let g0 = gamma.get(x);
                        let mut diff = 0.0;
                        let mut z = *p;
                        for _ in 1..n {
                            for a in 0..dim {
                                z[a] += up[a];
                                if z[a] >= size {
                                    z[a] -= size;
                                }
                            }
                            diff += (g0 - gamma.get(lin(&z))).abs();
                        }
                        acc += v * diff;
                    }
                    w * ks * w * acc
                })
                .collect();
            total += deterministic_sum(&per_shift);
        }
    }
    total / (n as f64 * k.h().sqrt())
}

/// One inequality of the compactness toolkit evaluated discretely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl InequalityCheck {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }

    /// `lhs <= rhs (1 + 1e-8)`, with the absolute floor `1e-8 * scale`.
    pub fn holds(&self, scale: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-8) + 1e-8 * scale
    }
}

/// Both sides of the four auxiliary inequalities for one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalitySuite {
    pub h: f64,
    /// Shift integral against `K_h` bounded by the interaction energy.
    pub shift_by_energy: InequalityCheck,
    /// `int |K_h * v - v| <= int K_h(y) int |v(x+y) - v(x)|`.
    pub smoothing_by_shift: InequalityCheck,
    /// `int v (1 - v) <= int (1 - v) K_h * v + int |K_h * v - v|`.
    pub defect: InequalityCheck,
    /// `int |grad (J_h * v)| <= (c / sqrt h) int J_4h(y) int |v(x+y) - v(x)|`.
    pub gradient: InequalityCheck,
    /// Constant `c` used in the gradient bound.
    pub gradient_constant: f64,
    /// Normalization for the absolute tolerance: `|Omega| / sqrt h`.
    pub scale: f64,
}

impl InequalitySuite {
    pub fn checks(&self) -> [(&'static str, InequalityCheck); 4] {
        [
            ("shift_by_energy", self.shift_by_energy),
            ("smoothing_by_shift", self.smoothing_by_shift),
            ("defect", self.defect),
            ("gradient", self.gradient),
        ]
    }

    pub fn all_hold(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.holds(self.scale))
    }

    pub fn report(&self) -> Report {
        let mut r = Report::new("inequalities");
        for (name, c) in self.checks() {
            r.check(name, c.holds(self.scale), c.slack(), &format!("lhs = {:.6e}, rhs = {:.6e}, h = {:e}", c.lhs, c.rhs, self.h));
        }
        r
    }
}

/// `D(s) = sum_{x in Omega} dx^d |v(x + s) - v(x)|` for every offset `s`, with
/// `v = 0` outside the container.
pub fn shift_differences(v: &PhaseField, geometry: &Geometry) -> ScalarField {
    let grid = geometry.grid();
    let w = grid.cell_volume();
    let omega = geometry.omega_cells();
    let vals = v.field();
    let out: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|s| {
            let off = grid.signed_offset(s);
            let mut acc = 0.0;
            for &x in &omega {
                acc += (vals.get(grid.shifted(x, off)) - vals.get(x)).abs();
            }
            w * acc
        })
        .collect();
    ScalarField::from_values(grid, out).expect("sizes match")
}

/// Radius of the triangular kernel used for the gradient inequality.
pub const GRADIENT_KERNEL_RADIUS: f64 = 1.0;

/// Evaluates the four auxiliary inequalities for `v` at `h`. `kernel` is
/// sampled and rescaled to unit discrete mass (Jensen's inequality needs it);
/// the gradient inequality uses the triangular kernel of radius
/// [`GRADIENT_KERNEL_RADIUS`], for which `|grad J_h| <= (c / sqrt h) J_4h`
/// holds pointwise with `c = 2^(d+1) / radius`.
pub fn inequality_suite(v: &PhaseField, geometry: &Geometry, kernel: &Kernel, h: f64) -> Result<InequalitySuite, EnergyError> {
    let d = shift_differences(v, geometry);
    inequality_suite_with(v, geometry, kernel, h, &d)
}

/// [`inequality_suite`] with precomputed [`shift_differences`].
pub fn inequality_suite_with(
    v: &PhaseField,
    geometry: &Geometry,
    kernel: &Kernel,
    h: f64,
    shifts: &ScalarField,
) -> Result<InequalitySuite, EnergyError> {
    let grid = geometry.grid();
    let dim = grid.dim();
    let w = grid.cell_volume();
    let om = geometry.omega_mask();
    let vf = v.field();
    let k = scale(kernel, grid, h)?.normalized();
    let (kv, ks) = k.convolve_pair(vf, geometry.substrate_mask())?;
    let over_omega = |f: &(dyn Fn(usize) -> f64 + Sync)| w * deterministic_sum_by(grid.len(), |i| if om.get(i) > 0.5 { f(i) } else { 0.0 });
    let weighted_shift = |kern: &ScalarField| w * deterministic_sum_by(grid.len(), |s| kern.get(s) * shifts.get(s));

    let shift_k = weighted_shift(k.values());
    let interaction = over_omega(&|i| (1.0 - vf.get(i)) * kv.get(i));
    let substrate = over_omega(&|i| vf.get(i) * ks.get(i));
    let smoothing = over_omega(&|i| (kv.get(i) - vf.get(i)).abs());
    let defect = over_omega(&|i| vf.get(i) * (1.0 - vf.get(i)));

    let tri = Kernel::new(&KernelSpec::Triangular { radius: GRADIENT_KERNEL_RADIUS }, dim)?;
    let jh = scale(&tri, grid, h)?;
    let j4h = scale(&tri, grid, 4.0 * h)?;
    let mut grad_sq = vec![0.0; grid.len()];
    for g in jh.gradient_samples() {
        let gv = Convolver::new(&g).apply(vf)?;
        for (acc, x) in grad_sq.iter_mut().zip(gv.values()) {
            *acc += x * x;
        }
    }
    let grad_lhs = over_omega(&|i| grad_sq[i].sqrt());
    let c = 2f64.powi(dim as i32 + 1) / GRADIENT_KERNEL_RADIUS;
    let grad_rhs = c / h.sqrt() * weighted_shift(j4h.values());

    Ok(InequalitySuite {
        h,
        shift_by_energy: InequalityCheck { lhs: shift_k, rhs: 2.0 * interaction + substrate },
        smoothing_by_shift: InequalityCheck { lhs: smoothing, rhs: shift_k },
        defect: InequalityCheck { lhs: defect, rhs: interaction + smoothing },
        gradient: InequalityCheck { lhs: grad_lhs, rhs: grad_rhs },
        gradient_constant: c,
        scale: geometry.omega_measure() / h.sqrt(),
    })
}
