//! Extension of the surface tensions to the whole torus so that one kernel
//! serves all three interfaces.
//!
//! `gamma_PV` is extended harmonically outside the container. The substrate
//! tensions are divided by `gamma(nu)` on the boundary and blended into a
//! constant far field through harmonic strip problems on both sides of the
//! boundary.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anisotropy::Anisotropy;
use crate::expr::{Expr, ExprError};
use crate::geometry::{Geometry, Side};
use crate::grid::{deterministic_sum_by, GridError, ScalarField, TorusGrid};
use crate::report::Report;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensionError {
    #[error("tension expression {field}: {source}")]
    Expr { field: &'static str, source: ExprError },
    #[error("Laplace domain is empty")]
    EmptyDomain,
    #[error("{components} domain component(s) touch no Dirichlet cell")]
    Isolated { components: usize },
    #[error("Laplace solver stopped after {iterations} iterations with residual {residual:.3e} (target {target:.3e})")]
    NotConverged { iterations: usize, residual: f64, target: f64 },
    #[error("raw tensions invalid: {0}")]
    InvalidRaw(String),
    #[error("strip triangle inequalities fail at {count} cells after {halvings} halvings of delta (last delta {delta:.4e}); first cells {cells:?}")]
    StripTriangle { count: usize, halvings: usize, delta: f64, cells: Vec<usize> },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Tension expressions as given in a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensionSpec {
    pub pv: String,
    pub sp: String,
    pub sv: String,
}

/// Physical tensions: `gamma_PV` on the closed container, `gamma_SP`, `gamma_SV`
/// on the substrate boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensions {
    pub pv: Expr,
    pub sp: Expr,
    pub sv: Expr,
}

impl RawTensions {
    pub fn parse(spec: &TensionSpec) -> Result<Self, TensionError> {
        let p = |field: &'static str, s: &str| Expr::parse(s).map_err(|source| TensionError::Expr { field, source });
        Ok(Self { pv: p("pv", &spec.pv)?, sp: p("sp", &spec.sp)?, sv: p("sv", &spec.sv)? })
    }

    pub fn constant(pv: f64, sp: f64, sv: f64) -> Self {
        Self { pv: Expr::constant(pv), sp: Expr::constant(sp), sv: Expr::constant(sv) }
    }

    pub fn spec(&self) -> TensionSpec {
        TensionSpec { pv: self.pv.to_string(), sp: self.sp.to_string(), sv: self.sv.to_string() }
    }

    /// Checks positivity, the bounds `c_s <= gamma_SP, gamma_SV <= C_s` and the
    /// strict triangle inequalities on boundary samples (projections of the
    /// cells next to the boundary).
    pub fn validate(&self, geometry: &Geometry, gamma: &Anisotropy) -> Report {
        let mut report = Report::new("raw_tensions");
        let grid = geometry.grid();
        let pv_min = geometry.omega_cells().iter().map(|&c| self.pv.eval(&grid.center(c))).fold(f64::INFINITY, f64::min);
        report.check("pv_positive", pv_min > 0.0, pv_min, "min gamma_PV over container cells");
        if !geometry.has_substrate() {
            return report;
        }
        let samples = boundary_samples(geometry);
        let (cg, big_cg) = (gamma.lower_bound(), gamma.upper_bound());
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut slack = [f64::INFINITY; 3];
        for x in &samples {
            let (pv, sp, sv) = (self.pv.eval(x), self.sp.eval(x), self.sv.eval(x));
            lo = lo.min(sp.min(sv));
            hi = hi.max(sp.max(sv));
            slack[0] = slack[0].min(sp + sv - big_cg * pv);
            slack[1] = slack[1].min(cg * pv + sv - sp);
            slack[2] = slack[2].min(cg * pv + sp - sv);
        }
        report.check("substrate_bounds", lo > 0.0 && !samples.is_empty(), lo, &format!("c_s = {lo:.6}, C_s = {hi:.6}"));
        report.check("triangle_pv", slack[0] > 0.0, slack[0], "min of gamma_SP + gamma_SV - C_gamma gamma_PV");
        report.check("triangle_sp", slack[1] > 0.0, slack[1], "min of c_gamma gamma_PV + gamma_SV - gamma_SP");
        report.check("triangle_sv", slack[2] > 0.0, slack[2], "min of c_gamma gamma_PV + gamma_SP - gamma_SV");
        report
    }
}

/// Boundary points: projections onto the boundary of the cells within one
/// spacing of it.
pub fn boundary_samples(geometry: &Geometry) -> Vec<crate::grid::Point> {
    let grid = geometry.grid();
    let sd = geometry.signed_distance();
    (0..grid.len())
        .filter(|&c| sd.get(c).abs() < grid.spacing())
        .map(|c| geometry.project(grid.center(c)))
        .collect()
}

/// Extended tensions on the whole torus.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedTensions {
    pub pv: ScalarField,
    pub sp: ScalarField,
    pub sv: ScalarField,
    /// Lower bound `c~`.
    pub lower: f64,
    /// Upper bound `C~`.
    pub upper: f64,
    /// Strip width used by the construction.
    pub delta: f64,
}

impl ModifiedTensions {
    /// Spatially constant tensions with their own bounds.
    pub fn constant(grid: TorusGrid, pv: f64, sp: f64, sv: f64) -> Self {
        Self {
            pv: ScalarField::constant(grid, pv),
            sp: ScalarField::constant(grid, sp),
            sv: ScalarField::constant(grid, sv),
            lower: pv.min(sp).min(sv),
            upper: pv.max(sp).max(sv),
            delta: 0.0,
        }
    }

    pub fn from_fields(pv: ScalarField, sp: ScalarField, sv: ScalarField) -> Result<Self, TensionError> {
        pv.check_same(&sp)?;
        pv.check_same(&sv)?;
        let lower = pv.min().min(sp.min()).min(sv.min());
        let upper = pv.max().max(sp.max()).max(sv.max());
        Ok(Self { pv, sp, sv, lower, upper, delta: 0.0 })
    }

    pub fn grid(&self) -> TorusGrid {
        self.pv.grid()
    }

    /// Every field constant over the torus.
    pub fn is_constant(&self) -> bool {
        [&self.pv, &self.sp, &self.sv].iter().all(|f| f.max() == f.min())
    }

    /// Checks the bounds `lower <= gamma~ <= upper` cellwise.
    pub fn bounds_hold(&self) -> bool {
        [&self.pv, &self.sp, &self.sv].iter().all(|f| f.min() >= self.lower && f.max() <= self.upper)
    }
}

/// Result of the cellwise triangle check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleReport {
    /// Minimum over cells of `sp + sv - pv`, `pv + sv - sp`, `pv + sp - sv`.
    pub slack: [f64; 3],
    pub worst_slack: f64,
    /// `(cell, inequality index)` for every violation.
    pub violations: Vec<(usize, usize)>,
}

impl TriangleReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn verify_triangle(t: &ModifiedTensions) -> TriangleReport {
    let mut slack = [f64::INFINITY; 3];
    let mut violations = Vec::new();
    for c in 0..t.grid().len() {
        let (pv, sp, sv) = (t.pv.get(c), t.sp.get(c), t.sv.get(c));
        let s = [sp + sv - pv, pv + sv - sp, pv + sp - sv];
        for k in 0..3 {
            slack[k] = slack[k].min(s[k]);
            if s[k] < 0.0 {
                violations.push((c, k));
            }
        }
    }
    let worst_slack = slack.iter().copied().fold(f64::INFINITY, f64::min);
    TriangleReport { slack, worst_slack, violations }
}

/// Output of a Laplace solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceSolution {
    pub field: ScalarField,
    pub iterations: usize,
    pub residual: f64,
}

/// Relative residual target of [`laplace_solve`], stricter than `1e-10`.
pub const LAPLACE_TOLERANCE: f64 = 1e-12;

/// Solves the discrete Laplace equation on the cells where `domain > 0.5`,
/// reading Dirichlet values from `dirichlet` at neighbouring non-domain cells.
///
/// The operator is the `2d+1`-point stencil `2d u_i - sum_nb u_nb`; the
/// residual is measured in these unscaled units, relative to the data range
/// and floored at `1e-14` times the data magnitude.
pub fn laplace_solve(domain: &ScalarField, dirichlet: &ScalarField) -> Result<LaplaceSolution, TensionError> {
    domain.check_same(dirichlet)?;
    let grid = domain.grid();
    let dim = grid.dim();
    let cells: Vec<usize> = (0..grid.len()).filter(|&c| domain.get(c) > 0.5).collect();
    if cells.is_empty() {
        return Err(TensionError::EmptyDomain);
    }
    let mut local = vec![u32::MAX; grid.len()];
    for (i, &c) in cells.iter().enumerate() {
        local[c] = i as u32;
    }
    let m = cells.len();
    // Neighbours in local numbering (u32::MAX for Dirichlet) and boundary sums.
    let mut nbrs = vec![[u32::MAX; 6]; m];
    let mut rhs = vec![0.0; m];
    let mut touches = vec![false; m];
    let (mut dmin, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &c) in cells.iter().enumerate() {
        let mut k = 0;
        for axis in 0..dim {
            for off in [-1isize, 1] {
                let nb = grid.neighbor(c, axis, off);
                if local[nb] != u32::MAX {
                    nbrs[i][k] = local[nb];
                } else {
                    let v = dirichlet.get(nb);
                    rhs[i] += v;
                    touches[i] = true;
                    dmin = dmin.min(v);
                    dmax = dmax.max(v);
                }
                k += 1;
            }
        }
    }
    let isolated = isolated_components(&nbrs, &touches, 2 * dim);
    if isolated > 0 {
        return Err(TensionError::Isolated { components: isolated });
    }
    let mut out = dirichlet.clone();
    let range = dmax - dmin;
    if range == 0.0 {
        for &c in &cells {
            out.set(c, dmin);
        }
        return Ok(LaplaceSolution { field: out, iterations: 0, residual: 0.0 });
    }
    let diag = 2.0 * dim as f64;
    let deg = 2 * dim;
    let apply = |x: &[f64], y: &mut [f64]| {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut s = diag * x[i];
            for &j in &nbrs[i][..deg] {
                if j != u32::MAX {
                    s -= x[j as usize];
                }
            }
            *yi = s;
        });
    };
    let dotp = |a: &[f64], b: &[f64]| deterministic_sum_by(a.len(), |i| a[i] * b[i]);
    let inf_norm = |a: &[f64]| a.par_iter().map(|v| v.abs()).reduce(|| 0.0, f64::max);
    // Floor at rounding level so nearly constant data still terminates.
    let scale = dmin.abs().max(dmax.abs());
    let target = (LAPLACE_TOLERANCE * range).max(1e-14 * scale);
    let mean = 0.5 * (dmin + dmax);
    let mut x = vec![mean; m];
    let mut ax = vec![0.0; m];
    let mut r = vec![0.0; m];
    let mut p = vec![0.0; m];
    let mut ap = vec![0.0; m];
    let cap = 20 * m + 1000;
    let mut iterations = 0;
    let restart = 500;
    loop {
        // True residual at every restart.
        apply(&x, &mut ax);
        r.par_iter_mut().enumerate().for_each(|(i, ri)| *ri = rhs[i] - ax[i]);
        let mut res = inf_norm(&r);
        if res < target {
            for (i, &c) in cells.iter().enumerate() {
                out.set(c, x[i]);
            }
            return Ok(LaplaceSolution { field: out, iterations, residual: res / range });
        }
        if iterations >= cap {
            return Err(TensionError::NotConverged { iterations, residual: res / range, target: target / range });
        }
        p.copy_from_slice(&r);
        let mut rr = dotp(&r, &r);
        for _ in 0..restart {
            apply(&p, &mut ap);
            let alpha = rr / dotp(&p, &ap);
            x.par_iter_mut().zip(p.par_iter()).for_each(|(xi, pi)| *xi += alpha * pi);
            r.par_iter_mut().zip(ap.par_iter()).for_each(|(ri, api)| *ri -= alpha * api);
            iterations += 1;
            res = inf_norm(&r);
            if res < 0.1 * target || iterations >= cap {
                break;
            }
            let rr_new = dotp(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            p.par_iter_mut().zip(r.par_iter()).for_each(|(pi, ri)| *pi = ri + beta * *pi);
        }
    }
}

fn isolated_components(nbrs: &[[u32; 6]], touches: &[bool], deg: usize) -> usize {
    let m = nbrs.len();
    let mut seen = vec![false; m];
    let mut isolated = 0;
    let mut stack = Vec::new();
    for start in 0..m {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut ok = false;
        while let Some(i) = stack.pop() {
            ok |= touches[i];
            for &j in &nbrs[i][..deg] {
                if j != u32::MAX && !seen[j as usize] {
                    seen[j as usize] = true;
                    stack.push(j as usize);
                }
            }
        }
        if !ok {
            isolated += 1;
        }
    }
    isolated
}

/// Harmonic extension of `gamma_PV` outside the container, with the seam layer
/// pinned to the minimum boundary value. Returns the field together with the
/// minimum and maximum over the boundary data.
pub fn extend_pv(raw: &RawTensions, geometry: &Geometry) -> Result<(ScalarField, f64, f64), TensionError> {
    let grid = geometry.grid();
    let mut field = ScalarField::zeros(grid);
    for c in 0..grid.len() {
        if geometry.in_omega(c) {
            field.set(c, raw.pv.eval(&grid.center(c)));
        }
    }
    if !geometry.has_substrate() {
        return Ok((field.clone(), field.min(), field.max()));
    }
    // Discrete boundary data: container cells adjacent to the exterior.
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in 0..grid.len() {
        if geometry.in_omega(c) && (0..grid.dim()).any(|a| [-1, 1].iter().any(|&o| !geometry.in_omega(grid.neighbor(c, a, o)))) {
            lo = lo.min(field.get(c));
            hi = hi.max(field.get(c));
        }
    }
    let mut domain = ScalarField::zeros(grid);
    for c in 0..grid.len() {
        if !geometry.in_omega(c) {
            if geometry.is_seam(c) {
                field.set(c, lo);
            } else {
                domain.set(c, 1.0);
            }
        }
    }
    let sol = laplace_solve(&domain, &field)?;
    info!("gamma_PV extension: {} CG iterations, residual {:.2e}", sol.iterations, sol.residual);
    Ok((sol.field, lo, hi))
}

/// Diagnostics of the substrate construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub tensions: ModifiedTensions,
    pub halvings: usize,
    /// Minimum slack of the strict strip inequalities.
    pub strip_slack: f64,
    /// Minimum and maximum of `gamma_PV` over the boundary data.
    pub pv_range: (f64, f64),
}

/// Deviation of the extended substrate tensions from `gamma_S / gamma(nu)` at
/// cells within one spacing of the boundary, with the discrete Lipschitz
/// constants of the extended fields for scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDeviation {
    pub sp: f64,
    pub sv: f64,
    pub lipschitz_sp: f64,
    pub lipschitz_sv: f64,
    pub cells: usize,
}

impl BoundaryDeviation {
    /// Both deviations are within `factor` spacings times the Lipschitz constant.
    pub fn within(&self, factor: f64, spacing: f64) -> bool {
        let fits = |dev: f64, lip: f64| dev <= factor * spacing * lip || dev <= 1e-12;
        fits(self.sp, self.lipschitz_sp) && fits(self.sv, self.lipschitz_sv)
    }
}

pub fn boundary_deviation(t: &ModifiedTensions, raw: &RawTensions, geometry: &Geometry, gamma: &Anisotropy) -> BoundaryDeviation {
    let grid = geometry.grid();
    let sd = geometry.signed_distance();
    let (mut sp, mut sv, mut cells) = (0.0f64, 0.0f64, 0);
    for c in 0..grid.len() {
        if sd.get(c).abs() < grid.spacing() {
            let p = geometry.project(grid.center(c));
            let g = gamma.eval(&geometry.normal_at(p));
            sp = sp.max((t.sp.get(c) - raw.sp.eval(&p) / g).abs());
            sv = sv.max((t.sv.get(c) - raw.sv.eval(&p) / g).abs());
            cells += 1;
        }
    }
    BoundaryDeviation { sp, sv, lipschitz_sp: t.sp.discrete_lipschitz(), lipschitz_sv: t.sv.discrete_lipschitz(), cells }
}

/// Builds all three extended tensions.
pub fn construct(raw: &RawTensions, geometry: &Geometry, gamma: &Anisotropy) -> Result<Construction, TensionError> {
    let (pv, lo, hi) = extend_pv(raw, geometry)?;
    extend_substrate(raw, geometry, gamma, pv, (lo, hi))
}

/// Substrate tensions from the six strip problems, retrying with halved
/// `delta` while the strict strip inequalities fail.
pub fn extend_substrate(
    raw: &RawTensions,
    geometry: &Geometry,
    gamma: &Anisotropy,
    pv: ScalarField,
    pv_range: (f64, f64),
) -> Result<Construction, TensionError> {
    let grid = geometry.grid();
    let (cg, big_cg) = (gamma.lower_bound(), gamma.upper_bound());
    let far = big_cg * pv_range.1 / (2.0 * cg);
    if !geometry.has_substrate() {
        let mut t = ModifiedTensions::from_fields(pv, ScalarField::constant(grid, far), ScalarField::constant(grid, far))?;
        t.delta = 0.0;
        return Ok(Construction { tensions: t, halvings: 0, strip_slack: f64::INFINITY, pv_range });
    }
    let half = 0.5 * big_cg * pv_range.1;
    let sd = geometry.signed_distance();
    // Boundary data at the projection of every cell near the boundary.
    let band = geometry.delta() + 2.0 * grid.spacing();
    let mut gamma_nu = ScalarField::constant(grid, f64::NAN);
    let mut sp_b = ScalarField::constant(grid, f64::NAN);
    let mut sv_b = ScalarField::constant(grid, f64::NAN);
    for c in 0..grid.len() {
        if sd.get(c).abs() < band {
            let p = geometry.project(grid.center(c));
            let nu = geometry.normal_at(p);
            gamma_nu.set(c, gamma.eval(&nu));
            sp_b.set(c, raw.sp.eval(&p));
            sv_b.set(c, raw.sv.eval(&p));
        }
    }

    let mut data = (half, half);
    for f in [&sp_b, &sv_b] {
        for &v in f.values().iter().filter(|v| !v.is_nan()) {
            data = (data.0.min(v), data.1.max(v));
        }
    }

    let mut delta = geometry.delta();
    for halvings in 0..=4 {
        let mut sp = ScalarField::constant(grid, far);
        let mut sv = ScalarField::constant(grid, far);
        let mut violations = Vec::new();
        let mut strip_slack = f64::INFINITY;
        // Cells exactly on the boundary take the ratio directly.
        for c in 0..grid.len() {
            if sd.get(c) == 0.0 {
                sp.set(c, sp_b.get(c) / gamma_nu.get(c));
                sv.set(c, sv_b.get(c) / gamma_nu.get(c));
            }
        }
        for side in [Side::Inner, Side::Outer] {
            let domain = geometry.band_mask_width(side, delta);
            if domain.sum() == 0.0 {
                continue;
            }
            let s = side.sign();
            // Dirichlet layers: boundary data across the boundary, constants beyond the strip.
            let layer = |boundary: &ScalarField, outer: f64| {
                let mut f = ScalarField::constant(grid, outer);
                for c in 0..grid.len() {
                    if s * sd.get(c) <= 0.0 && sd.get(c).abs() < band {
                        f.set(c, boundary.get(c));
                    }
                }
                f
            };
            let g_delta = laplace_solve(&domain, &layer(&gamma_nu, cg))?.field;
            let g_sp = laplace_solve(&domain, &layer(&sp_b, half))?.field;
            let g_sv = laplace_solve(&domain, &layer(&sv_b, half))?.field;
            for c in 0..grid.len() {
                if domain.get(c) > 0.5 {
                    let (a, b, p) = (g_sp.get(c), g_sv.get(c), pv.get(c));
                    let slack = (a + b - big_cg * p).min(cg * p + b - a).min(cg * p + a - b);
                    strip_slack = strip_slack.min(slack);
                    if slack <= 0.0 {
                        violations.push(c);
                    }
                    sp.set(c, a / g_delta.get(c));
                    sv.set(c, b / g_delta.get(c));
                }
            }
        }
        if violations.is_empty() {
            let t = bounded(pv, sp, sv, delta, data, (cg, big_cg), far);
            return Ok(Construction { tensions: t, halvings, strip_slack, pv_range });
        }
        if halvings == 4 {
            return Err(TensionError::StripTriangle {
                count: violations.len(),
                halvings,
                delta,
                cells: violations.into_iter().take(10).collect(),
            });
        }
        warn!("strip triangle inequalities fail at {} cells; halving delta {delta:.4e}", violations.len());
        delta *= 0.5;
    }
    unreachable!()
}

/// Bounds from the data: strip values are ratios of harmonic functions, so they
/// lie between the extreme data over the extreme values of `gamma(nu)`.
fn bounded(pv: ScalarField, sp: ScalarField, sv: ScalarField, delta: f64, data: (f64, f64), gamma: (f64, f64), far: f64) -> ModifiedTensions {
    let lower = (data.0 / gamma.1).min(far).min(pv.min());
    let upper = (data.1 / gamma.0).max(far).max(pv.max());
    ModifiedTensions { pv, sp, sv, lower, upper, delta }
}
