//! Thresholding scheme for the particle on the substrate: threshold the first
//! variation of `E_h`, optionally shifting the level to keep the volume.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{EnergyError, EnergyModel, PhaseField};
use crate::geometry::{Geometry, Shape};
use crate::grid::{deterministic_sum_by, ScalarField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("target volume {target} needs {needed} cells but the container has {available}")]
    VolumeUnrepresentable { target: f64, needed: usize, available: usize },
    #[error("invalid scheme configuration: {0}")]
    Config(String),
    #[error("contact angle: {0}")]
    Contact(String),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub h: f64,
    /// Target volume `m`; `None` keeps the initial volume.
    #[serde(default)]
    pub target_volume: Option<f64>,
    #[serde(default = "default_true")]
    pub preserve_volume: bool,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Consecutive unchanged steps that count as stationary.
    #[serde(default = "default_window")]
    pub stationarity_window: usize,
    /// Steps between stored snapshots; 0 stores none.
    #[serde(default)]
    pub snapshot_every: usize,
    /// Stop on stationarity or a 2-cycle; otherwise always run `max_steps`.
    #[serde(default = "default_true")]
    pub stop_early: bool,
}

fn default_true() -> bool {
    true
}

fn default_max_steps() -> usize {
    500
}

fn default_window() -> usize {
    3
}

impl SchemeConfig {
    pub fn new(h: f64) -> Self {
        Self { h, target_volume: None, preserve_volume: true, max_steps: 500, stationarity_window: 3, snapshot_every: 0, stop_early: true }
    }
}

/// Threshold level and the number of container cells it selects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub level: f64,
    pub count: usize,
}

/// Order-statistic level selecting `ceil(m / dx^d)` container cells.
pub fn volume_threshold(phi: &ScalarField, geometry: &Geometry, m: f64) -> Result<Threshold, SchemeError> {
    let cells = geometry.omega_cells();
    let w = geometry.grid().cell_volume();
    // Guard against m being a rounded multiple of the cell volume.
    let needed = ((m / w) - 1e-9).ceil().max(0.0) as usize;
    if needed > cells.len() {
        return Err(SchemeError::VolumeUnrepresentable { target: m, needed, available: cells.len() });
    }
    if needed == cells.len() {
        return Ok(Threshold { level: f64::INFINITY, count: needed });
    }
    if needed == 0 {
        return Ok(Threshold { level: f64::NEG_INFINITY, count: 0 });
    }
    let mut values: Vec<f64> = cells.iter().map(|&c| phi.get(c)).collect();
    let (_, kth, _) = values.select_nth_unstable_by(needed - 1, |a, b| a.total_cmp(b));
    Ok(Threshold { level: *kth, count: needed })
}

/// `u = 1` on `{phi < level}` inside the container.
pub fn threshold(phi: &ScalarField, level: f64, geometry: &Geometry) -> PhaseField {
    let grid = geometry.grid();
    let mut u = ScalarField::zeros(grid);
    for c in 0..grid.len() {
        if geometry.in_omega(c) && (phi.get(c) < level || level == f64::INFINITY) {
            u.set(c, 1.0);
        }
    }
    PhaseField::new(u, geometry).expect("thresholded field is a valid phase")
}

/// Selects exactly `t.count` cells: all with `phi < level`, then cells with
/// `phi == level` in ascending cell order.
pub fn threshold_exact(phi: &ScalarField, t: Threshold, geometry: &Geometry) -> PhaseField {
    if t.level == f64::INFINITY {
        return threshold(phi, f64::INFINITY, geometry);
    }
    let mut u = threshold(phi, t.level, geometry).into_field();
    let mut count = u.sum() as usize;
    for c in 0..u.grid().len() {
        if count >= t.count {
            break;
        }
        if geometry.in_omega(c) && phi.get(c) == t.level {
            u.set(c, 1.0);
            count += 1;
        }
    }
    PhaseField::new(u, geometry).expect("thresholded field is a valid phase")
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub energy: f64,
    pub volume: f64,
    pub interface_cells: usize,
    pub lambda: f64,
    /// `int_Omega w (1 - w)` for the convolved iterate `w = K_h * u` before thresholding.
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub step: usize,
    pub u: PhaseField,
    /// Comparison field that produced `u` (zero before the first step).
    pub phi: ScalarField,
    pub lambda: f64,
    pub diagnostics: StepDiagnostics,
}

impl SchemeState {
    pub fn initial(u: PhaseField, model: &EnergyModel) -> Result<Self, SchemeError> {
        let energy = model.energy(&u)?;
        let diagnostics = StepDiagnostics {
            step: 0,
            energy,
            volume: u.volume(),
            interface_cells: interface_cells(&u, model.geometry()),
            lambda: 0.0,
            defect: 0.0,
        };
        Ok(Self { step: 0, phi: ScalarField::zeros(u.grid()), u, lambda: 0.0, diagnostics })
    }

    /// `phi - lambda`, negative inside the particle.
    pub fn level_field(&self) -> ScalarField {
        let l = if self.lambda.is_finite() { self.lambda } else { 0.0 };
        self.phi.map(|v| v - l)
    }
}

/// Cells of the particle with a 4-neighbour (6 in 3D) outside it inside the container.
pub fn interface_cells(u: &PhaseField, geometry: &Geometry) -> usize {
    let grid = geometry.grid();
    (0..grid.len())
        .filter(|&c| {
            u.get(c) == 1.0
                && (0..grid.dim()).any(|a| {
                    [-1, 1].iter().any(|&o| {
                        let nb = grid.neighbor(c, a, o);
                        geometry.in_omega(nb) && u.get(nb) == 0.0
                    })
                })
        })
        .count()
}

/// One convolution-thresholding step.
pub fn step(state: &SchemeState, config: &SchemeConfig, model: &EnergyModel, target: f64) -> Result<SchemeState, SchemeError> {
    let geometry = model.geometry();
    let (phi, ku) = model.comparison_with_convolution(&state.u)?;
    let (u, lambda) = if config.preserve_volume {
        let t = volume_threshold(&phi, geometry, target)?;
        (threshold_exact(&phi, t, geometry), t.level)
    } else {
        (threshold(&phi, 0.0, geometry), 0.0)
    };
    let om = geometry.omega_mask();
    let w = geometry.grid().cell_volume();
    let defect = w * deterministic_sum_by(ku.values().len(), |i| {
        let v = ku.get(i);
        if om.get(i) > 0.5 {
            v * (1.0 - v)
        } else {
            0.0
        }
    });
    let diagnostics = StepDiagnostics {
        step: state.step + 1,
        energy: model.energy(&u)?,
        volume: u.volume(),
        interface_cells: interface_cells(&u, geometry),
        lambda,
        defect,
    };
    Ok(SchemeState { step: state.step + 1, u, phi, lambda, diagnostics })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Stationary,
    MaxSteps,
    /// `u^{k+1} = u^{k-1} != u^k`; the run stops with both states kept.
    Oscillation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub status: RunStatus,
    pub diagnostics: Vec<StepDiagnostics>,
    pub final_state: SchemeState,
    /// The other state of a detected 2-cycle.
    pub cycle_partner: Option<SchemeState>,
    pub snapshots: Vec<(usize, PhaseField)>,
    pub target_volume: f64,
    /// Without volume preservation: every step satisfies
    /// `E(u^{k+1}) <= E(u^k) + 1e-8 E(u^0)`.
    pub energy_monotone: bool,
}

/// Iterates [`step`] until stationarity, a 2-cycle, or `max_steps`.
pub fn run(initial: PhaseField, config: &SchemeConfig, model: &EnergyModel) -> Result<Trajectory, SchemeError> {
    if !(config.h > 0.0) || (config.h - model.h()).abs() > 1e-15 * config.h {
        return Err(SchemeError::Config(format!("scheme h = {} differs from kernel h = {}", config.h, model.h())));
    }
    if config.stationarity_window == 0 {
        return Err(SchemeError::Config("stationarity window must be at least 1".into()));
    }
    let geometry = model.geometry();
    let target = config.target_volume.unwrap_or_else(|| initial.volume());
    if config.preserve_volume && !(target > 0.0 && target < geometry.omega_measure()) {
        return Err(SchemeError::Config(format!("target volume {target} must lie strictly between 0 and |Omega|")));
    }
    let mut state = SchemeState::initial(initial, model)?;
    let e0 = state.diagnostics.energy;
    let mut diagnostics = vec![state.diagnostics];
    let mut snapshots = Vec::new();
    if config.snapshot_every > 0 {
        snapshots.push((0, state.u.clone()));
    }
    let mut unchanged = 0;
    let mut energy_monotone = true;
    let mut history: VecDeque<SchemeState> = VecDeque::with_capacity(2);
    let mut status = RunStatus::MaxSteps;
    let mut partner = None;
    for _ in 0..config.max_steps {
        let next = step(&state, config, model, target)?;
        if !config.preserve_volume && next.diagnostics.energy > state.diagnostics.energy + 1e-8 * e0.abs() {
            energy_monotone = false;
        }
        diagnostics.push(next.diagnostics);
        if config.snapshot_every > 0 && next.step % config.snapshot_every == 0 {
            snapshots.push((next.step, next.u.clone()));
        }
        let same = next.u == state.u;
        let cycle = !same && history.back().is_some_and(|prev| prev.u == next.u);
        if history.len() == 2 {
            history.pop_front();
        }
        history.push_back(state);
        state = next;
        if !config.stop_early {
            continue;
        }
        if same {
            unchanged += 1;
            if unchanged >= config.stationarity_window {
                status = RunStatus::Stationary;
                break;
            }
        } else {
            unchanged = 0;
        }
        if cycle {
            status = RunStatus::Oscillation;
            partner = history.pop_back();
            break;
        }
    }
    Ok(Trajectory { status, diagnostics, final_state: state, cycle_partner: partner, snapshots, target_volume: target, energy_monotone })
}

/// Interior contact angles (degrees) at the left and right contact points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactAngles {
    pub left: f64,
    pub right: f64,
    pub left_point: [f64; 2],
    pub right_point: [f64; 2],
}

impl ContactAngles {
    pub fn mean(&self) -> f64 {
        0.5 * (self.left + self.right)
    }
}

/// Default fitting window around each contact point, in cells.
pub const DEFAULT_ANGLE_WINDOW: usize = 12;

/// Default width of the excluded wall layer for [`AngleMethod::Arc`], in units of `sqrt(h)`.
pub const DEFAULT_WALL_LAYER: f64 = 3.0;

/// How the contact angle is read off the interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum AngleMethod {
    /// Parabola through the interface points within `window` cells of each
    /// contact point. This is the local angle at the grid scale; for evolved
    /// states it reflects the `sqrt(h)`-wide layer along the wall.
    Local { window: usize },
    /// Circle fitted to the interface points more than `exclusion` above the
    /// substrate, intersected with the substrate line. This is the apparent
    /// (macroscopic) angle of an isotropic equilibrium cap.
    Arc { exclusion: f64 },
}

impl Default for AngleMethod {
    fn default() -> Self {
        AngleMethod::Local { window: DEFAULT_ANGLE_WINDOW }
    }
}

/// Measures the contact angles of a particle resting on the lower boundary of a
/// band container. `level` is negative inside the particle (for an evolved
/// state, [`SchemeState::level_field`]); its zero crossings on grid edges are
/// the interface points.
pub fn measure_contact_angle(u: &PhaseField, level: &ScalarField, geometry: &Geometry, method: AngleMethod) -> Result<ContactAngles, SchemeError> {
    let grid = geometry.grid();
    if grid.dim() != 2 {
        return Err(SchemeError::Contact("angle measurement is two-dimensional".into()));
    }
    let base = match geometry.shape() {
        Shape::Band { lower, axis, .. } if axis.unwrap_or(1) == 1 => *lower,
        _ => return Err(SchemeError::Contact("needs a band container bounded along the second axis".into())),
    };
    let components = count_components(u, geometry);
    if components != 1 {
        return Err(SchemeError::Contact(format!("expected one particle component, found {components}")));
    }
    let n = grid.n();
    let dx = grid.spacing();
    // First container row above the substrate line.
    let row = (0..n).find(|&j| geometry.in_omega(grid.linear([0, j, 0]))).ok_or_else(|| SchemeError::Contact("empty container".into()))?;
    let wet = |i: usize| u.get(grid.linear([i % n, row, 0])) == 1.0;
    let touching = (0..n).filter(|&i| wet(i)).count();
    if touching == 0 {
        return Err(SchemeError::Contact("particle does not touch the substrate".into()));
    }
    if touching == n {
        return Err(SchemeError::Contact("particle wets the whole substrate".into()));
    }
    // Contact cells: the ends of the wetted run (which may wrap around the seam).
    let start = (0..n).find(|&i| wet(i) && !wet((i + n - 1) % n)).unwrap();
    let mut end = start;
    while wet((end + 1) % n) {
        end += 1;
    }
    if end - start + 1 != touching {
        return Err(SchemeError::Contact("substrate contact is not a single segment".into()));
    }
    let left_guess = [start as f64 * dx, base];
    let right_guess = [(end + 1) as f64 * dx, base];
    let mid = 0.5 * (left_guess[0] + right_guess[0]);
    // Interface points unwrapped next to the particle.
    let crossings: Vec<[f64; 2]> = zero_crossings(level, geometry).into_iter().map(|p| [mid + wrap_delta(p[0] - mid), p[1]]).collect();
    match method {
        AngleMethod::Local { window } => {
            let fit = |guess: [f64; 2], inward: f64| -> Result<(f64, [f64; 2]), SchemeError> {
                let radius = window as f64 * dx;
                let pts: Vec<[f64; 2]> = crossings.iter().copied().filter(|p| (p[0] - guess[0]).hypot(p[1] - guess[1]) <= radius).collect();
                if pts.len() < 4 {
                    return Err(SchemeError::Contact(format!("only {} interface points near a contact point", pts.len())));
                }
                fit_angle(&pts, base, inward)
            };
            let (left, lp) = fit(left_guess, 1.0)?;
            let (right, rp) = fit(right_guess, -1.0)?;
            Ok(ContactAngles { left, right, left_point: [lp[0].rem_euclid(1.0), lp[1]], right_point: [rp[0].rem_euclid(1.0), rp[1]] })
        }
        AngleMethod::Arc { exclusion } => {
            let pts: Vec<[f64; 2]> = crossings.into_iter().filter(|p| p[1] > base + exclusion).collect();
            if pts.len() < 8 {
                return Err(SchemeError::Contact(format!("only {} interface points above the wall layer", pts.len())));
            }
            let (c, r) = fit_circle(&pts)?;
            let cos = (base - c[1]) / r;
            if cos.abs() >= 1.0 {
                return Err(SchemeError::Contact("fitted circle misses the substrate".into()));
            }
            let angle = cos.acos().to_degrees();
            let half = r * (1.0 - cos * cos).sqrt();
            Ok(ContactAngles {
                left: angle,
                right: angle,
                left_point: [(c[0] - half).rem_euclid(1.0), base],
                right_point: [(c[0] + half).rem_euclid(1.0), base],
            })
        }
    }
}

/// Algebraic circle fit refined by Gauss-Newton on the geometric residuals.
fn fit_circle(pts: &[[f64; 2]]) -> Result<([f64; 2], f64), SchemeError> {
    let a = nalgebra::DMatrix::from_fn(pts.len(), 3, |i, j| [pts[i][0], pts[i][1], 1.0][j]);
    let b = nalgebra::DVector::from_iterator(pts.len(), pts.iter().map(|p| -(p[0] * p[0] + p[1] * p[1])));
    let s = a.svd(true, true).solve(&b, 1e-14).map_err(|e| SchemeError::Contact(format!("circle fit failed: {e}")))?;
    let mut c = [-0.5 * s[0], -0.5 * s[1]];
    let mut r = (c[0] * c[0] + c[1] * c[1] - s[2]).max(0.0).sqrt();
    for _ in 0..20 {
        let jac = nalgebra::DMatrix::from_fn(pts.len(), 3, |i, j| {
            let d = (pts[i][0] - c[0]).hypot(pts[i][1] - c[1]).max(1e-300);
            [-(pts[i][0] - c[0]) / d, -(pts[i][1] - c[1]) / d, -1.0][j]
        });
        let res = nalgebra::DVector::from_iterator(pts.len(), pts.iter().map(|p| (p[0] - c[0]).hypot(p[1] - c[1]) - r));
        let Ok(delta) = jac.svd(true, true).solve(&res, 1e-14) else { break };
        c = [c[0] - delta[0], c[1] - delta[1]];
        r -= delta[2];
        if delta.norm() < 1e-15 {
            break;
        }
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(SchemeError::Contact("degenerate circle fit".into()));
    }
    Ok((c, r))
}

fn wrap_delta(d: f64) -> f64 {
    d - d.round()
}

/// Zero crossings of `level` on edges between container cells.
fn zero_crossings(level: &ScalarField, geometry: &Geometry) -> Vec<[f64; 2]> {
    let grid = geometry.grid();
    let mut out = Vec::new();
    for c in 0..grid.len() {
        if !geometry.in_omega(c) {
            continue;
        }
        let x = grid.center(c);
        for a in 0..2 {
            let nb = grid.neighbor(c, a, 1);
            if !geometry.in_omega(nb) {
                continue;
            }
            let (f0, f1) = (level.get(c), level.get(nb));
            if (f0 < 0.0) != (f1 < 0.0) && f0 != f1 {
                let t = f0 / (f0 - f1);
                let mut p = [x[0], x[1]];
                p[a] += t * grid.spacing();
                out.push(p);
            }
        }
    }
    out
}

/// Angle between the substrate (pointing into the particle, `inward` along
/// the first axis) and the fitted interface where it meets `y = base`.
fn fit_angle(pts: &[[f64; 2]], base: f64, inward: f64) -> Result<(f64, [f64; 2]), SchemeError> {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p[0]).sum::<f64>() / k;
    let my = pts.iter().map(|p| p[1]).sum::<f64>() / k;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // Principal direction of the point cloud.
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (t, nrm) = ([theta.cos(), theta.sin()], [-theta.sin(), theta.cos()]);
    // offset = c0 + c1 s + c2 s^2 in the aligned frame.
    let rows: Vec<(f64, f64)> = pts
        .iter()
        .map(|p| {
            let (dx, dy) = (p[0] - mx, p[1] - my);
            (dx * t[0] + dy * t[1], dx * nrm[0] + dy * nrm[1])
        })
        .collect();
    let a = nalgebra::DMatrix::from_fn(rows.len(), 3, |i, j| rows[i].0.powi(j as i32));
    let b = nalgebra::DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let coef = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| SchemeError::Contact(format!("least-squares fit failed: {e}")))?;
    let (c0, c1, c2) = (coef[0], coef[1], coef[2]);
    let point = |s: f64| {
        let o = c0 + c1 * s + c2 * s * s;
        [mx + s * t[0] + o * nrm[0], my + s * t[1] + o * nrm[1]]
    };
    // Parameter where the fitted curve meets the substrate line, by Newton from
    // the point of the cloud closest to it.
    let mut s = rows.iter().zip(pts).min_by(|a, b| a.1[1].total_cmp(&b.1[1])).unwrap().0 .0;
    for _ in 0..50 {
        let p = point(s);
        let dp = [t[0] + (c1 + 2.0 * c2 * s) * nrm[0], t[1] + (c1 + 2.0 * c2 * s) * nrm[1]];
        if dp[1].abs() < 1e-14 {
            break;
        }
        let step = (p[1] - base) / dp[1];
        s -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    let p = point(s);
    let mut d = [t[0] + (c1 + 2.0 * c2 * s) * nrm[0], t[1] + (c1 + 2.0 * c2 * s) * nrm[1]];
    if d[1] < 0.0 {
        d = [-d[0], -d[1]];
    }
    Ok((d[1].atan2(inward * d[0]).to_degrees(), p))
}

/// Connected components (4-connectivity, periodic) of `{u = 1}`.
pub fn count_components(u: &PhaseField, geometry: &Geometry) -> usize {
    let grid = geometry.grid();
    let mut seen = vec![false; grid.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for c in 0..grid.len() {
        if u.get(c) != 1.0 || seen[c] {
            continue;
        }
        count += 1;
        seen[c] = true;
        stack.push(c);
        while let Some(x) = stack.pop() {
            for a in 0..grid.dim() {
                for o in [-1, 1] {
                    let nb = grid.neighbor(x, a, o);
                    if !seen[nb] && u.get(nb) == 1.0 {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                }
            }
        }
    }
    count
}

/// Circular cap with interior contact angle `angle_deg` on the lower boundary of
/// a band container: the indicator and the level function `|x - c| - R`.
pub fn synthetic_cap(geometry: &Geometry, center_x: f64, radius: f64, angle_deg: f64) -> Result<(PhaseField, ScalarField), SchemeError> {
    let shape = crate::shapes::ShapeSpec::Cap { center_x, radius, angle_deg };
    let u = PhaseField::from_shape(&shape, geometry)?;
    let base = match geometry.shape() {
        Shape::Band { lower, .. } => *lower,
        _ => return Err(SchemeError::Contact("synthetic caps need a band container".into())),
    };
    let cy = base - radius * angle_deg.to_radians().cos();
    let level = ScalarField::from_fn(geometry.grid(), |x| (x[0] - center_x).hypot(x[1] - cy) - radius);
    Ok((u, level))
}

/// Radius of the disk with the area of `u`, and the symmetric-difference
/// area between `u` and that disk placed at the centroid of `u`.
pub fn best_fit_disk(u: &PhaseField, geometry: &Geometry) -> (f64, [f64; 2], f64) {
    let grid = geometry.grid();
    let w = grid.cell_volume();
    let area = u.volume();
    let r = (area / std::f64::consts::PI).sqrt();
    let (mut sx, mut sy) = (0.0, 0.0);
    for c in 0..grid.len() {
        if u.get(c) == 1.0 {
            let x = grid.center(c);
            sx += x[0] * w;
            sy += x[1] * w;
        }
    }
    let c = [sx / area, sy / area];
    let mut diff = 0.0;
    for cell in 0..grid.len() {
        let x = grid.center(cell);
        let inside = (x[0] - c[0]).hypot(x[1] - c[1]) < r;
        if inside != (u.get(cell) == 1.0) {
            diff += w;
        }
    }
    (r, c, diff)
}
