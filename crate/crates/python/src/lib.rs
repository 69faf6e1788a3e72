//! Python bindings. Fields cross the boundary as flat lists in cell order
//! (axis 0 fastest); shapes and configurations as JSON or TOML text.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ambo::anisotropy::{induced_gamma as gamma_of_kernel, Anisotropy};
use ambo::energy::{EnergyModel as CoreModel, PhaseField as CoreField};
use ambo::geometry::{build_geometry, Geometry as CoreGeometry, Shape};
use ambo::grid::{ScalarField, TorusGrid};
use ambo::harness::config::RunConfig;
use ambo::harness::experiments::execute;
use ambo::kernel::{scale, Kernel};
use ambo::scheme::{measure_contact_angle, run, AngleMethod, SchemeConfig};
use ambo::shapes::ShapeSpec;
use ambo::tensions::{construct, ModifiedTensions, RawTensions, TensionSpec};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn field_from(grid: TorusGrid, values: Vec<f64>) -> PyResult<ScalarField> {
    ScalarField::from_values(grid, values).map_err(err)
}

/// Container geometry on a periodic grid.
#[pyclass(frozen)]
struct Geometry {
    inner: CoreGeometry,
}

#[pymethods]
impl Geometry {
    /// `shape` is a JSON object such as `{"shape": "disk", "center": [0.5, 0.5], "radius": 0.3}`.
    #[new]
    #[pyo3(signature = (dim, n, shape, delta=None))]
    fn new(dim: usize, n: usize, shape: &str, delta: Option<f64>) -> PyResult<Self> {
        let shape: Shape = serde_json::from_str(shape).map_err(err)?;
        let grid = TorusGrid::new(dim, n).map_err(err)?;
        Ok(Self { inner: build_geometry(&shape, grid, delta).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (n, dim=2))]
    fn torus(n: usize, dim: usize) -> PyResult<Self> {
        Self::new(dim, n, r#"{"shape":"torus"}"#, None)
    }

    #[staticmethod]
    fn disk(n: usize, center: [f64; 2], radius: f64) -> PyResult<Self> {
        let grid = TorusGrid::new(2, n).map_err(err)?;
        let shape = Shape::Disk { center: center.to_vec(), radius };
        Ok(Self { inner: build_geometry(&shape, grid, None).map_err(err)? })
    }

    /// Slab `lower < y < upper`, periodic in x.
    #[staticmethod]
    fn band(n: usize, lower: f64, upper: f64) -> PyResult<Self> {
        let grid = TorusGrid::new(2, n).map_err(err)?;
        Ok(Self { inner: build_geometry(&Shape::Band { lower, upper, axis: None }, grid, None).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.grid().dim()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.grid().n()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.grid().spacing()
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta()
    }

    fn omega_measure(&self) -> f64 {
        self.inner.omega_measure()
    }

    fn omega_mask(&self) -> Vec<f64> {
        self.inner.omega_mask().values().to_vec()
    }

    fn signed_distance(&self) -> Vec<f64> {
        self.inner.signed_distance().values().to_vec()
    }
}

/// Particle indicator (or relaxed phase) with values in [0, 1], zero outside the container.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct PhaseField {
    inner: CoreField,
}

#[pymethods]
impl PhaseField {
    #[new]
    fn new(geometry: &Geometry, values: Vec<f64>) -> PyResult<Self> {
        let f = field_from(geometry.inner.grid(), values)?;
        Ok(Self { inner: CoreField::new(f, &geometry.inner).map_err(err)? })
    }

    /// `spec` is a JSON particle shape, for example `{"shape": "cap", "center_x": 0.5, "radius": 0.2, "angle_deg": 90}`.
    #[staticmethod]
    fn from_shape(geometry: &Geometry, spec: &str) -> PyResult<Self> {
        let spec: ShapeSpec = serde_json::from_str(spec).map_err(err)?;
        Ok(Self { inner: CoreField::from_shape(&spec, &geometry.inner).map_err(err)? })
    }

    #[staticmethod]
    fn circle(geometry: &Geometry, center: [f64; 2], radius: f64) -> PyResult<Self> {
        let spec = ShapeSpec::Circle { center, radius };
        Ok(Self { inner: CoreField::from_shape(&spec, &geometry.inner).map_err(err)? })
    }

    /// Uniform random values in [0, 1] on the container, reproducible from `seed`.
    #[staticmethod]
    fn random(geometry: &Geometry, seed: u64) -> Self {
        Self { inner: CoreField::random(&geometry.inner, seed) }
    }

    fn values(&self) -> Vec<f64> {
        self.inner.field().values().to_vec()
    }

    fn volume(&self) -> f64 {
        self.inner.volume()
    }

    fn is_binary(&self) -> bool {
        self.inner.is_binary()
    }

    fn __len__(&self) -> usize {
        self.inner.grid().len()
    }
}

/// Approximate energy for one geometry, tension set, and kernel width `h`.
#[pyclass(frozen)]
struct EnergyModel {
    inner: CoreModel,
}

#[pymethods]
impl EnergyModel {
    /// Spatially constant extended tensions and the Gaussian kernel.
    #[new]
    #[pyo3(signature = (geometry, h, pv=1.0, sp=0.5, sv=0.5))]
    fn new(geometry: &Geometry, h: f64, pv: f64, sp: f64, sv: f64) -> PyResult<Self> {
        let g = &geometry.inner;
        let t = ModifiedTensions::constant(g.grid(), pv, sp, sv);
        let k = scale(&Kernel::gaussian(g.grid().dim()), g.grid(), h).map_err(err)?;
        Ok(Self { inner: CoreModel::new(g, &t, k).map_err(err)? })
    }

    /// Raw tensions as expressions in `x1, x2, x3`, extended by the modified-tension
    /// construction with the isotropic anisotropy `1/sqrt(pi)`.
    #[staticmethod]
    fn constructed(geometry: &Geometry, h: f64, pv: &str, sp: &str, sv: &str) -> PyResult<Self> {
        let g = &geometry.inner;
        let raw = RawTensions::parse(&TensionSpec { pv: pv.into(), sp: sp.into(), sv: sv.into() }).map_err(err)?;
        let gamma = Anisotropy::isotropic(g.grid().dim(), 1.0 / std::f64::consts::PI.sqrt()).map_err(err)?;
        let c = construct(&raw, g, &gamma).map_err(err)?;
        let k = scale(&Kernel::gaussian(g.grid().dim()), g.grid(), h).map_err(err)?;
        Ok(Self { inner: CoreModel::new(g, &c.tensions, k).map_err(err)? })
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    fn energy(&self, u: &PhaseField) -> PyResult<f64> {
        self.inner.energy(&u.inner).map_err(err)
    }

    /// `(pv, sp, sv, total)` contributions.
    fn terms(&self, u: &PhaseField) -> PyResult<(f64, f64, f64, f64)> {
        let t = self.inner.terms(&u.inner).map_err(err)?;
        Ok((t.pv, t.sp, t.sv, t.total))
    }

    /// First variation of the energy, the field the scheme thresholds.
    fn comparison_field(&self, u: &PhaseField) -> PyResult<Vec<f64>> {
        Ok(self.inner.comparison_field(&u.inner).map_err(err)?.values().to_vec())
    }
}

/// Result of a scheme run.
#[pyclass(frozen, get_all)]
struct Trajectory {
    status: String,
    steps: usize,
    energies: Vec<f64>,
    volumes: Vec<f64>,
    energy_monotone: bool,
    final_u: PhaseField,
    /// Comparison field minus the volume multiplier; the interface is its zero set.
    level: Vec<f64>,
}

#[pyfunction]
#[pyo3(signature = (model, u, max_steps=500, preserve_volume=true, stop_early=true))]
fn run_scheme(py: Python<'_>, model: &EnergyModel, u: &PhaseField, max_steps: usize, preserve_volume: bool, stop_early: bool) -> PyResult<Trajectory> {
    let mut cfg = SchemeConfig::new(model.inner.h());
    cfg.max_steps = max_steps;
    cfg.preserve_volume = preserve_volume;
    cfg.stop_early = stop_early;
    let u0 = u.inner.clone();
    let tr = py.detach(|| run(u0, &cfg, &model.inner)).map_err(err)?;
    let status = serde_json::to_value(tr.status).map_err(err)?.as_str().unwrap_or_default().to_string();
    Ok(Trajectory {
        status,
        steps: tr.final_state.step,
        energies: tr.diagnostics.iter().map(|d| d.energy).collect(),
        volumes: tr.diagnostics.iter().map(|d| d.volume).collect(),
        energy_monotone: tr.energy_monotone,
        level: tr.final_state.level_field().into_values(),
        final_u: PhaseField { inner: tr.final_state.u },
    })
}

/// Left and right contact angles in degrees, measured inside the particle,
/// for a particle on the lower line of a band. `method` is `"arc"` (circle
/// fit above a wall layer of `exclusion`) or `"local"` (parabola in a window of `window` cells).
#[pyfunction]
#[pyo3(signature = (geometry, u, level, method="arc", exclusion=0.1, window=12))]
fn contact_angle(geometry: &Geometry, u: &PhaseField, level: Vec<f64>, method: &str, exclusion: f64, window: usize) -> PyResult<(f64, f64)> {
    let method = match method {
        "arc" => AngleMethod::Arc { exclusion },
        "local" => AngleMethod::Local { window },
        other => return Err(err(format!("unknown method `{other}`, expected `arc` or `local`"))),
    };
    let level = field_from(geometry.inner.grid(), level)?;
    let a = measure_contact_angle(&u.inner, &level, &geometry.inner, method).map_err(err)?;
    Ok((a.left, a.right))
}

/// Anisotropy induced by the Gaussian kernel in direction `nu`.
#[pyfunction]
fn induced_gamma(nu: Vec<f64>) -> PyResult<f64> {
    if !(1..=3).contains(&nu.len()) {
        return Err(err("nu needs 1 to 3 components"));
    }
    let mut p = [0.0; 3];
    p[..nu.len()].copy_from_slice(&nu);
    gamma_of_kernel(&Kernel::gaussian(nu.len().max(2)), &p).map_err(err)
}

/// Runs an experiment from TOML text, writes its files to `output_dir`, and
/// returns the summary as JSON text.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &str, output_dir: PathBuf) -> PyResult<String> {
    let cfg = RunConfig::from_toml(config).map_err(err)?;
    cfg.check().map_err(err)?;
    py.detach(|| execute(&cfg, &output_dir)).map_err(err)?;
    std::fs::read_to_string(output_dir.join("summary.json")).map_err(err)
}

#[pymodule]
fn pyambo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Geometry>()?;
    m.add_class::<PhaseField>()?;
    m.add_class::<EnergyModel>()?;
    m.add_class::<Trajectory>()?;
    m.add_function(wrap_pyfunction!(run_scheme, m)?)?;
    m.add_function(wrap_pyfunction!(contact_angle, m)?)?;
    m.add_function(wrap_pyfunction!(induced_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
