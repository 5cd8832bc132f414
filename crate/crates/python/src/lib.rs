//! Python bindings. Fields travel as flat lists in row-major order; results
//! that carry several numbers come back as dicts.

use std::path::PathBuf;

use hosch::bands::{floquet_at as core_floquet_at, BandEdge, EdgeKind, FloquetOptions, Harmonic};
use hosch::cli::{run as core_run, CliOptions};
use hosch::config::Command;
use hosch::diagnostics::{
    ehrenfest_corrections as core_ehrenfest, energy as core_energy, nonlinear_residual as core_residual,
    ObservablesSample,
};
use hosch::evolution::{galilean_boost as core_boost, gauge_form_residual as core_gauge};
use hosch::functionals::{homogeneity_check as core_homogeneity, Preset};
use hosch::states::harmonic_potential as core_harmonic;
use hosch::{
    floquet_analyze as core_analyze, hill_from_stationary, CoeffSet, ComplexField, EvolutionConfig, FloquetResult,
    HillEquation, Integrator, MeParams, RealField, Variant,
};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyInt, PyString};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn constants(c: Option<PyRef<'_, Constants>>) -> hosch::PhysicalConstants {
    c.map(|c| c.0).unwrap_or_default()
}

#[pyclass(frozen, name = "Constants")]
pub struct Constants(hosch::PhysicalConstants);

#[pymethods]
impl Constants {
    #[new]
    #[pyo3(signature = (hbar = 1.0, mass = 1.0))]
    fn new(hbar: f64, mass: f64) -> PyResult<Self> {
        hosch::PhysicalConstants::new(hbar, mass).map(Self).map_err(err)
    }

    #[getter]
    fn hbar(&self) -> f64 {
        self.0.hbar
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.0.mass
    }
}

/// Periodic box with `n` points of total length `length` per axis.
#[pyclass(frozen, name = "Grid")]
pub struct Grid(hosch::Grid);

#[pymethods]
impl Grid {
    #[new]
    #[pyo3(signature = (n, length, dims = 1))]
    fn new(n: usize, length: f64, dims: usize) -> PyResult<Self> {
        hosch::Grid::new(dims, n, length).map(Self).map_err(err)
    }

    #[getter]
    fn dims(&self) -> usize {
        self.0.dims()
    }

    fn n(&self, axis: usize) -> usize {
        self.0.n(axis)
    }

    fn length(&self, axis: usize) -> f64 {
        self.0.len(axis)
    }

    fn coords(&self, axis: usize) -> Vec<f64> {
        self.0.axis_coords(axis)
    }

    fn fundamental_k(&self, axis: usize) -> f64 {
        self.0.fundamental_k(axis)
    }
}

#[pyclass(frozen, name = "Field")]
pub struct Field(ComplexField);

#[pymethods]
impl Field {
    #[staticmethod]
    fn from_values(grid: PyRef<'_, Grid>, values: Vec<Complex64>) -> PyResult<Self> {
        ComplexField::from_vec(grid.0, values).map(Self).map_err(err)
    }

    fn values(&self) -> Vec<Complex64> {
        self.0.data.clone()
    }

    fn density(&self) -> Vec<f64> {
        self.0.density().data
    }

    fn norm(&self) -> f64 {
        self.0.norm()
    }

    fn max_abs_diff(&self, other: PyRef<'_, Field>) -> PyResult<f64> {
        if !self.0.grid.same_shape(&other.0.grid) {
            return Err(err("fields live on different grids"));
        }
        Ok(self.0.max_abs_diff(&other.0))
    }

    fn scale(&self, z: Complex64) -> Self {
        Self(self.0.scale(z))
    }

    fn __len__(&self) -> usize {
        self.0.data.len()
    }
}

fn to_json(v: &Bound<'_, PyAny>) -> PyResult<serde_json::Value> {
    use serde_json::Value;
    if v.is_none() {
        Ok(Value::Null)
    } else if v.is_instance_of::<PyBool>() {
        Ok(Value::Bool(v.extract()?))
    } else if v.is_instance_of::<PyInt>() {
        Ok(Value::from(v.extract::<i64>()?))
    } else if v.is_instance_of::<PyFloat>() {
        Ok(Value::from(v.extract::<f64>()?))
    } else if v.is_instance_of::<PyString>() {
        Ok(Value::String(v.extract()?))
    } else {
        Err(err(format!("unsupported parameter value {v}")))
    }
}

/// Builds a named state; keyword arguments are the fields of that kind.
#[pyfunction]
#[pyo3(signature = (grid, kind, constants = None, **params))]
fn make_state(
    grid: PyRef<'_, Grid>,
    kind: &str,
    constants: Option<PyRef<'_, Constants>>,
    params: Option<&Bound<'_, PyDict>>,
) -> PyResult<Field> {
    let mut map = serde_json::Map::new();
    map.insert("kind".into(), kind.into());
    if let Some(p) = params {
        for (k, v) in p.iter() {
            map.insert(k.extract::<String>()?, to_json(&v)?);
        }
    }
    let spec: hosch::StateSpec = serde_json::from_value(map.into()).map_err(err)?;
    hosch::make_state(&spec, grid.0, self::constants(constants)).map(Field).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (grid, omega, constants = None))]
fn harmonic_potential(grid: PyRef<'_, Grid>, omega: f64, constants: Option<PyRef<'_, Constants>>) -> Vec<f64> {
    core_harmonic(grid.0, omega, self::constants(constants)).data
}

#[pyclass(frozen, name = "Model")]
pub struct Model(hosch::Model);

#[pymethods]
impl Model {
    #[staticmethod]
    fn linear() -> Self {
        Self(hosch::Model::linear())
    }

    #[staticmethod]
    fn me(d1: f64, b1: f64, b6: f64) -> Self {
        Self(hosch::Model::me(MeParams::new(d1, b1, b6)))
    }

    /// `"linear"`, `"dg"`, `"ext"` or `"me(D1, b1, b6)"`.
    #[staticmethod]
    #[pyo3(signature = (name, constants = None))]
    fn preset(name: &str, constants: Option<PyRef<'_, Constants>>) -> PyResult<Self> {
        let p = Preset::parse(name).map_err(err)?;
        Ok(Self(hosch::Model::new(p.coeffs(self::constants(constants)))))
    }

    #[staticmethod]
    fn explicit(variant: &str, a: Vec<f64>, b: Vec<f64>, d: f64) -> PyResult<Self> {
        let v = match variant.to_ascii_lowercase().as_str() {
            "dg" => Variant::Dg,
            "ext" => Variant::Ext,
            other => return Err(err(format!("unknown variant {other:?}"))),
        };
        CoeffSet::new(v, a, b, d).map(|c| Self(hosch::Model::new(c))).map_err(err)
    }

    fn with_forbidden(&self, x14: f64) -> Self {
        Self(self.0.clone().with_forbidden(x14))
    }

    #[getter]
    fn is_linear(&self) -> bool {
        self.0.is_linear()
    }

    #[getter]
    fn a(&self) -> Vec<f64> {
        self.0.coeffs.a.clone()
    }

    #[getter]
    fn b(&self) -> Vec<f64> {
        self.0.coeffs.b.clone()
    }

    #[getter]
    fn d(&self) -> f64 {
        self.0.coeffs.d
    }
}

fn potential_field(grid: hosch::Grid, v: Option<Vec<f64>>) -> PyResult<Option<RealField>> {
    v.map(|data| {
        if data.len() != grid.size() {
            return Err(err(format!("potential has {} values, grid has {}", data.len(), grid.size())));
        }
        Ok(RealField { grid, data })
    })
    .transpose()
}

fn sample_dict<'py>(py: Python<'py>, s: &ObservablesSample) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", s.t)?;
    d.set_item("norm", s.norm)?;
    d.set_item("E_L", s.e_l)?;
    d.set_item("E_ME", s.e_me)?;
    d.set_item("x_mean", s.x_mean.to_vec())?;
    d.set_item("p_mean", s.p_mean.to_vec())?;
    d.set_item("I1", s.i1.to_vec())?;
    d.set_item("I2", s.i2.to_vec())?;
    d.set_item("cont_residual", s.cont_residual)?;
    Ok(d)
}

/// Evolves `psi` to `t_end`; returns the final field and the observables.
#[pyfunction]
#[pyo3(signature = (psi, model, dt, t_end, potential = None, constants = None, sample_stride = 1, integrator = "if-rk4"))]
#[allow(clippy::too_many_arguments)]
fn evolve<'py>(
    py: Python<'py>,
    psi: PyRef<'_, Field>,
    model: PyRef<'_, Model>,
    dt: f64,
    t_end: f64,
    potential: Option<Vec<f64>>,
    constants: Option<PyRef<'_, Constants>>,
    sample_stride: usize,
    integrator: &str,
) -> PyResult<(Field, Vec<Bound<'py, PyDict>>)> {
    let mut cfg = EvolutionConfig::new(model.0.clone(), dt, t_end);
    cfg.constants = self::constants(constants);
    cfg.potential = potential_field(psi.0.grid, potential)?;
    cfg.sample_stride = sample_stride;
    cfg.integrator = match integrator {
        "if-rk4" => Integrator::IfRk4,
        "rk4" => Integrator::Rk4,
        other => return Err(err(format!("unknown integrator {other:?}"))),
    };
    let state = psi.0.clone();
    let traj = py.detach(move || hosch::evolve(&state, &cfg)).map_err(err)?;
    let obs = traj.observables.iter().map(|s| sample_dict(py, s)).collect::<PyResult<_>>()?;
    Ok((Field(traj.final_state().clone()), obs))
}

#[pyfunction]
#[pyo3(signature = (psi, model, constants = None))]
fn nonlinear_residual(psi: PyRef<'_, Field>, model: PyRef<'_, Model>, constants: Option<PyRef<'_, Constants>>) -> PyResult<f64> {
    core_residual(&psi.0, &model.0, self::constants(constants)).map_err(err)
}

/// `(E_L, E_ME)`.
#[pyfunction]
#[pyo3(signature = (psi, model, potential = None, constants = None))]
fn energy(
    psi: PyRef<'_, Field>,
    model: PyRef<'_, Model>,
    potential: Option<Vec<f64>>,
    constants: Option<PyRef<'_, Constants>>,
) -> PyResult<(f64, f64)> {
    let v = potential_field(psi.0.grid, potential)?;
    core_energy(&psi.0, v.as_ref(), &model.0, self::constants(constants)).map_err(err)
}

/// `(I1, I2)` as per-axis lists.
#[pyfunction]
#[pyo3(signature = (psi, model, constants = None))]
fn ehrenfest_corrections(
    psi: PyRef<'_, Field>,
    model: PyRef<'_, Model>,
    constants: Option<PyRef<'_, Constants>>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let (i1, i2) = core_ehrenfest(&psi.0, &model.0, self::constants(constants)).map_err(err)?;
    let dims = psi.0.grid.dims();
    Ok((i1[..dims].to_vec(), i2[..dims].to_vec()))
}

/// Largest deviation of either functional half under `psi -> lam psi`.
#[pyfunction]
fn homogeneity_check(psi: PyRef<'_, Field>, model: PyRef<'_, Model>, lam: Complex64) -> PyResult<f64> {
    let cs = &model.0.coeffs;
    let a = core_homogeneity(cs.variant, &cs.a, &psi.0, lam).map_err(err)?;
    let b = core_homogeneity(cs.variant, &cs.b, &psi.0, lam).map_err(err)?;
    Ok(a.max(b))
}

#[pyfunction]
#[pyo3(signature = (psi, v, t, constants = None, beta = 1.0))]
fn galilean_boost(
    psi: PyRef<'_, Field>,
    v: Vec<f64>,
    t: f64,
    constants: Option<PyRef<'_, Constants>>,
    beta: f64,
) -> PyResult<Field> {
    core_boost(&psi.0, &v, t, self::constants(constants), beta).map(Field).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (psi, d1, b1, b6, constants = None))]
fn gauge_form_residual<'py>(
    py: Python<'py>,
    psi: PyRef<'_, Field>,
    d1: f64,
    b1: f64,
    b6: f64,
    constants: Option<PyRef<'_, Constants>>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = core_gauge(&psi.0, MeParams::new(d1, b1, b6), self::constants(constants)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("deviation", r.deviation)?;
    d.set_item("relative", r.relative)?;
    d.set_item("b6_factor", r.b6_factor)?;
    Ok(d)
}

/// `y'' + Q(z) y = 0` with `Q = q0 + sum 2 q_k cos(k z + phase_k)`.
#[pyclass(frozen, name = "Hill")]
pub struct Hill(HillEquation);

#[pymethods]
impl Hill {
    #[new]
    fn new(q0: f64, harmonics: Vec<(u32, f64, f64)>) -> PyResult<Self> {
        let hs = harmonics.into_iter().map(|(k, q, phase)| Harmonic { k, q, phase }).collect();
        HillEquation::new(q0, hs).map(Self).map_err(err)
    }

    #[staticmethod]
    fn mathieu(a: f64, q: f64) -> PyResult<Self> {
        HillEquation::mathieu(a, q).map(Self).map_err(err)
    }

    /// Amplitude equation of the stationary phase mode (`b6 = 0`).
    #[staticmethod]
    #[pyo3(signature = (d1, b1, amplitude, energy, constants = None))]
    fn from_stationary(
        d1: f64,
        b1: f64,
        amplitude: f64,
        energy: f64,
        constants: Option<PyRef<'_, Constants>>,
    ) -> PyResult<Self> {
        hill_from_stationary(MeParams::new(d1, b1, 0.0), amplitude, energy, self::constants(constants))
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn period(&self) -> f64 {
        self.0.period
    }

    #[getter]
    fn q0(&self) -> f64 {
        self.0.q0
    }

    /// `Q(z)` with the constant part replaced by `lam`.
    fn q_at(&self, z: f64, lam: f64) -> f64 {
        self.0.q_at(z, lam)
    }
}

fn result_dict<'py>(py: Python<'py>, r: &FloquetResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("spectral_parameter", r.lambda)?;
    d.set_item("trM", r.trace)?;
    d.set_item("dtrM", r.trace_derivative)?;
    d.set_item("det", r.det)?;
    d.set_item("stable", r.stable)?;
    d.set_item("nu_real", r.nu_real)?;
    d.set_item("nu_imag", r.nu_imag)?;
    d.set_item("steps", r.steps)?;
    Ok(d)
}

fn edge_dict<'py>(py: Python<'py>, e: &BandEdge) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("spectral_parameter", e.lambda)?;
    d.set_item(
        "kind",
        match e.kind {
            EdgeKind::Periodic => "periodic",
            EdgeKind::Antiperiodic => "antiperiodic",
        },
    )?;
    d.set_item("tangent", e.tangent)?;
    Ok(d)
}

#[pyfunction]
fn floquet_at<'py>(py: Python<'py>, hill: PyRef<'_, Hill>, lam: f64) -> PyResult<Bound<'py, PyDict>> {
    let r = core_floquet_at(&hill.0, lam, &FloquetOptions::default()).map_err(err)?;
    result_dict(py, &r)
}

/// Chart over `[lo, hi]`: `{"samples": [...], "edges": [...]}`.
#[pyfunction]
#[pyo3(signature = (hill, lo, hi, samples = 200))]
fn floquet_analyze<'py>(
    py: Python<'py>,
    hill: PyRef<'_, Hill>,
    lo: f64,
    hi: f64,
    samples: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let h = hill.0.clone();
    let chart = py
        .detach(move || core_analyze(&h, (lo, hi), samples, &FloquetOptions::default()))
        .map_err(err)?;
    let d = PyDict::new(py);
    let rows: Vec<_> = chart.samples.iter().map(|r| result_dict(py, r)).collect::<PyResult<_>>()?;
    let edges: Vec<_> = chart.edges.iter().map(|e| edge_dict(py, e)).collect::<PyResult<_>>()?;
    d.set_item("samples", rows)?;
    d.set_item("edges", edges)?;
    Ok(d)
}

/// Runs a CLI subcommand on a config file and returns its exit code.
#[pyfunction]
#[pyo3(signature = (command, config, out = None, seed = None, quiet = true))]
fn run_cli(py: Python<'_>, command: &str, config: PathBuf, out: Option<PathBuf>, seed: Option<u64>, quiet: bool) -> PyResult<i32> {
    let cmd = match command {
        "evolve" => Command::Evolve,
        "bands" => Command::Bands,
        "check" => Command::Check,
        "ehrenfest" => Command::Ehrenfest,
        "separability" => Command::Separability,
        other => return Err(err(format!("unknown command {other:?}"))),
    };
    let opts = CliOptions { config, out, seed, quiet };
    Ok(py.detach(move || core_run(cmd, &opts)).exit_code)
}

#[pymodule]
pub mod hosch_py {
    #[pymodule_export]
    use super::{
        ehrenfest_corrections, energy, evolve, floquet_analyze, floquet_at, galilean_boost, gauge_form_residual,
        harmonic_potential, homogeneity_check, make_state, nonlinear_residual, run_cli, Constants, Field, Grid, Hill,
        Model,
    };
}
