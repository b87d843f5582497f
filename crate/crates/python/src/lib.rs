use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::Serialize;

use pulse_reduction::analysis;
use pulse_reduction::dynamics;
use pulse_reduction::scenarios::{self, ScenarioConfig};
use pulse_reduction::state::{self, BrainKind};
use pulse_reduction::Error;

create_exception!(pulse_reduction, PulseError, PyException);

fn err(e: Error) -> PyErr {
    PulseError::new_err(e.to_string())
}

/// Serializes through JSON so Python gets plain dicts and lists.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PulseError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_kind(kind: &str) -> PyResult<BrainKind> {
    match kind {
        "conscious" => Ok(BrainKind::Conscious),
        "ready" => Ok(BrainKind::Ready),
        other => Err(PulseError::new_err(format!(
            "unknown pulse kind {other:?}; expected \"conscious\" or \"ready\""
        ))),
    }
}

#[pyclass(name = "BrainGrid", frozen)]
#[derive(Clone)]
struct PyBrainGrid {
    inner: state::BrainGrid,
}

#[pymethods]
impl PyBrainGrid {
    /// Uniform grid; `spacing` defaults to `1 / n_points`.
    #[new]
    #[pyo3(signature = (n_points, spacing = None, origin = 0.0))]
    fn new(n_points: usize, spacing: Option<f64>, origin: f64) -> PyResult<Self> {
        let spacing = spacing.unwrap_or(1.0 / n_points.max(1) as f64);
        state::BrainGrid::new(n_points, spacing, origin)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.inner.n_points()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.spacing()
    }

    #[getter]
    fn origin(&self) -> f64 {
        self.inner.origin()
    }

    fn position(&self, index: usize) -> PyResult<f64> {
        self.inner.check_index(index).map_err(err)?;
        Ok(self.inner.position(index))
    }

    fn nearest_index(&self, u: f64) -> Option<usize> {
        self.inner.nearest_index(u)
    }

    fn __repr__(&self) -> String {
        format!(
            "BrainGrid(n_points={}, spacing={}, origin={})",
            self.inner.n_points(),
            self.inner.spacing(),
            self.inner.origin()
        )
    }
}

#[pyclass(name = "Pulse", frozen)]
struct PyPulse {
    inner: state::Pulse,
}

#[pymethods]
impl PyPulse {
    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind() {
            BrainKind::Conscious => "conscious",
            BrainKind::Ready => "ready",
        }
    }

    #[getter]
    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    #[getter]
    fn center_index(&self) -> usize {
        self.inner.center_index()
    }

    #[getter]
    fn weights(&self) -> Vec<Complex64> {
        self.inner.weights().to_vec()
    }

    /// Per-site mass `|F(u)|² Δu`.
    #[getter]
    fn mass(&self) -> Vec<f64> {
        self.inner.mass().to_vec()
    }

    fn mean_position(&self) -> f64 {
        self.inner.profile().mean_position()
    }

    fn fitted_width(&self) -> f64 {
        self.inner.profile().fitted_width()
    }

    fn __repr__(&self) -> String {
        format!(
            "Pulse(kind={:?}, center_index={}, norm={})",
            self.kind(),
            self.inner.center_index(),
            self.inner.norm()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (grid, center, sigma, kind = "conscious"))]
fn make_gaussian_pulse(grid: &PyBrainGrid, center: f64, sigma: f64, kind: &str) -> PyResult<PyPulse> {
    state::make_gaussian_pulse(grid.inner, center, sigma, parse_kind(kind)?)
        .map(|inner| PyPulse { inner })
        .map_err(err)
}

#[pyfunction]
fn pulse_overlap(p: &PyPulse, q: &PyPulse) -> PyResult<f64> {
    state::pulse_overlap(&p.inner, &q.inner).map_err(err)
}

#[pyfunction]
fn relative_intensity(pulse: &PyPulse, lo: usize, hi: usize) -> PyResult<f64> {
    dynamics::relative_intensity(&pulse.inner, lo, hi).map_err(err)
}

#[pyfunction]
fn closed_form_p_hit(a2_final_sq: f64, s: f64) -> PyResult<f64> {
    analysis::closed_form_p_hit(a2_final_sq, s).map_err(err)
}

#[pyfunction]
fn closed_form_p2_after_off(a2_sq: f64, s: f64) -> PyResult<f64> {
    analysis::closed_form_p2_after_off(a2_sq, s).map_err(err)
}

#[pyclass(name = "ScenarioConfig")]
#[derive(Clone)]
struct PyScenarioConfig {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyScenarioConfig {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        ScenarioConfig::from_toml(text).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn from_path(path: std::path::PathBuf) -> PyResult<Self> {
        ScenarioConfig::from_path(&path).map(|inner| Self { inner }).map_err(err)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name.as_str()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn guard(&self) -> bool {
        self.inner.guard
    }

    #[setter]
    fn set_guard(&mut self, guard: bool) {
        self.inner.guard = guard;
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    fn __repr__(&self) -> String {
        format!("ScenarioConfig(name={:?}, seed={})", self.inner.name.as_str(), self.inner.seed)
    }
}

#[derive(Serialize)]
struct RunOut<'a> {
    summary: &'a scenarios::Summary,
    invariants: &'a scenarios::MonitorSummary,
    events: &'a [pulse_reduction::reduction::ReductionEvent],
    snapshots: usize,
}

#[pyclass(name = "Scenario", frozen)]
struct PyScenario {
    inner: scenarios::Scenario,
}

#[pymethods]
impl PyScenario {
    #[new]
    fn new(config: &PyScenarioConfig) -> PyResult<Self> {
        scenarios::Scenario::new(config.inner.clone())
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[getter]
    fn config(&self) -> PyScenarioConfig {
        PyScenarioConfig {
            inner: self.inner.config().clone(),
        }
    }

    fn closed_form_p_hit(&self) -> PyResult<f64> {
        self.inner.closed_form_p_hit().map_err(err)
    }

    fn expected_label_shares(&self) -> PyResult<Vec<f64>> {
        self.inner.expected_label_shares().map_err(err)
    }

    /// Recorded run of one trial with the invariant monitor on. Returns a
    /// dict with `summary`, `invariants`, `events` and `snapshots`.
    #[pyo3(signature = (trial = 0))]
    fn run<'py>(&self, py: Python<'py>, trial: u64) -> PyResult<Bound<'py, PyAny>> {
        let run = py.detach(|| self.inner.run_recorded(trial)).map_err(err)?;
        to_py(
            py,
            &RunOut {
                summary: &run.summary,
                invariants: &run.monitor,
                events: &run.events,
                snapshots: run.trajectory.len(),
            },
        )
    }

    /// Runs `trials` Monte Carlo trials and returns the comparison report.
    fn montecarlo<'py>(&self, py: Python<'py>, trials: usize) -> PyResult<Bound<'py, PyAny>> {
        let report = py
            .detach(|| {
                let outcomes = scenarios::run_trials(&self.inner, trials)?;
                analysis::scenario_report(&self.inner, &outcomes)
            })
            .map_err(err)?;
        to_py(py, &report)
    }
}

#[pymodule]
#[pyo3(name = "pulse_reduction")]
fn pulse_reduction_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PulseError", m.py().get_type::<PulseError>())?;
    m.add_class::<PyBrainGrid>()?;
    m.add_class::<PyPulse>()?;
    m.add_class::<PyScenarioConfig>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(make_gaussian_pulse, m)?)?;
    m.add_function(wrap_pyfunction!(pulse_overlap, m)?)?;
    m.add_function(wrap_pyfunction!(relative_intensity, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_p_hit, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_p2_after_off, m)?)?;
    Ok(())
}
