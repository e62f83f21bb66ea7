//! Python bindings. Scenarios travel as TOML text; structured results come
//! back as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::Value;

use stinger::engine::{self, ControlAction, Scenario, World};
use stinger::medium::Medium;
use stinger::{batch, presets, propulsion, SimError};

fn err(e: SimError) -> PyErr {
    match e {
        SimError::InvalidInput(_)
        | SimError::Invariant { .. }
        | SimError::Parse(_)
        | SimError::UnknownInlet(_)
        | SimError::OutsideChamber { .. }
        | SimError::MalformedLog { .. } => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn scenario(text: &str, seed: Option<u64>) -> PyResult<Scenario> {
    let mut s = engine::load_scenario(text).map_err(err)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

/// Names of the built-in scenarios.
#[pyfunction]
fn preset_names() -> Vec<&'static str> {
    presets::NAMES.to_vec()
}

/// A built-in scenario as TOML text.
#[pyfunction]
#[pyo3(signature = (name, seed=0))]
fn preset(name: &str, seed: u64) -> PyResult<String> {
    presets::by_name(name, seed)
        .map(|s| s.to_toml())
        .ok_or_else(|| PyValueError::new_err(format!("unknown preset {name:?}")))
}

/// Run a scenario to completion. Returns `(metrics, event_log)`.
#[pyfunction]
#[pyo3(signature = (toml, seed=None))]
fn run<'py>(py: Python<'py>, toml: &str, seed: Option<u64>) -> PyResult<(Bound<'py, PyAny>, String)> {
    let s = scenario(toml, seed)?;
    let record = py.detach(|| engine::run(&s)).map_err(err)?;
    Ok((to_py(py, &record.metrics)?, record.log()))
}

/// Re-run a scenario and compare with a recorded log.
#[pyfunction]
fn replay<'py>(py: Python<'py>, toml: &str, log: &str) -> PyResult<Bound<'py, PyAny>> {
    let s = scenario(toml, None)?;
    let verdict = py.detach(|| engine::replay(&s, log)).map_err(err)?;
    to_py(py, &verdict)
}

/// Propulsion mode and capsule trap site for a NaCl concentration (mM) and
/// field frequency (Hz), under default parameters.
#[pyfunction]
fn behavior(nacl_mm: f64, freq_hz: f64) -> PyResult<(String, String)> {
    let medium = Medium::nacl(nacl_mm).map_err(err)?;
    let (mode, site) = propulsion::behavior_map(
        &Default::default(),
        &Default::default(),
        &medium,
        freq_hz,
    )
    .map_err(err)?;
    Ok((mode.as_str().to_string(), site.as_str().to_string()))
}

#[pyfunction]
#[pyo3(signature = (fraction, t_s, stages=1))]
fn calibrate_activation<'py>(py: Python<'py>, fraction: f64, t_s: f64, stages: u32) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &batch::calibrate_activation_report(fraction, t_s, stages).map_err(err)?)
}

/// Monte-Carlo summary over `n` consecutive seeds.
#[pyfunction]
#[pyo3(signature = (toml, n, seed_base=0))]
fn monte_carlo<'py>(py: Python<'py>, toml: &str, n: usize, seed_base: u64) -> PyResult<Bound<'py, PyAny>> {
    let s = scenario(toml, None)?;
    let report = py.detach(|| batch::monte_carlo(&s, n, seed_base)).map_err(err)?;
    to_py(py, &report)
}

/// A stepping simulation with live controls.
#[pyclass(unsendable)]
struct Simulation {
    world: World,
}

#[pymethods]
impl Simulation {
    #[new]
    #[pyo3(signature = (toml, seed=None))]
    fn new(toml: &str, seed: Option<u64>) -> PyResult<Self> {
        Ok(Self { world: World::new(&scenario(toml, seed)?).map_err(err)? })
    }

    #[getter]
    fn t(&self) -> f64 {
        self.world.t()
    }

    #[getter]
    fn finished(&self) -> bool {
        self.world.is_finished()
    }

    /// Advance up to `n` steps; returns the events as dicts.
    #[pyo3(signature = (n=1))]
    fn step<'py>(&mut self, py: Python<'py>, n: usize) -> PyResult<Bound<'py, PyAny>> {
        let mut events = Vec::new();
        for _ in 0..n {
            if self.world.is_finished() {
                break;
            }
            events.extend(self.world.step().map_err(err)?);
        }
        to_py(py, &events)
    }

    /// Queue a control action given as a dict in the gateway format, e.g.
    /// `{"type": "set_magnet", "heading": 0.0, "rpm": 100}`.
    #[pyo3(signature = (action, at=None))]
    fn control(&mut self, py: Python<'_>, action: Bound<'_, PyAny>, at: Option<f64>) -> PyResult<()> {
        let text: String = py.import("json")?.call_method1("dumps", (action,))?.extract()?;
        let value: Value = serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let action: ControlAction =
            serde_json::from_value(value).map_err(|e| PyValueError::new_err(format!("invalid action: {e}")))?;
        self.world.enqueue(action, at).map_err(err)
    }

    #[pyo3(signature = (grid_factor=None))]
    fn snapshot<'py>(&self, py: Python<'py>, grid_factor: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.world.snapshot(grid_factor))
    }
}

#[pymodule]
pub fn stinger_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(behavior, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_activation, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add_class::<Simulation>()?;
    Ok(())
}
