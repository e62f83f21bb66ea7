use std::ffi::CString;
use std::sync::Once;

use pyo3::prelude::*;
use pyo3::types::PyDict;
use stinger_py::stinger_py;

static INIT: Once = Once::new();

fn with_module<R>(f: impl FnOnce(Python<'_>, &Bound<'_, PyDict>) -> R) -> R {
    INIT.call_once(|| pyo3::append_to_inittab!(stinger_py));
    Python::attach(|py| {
        let globals = PyDict::new(py);
        globals.set_item("s", py.import("stinger_py").unwrap()).unwrap();
        f(py, &globals)
    })
}

fn eval<'py>(py: Python<'py>, globals: &Bound<'py, PyDict>, expr: &str) -> PyResult<Bound<'py, PyAny>> {
    py.eval(&CString::new(expr).unwrap(), Some(globals), None)
}

fn exec(py: Python<'_>, globals: &Bound<'_, PyDict>, code: &str) {
    py.run(&CString::new(code).unwrap(), Some(globals), None).unwrap();
}

#[test]
fn presets_round_trip_through_toml() {
    with_module(|py, g| {
        let names: Vec<String> = eval(py, g, "s.preset_names()").unwrap().extract().unwrap();
        assert!(names.iter().any(|n| n == "worm"));
        let text: String = eval(py, g, "s.preset('transport', 4)").unwrap().extract().unwrap();
        assert!(text.contains("seed = 4"));
        assert!(eval(py, g, "s.preset('nope')").unwrap_err().is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}

#[test]
fn run_and_replay_agree() {
    with_module(|py, g| {
        exec(
            py,
            g,
            "sc = s.preset('transport', 2)\nsc = sc.replace('duration = 30.0', 'duration = 5.0')\nmetrics, log = s.run(sc)\nverdict = s.replay(sc, log)",
        );
        let log: String = eval(py, g, "log").unwrap().extract().unwrap();
        assert!(!log.is_empty());
        assert!(eval(py, g, "isinstance(metrics, dict)").unwrap().extract::<bool>().unwrap());
        assert_eq!(eval(py, g, "verdict['verdict']").unwrap().extract::<String>().unwrap(), "identical");
        let again: String = eval(py, g, "s.run(sc)[1]").unwrap().extract().unwrap();
        assert_eq!(again, log);
    });
}

#[test]
fn behavior_matches_known_cells() {
    with_module(|py, g| {
        let (mode, site): (String, String) = eval(py, g, "s.behavior(0.1, 1000.0)").unwrap().extract().unwrap();
        assert_eq!(mode, "ICEP");
        assert!(site == "equator" || site == "metallic" || site == "none");
        assert!(eval(py, g, "s.behavior(-1.0, 1000.0)").is_err());
    });
}

#[test]
fn simulation_steps_and_takes_controls() {
    with_module(|py, g| {
        exec(
            py,
            g,
            "sim = s.Simulation(s.preset('transport', 1))\nsim.control({'type': 'inject_enzyme', 'inlet': 'left', 'c': 0.5})\nev = sim.step(5)",
        );
        let kinds: Vec<String> = eval(py, g, "[e['kind'] for e in ev]").unwrap().extract().unwrap();
        assert!(kinds.iter().any(|k| k == "EnzymeInjected"), "{kinds:?}");
        let t: f64 = eval(py, g, "sim.t").unwrap().extract().unwrap();
        assert!(t > 0.0);
        assert!(eval(py, g, "'t' in sim.snapshot()").unwrap().extract::<bool>().unwrap());
        let bad = eval(py, g, "sim.control({'type': 'warp'})").unwrap_err();
        assert!(bad.is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}

#[test]
fn activation_calibration_is_exposed() {
    with_module(|py, g| {
        let lambda: f64 =
            eval(py, g, "s.calibrate_activation(0.7, 300.0)['lambda_max_per_s']").unwrap().extract().unwrap();
        assert!((lambda - (-(0.3f64).ln() / 300.0)).abs() < 1e-9);
    });
}
