//! Python bindings. Structured values (commands, events, state, reports)
//! cross the boundary as plain dicts and lists in the same JSON shapes the
//! message API and event log use.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Mutex;

use icon_core::kernel::cluster;
use icon_core::kernel::mock::KMEANS_MAX_ITERS;
use icon_core::metrics::tasks::{run_task as run_script, study_notebook, TaskKind};
use icon_core::metrics::{self, parse_log, write_log};
use icon_core::notebook::{classify_cell as classify, Notebook};
use icon_core::session::Session;
use icon_core::workspace::{Command, EngineConfig, Mode};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(icon, IconError, PyException, "Raised with (code, message) when the engine rejects an operation.");

fn icon_err(code: &str, message: impl ToString) -> PyErr {
    IconError::new_err((code.to_string(), message.to_string()))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Accepts either a JSON string or a JSON-compatible Python object.
fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = match obj.extract::<String>() {
        Ok(s) => s,
        Err(_) => obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?,
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    mode.parse().map_err(|e: String| PyValueError::new_err(e))
}

fn config(dwell_ms: Option<u64>) -> PyResult<EngineConfig> {
    let mut config = EngineConfig::from_env().map_err(PyValueError::new_err)?;
    if let Some(d) = dwell_ms {
        config.dwell_ms = d;
    }
    Ok(config)
}

#[pyclass(name = "Notebook", module = "icon", frozen)]
struct PyNotebook {
    inner: Notebook,
}

#[pymethods]
impl PyNotebook {
    #[staticmethod]
    #[pyo3(signature = (text, location = "<string>"))]
    fn from_json(text: &str, location: &str) -> PyResult<Self> {
        Notebook::from_json(text, location)
            .map(|inner| PyNotebook { inner })
            .map_err(|e| icon_err("Schema", e))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Notebook::load(&path)
            .map(|inner| PyNotebook { inner })
            .map_err(|e| icon_err("Schema", e))
    }

    /// The bundled 14-window study notebook.
    #[staticmethod]
    fn study() -> Self {
        PyNotebook { inner: study_notebook() }
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn window_count(&self) -> usize {
        self.inner.windows.len()
    }

    #[getter]
    fn cell_count(&self) -> usize {
        self.inner.cell_count()
    }

    /// One dict per cell: window, id, kind and source.
    fn cells<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let list = PyList::empty(py);
        for w in &self.inner.windows {
            for c in &w.cells {
                let d = PyDict::new(py);
                d.set_item("window", &w.id.0)?;
                d.set_item("id", c.id.as_str())?;
                d.set_item("kind", format!("{:?}", c.kind()))?;
                d.set_item("source", c.source())?;
                list.append(d)?;
            }
        }
        Ok(list)
    }

    fn __repr__(&self) -> String {
        format!(
            "Notebook(id={:?}, windows={}, cells={})",
            self.inner.id,
            self.inner.windows.len(),
            self.inner.cell_count()
        )
    }
}

/// A live session on the built-in kernel.
#[pyclass(name = "Session", module = "icon")]
struct PySession {
    inner: Mutex<Session>,
}

impl PySession {
    fn wrap(session: Session) -> Self {
        PySession {
            inner: Mutex::new(session),
        }
    }

    fn with<R>(&self, f: impl FnOnce(&mut Session) -> R) -> R {
        let mut guard = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        f(&mut guard)
    }
}

#[pymethods]
impl PySession {
    #[new]
    #[pyo3(signature = (notebook, mode = "unified", dwell_ms = None))]
    fn new(notebook: &PyNotebook, mode: &str, dwell_ms: Option<u64>) -> PyResult<Self> {
        Ok(PySession::wrap(Session::open(
            notebook.inner.clone(),
            parse_mode(mode)?,
            config(dwell_ms)?,
        )))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Session::load(&path)
            .map(PySession::wrap)
            .map_err(|e| icon_err("Schema", e))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.with(|s| s.save(&path)).map_err(|e| icon_err("Io", e))
    }

    /// Applies a command (dict or JSON string) at time `t` in ms, or at
    /// the wall-clock offset if `t` is omitted. Returns the new events.
    #[pyo3(signature = (command, t = None))]
    fn dispatch<'py>(&self, py: Python<'py>, command: &Bound<'py, PyAny>, t: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
        let command: Command = from_py(command)?;
        let events = self
            .with(|s| match t {
                Some(t) => s.dispatch(&command, t),
                None => s.dispatch_now(&command),
            })
            .map_err(|e| icon_err(e.code(), &e))?;
        to_py(py, &events)
    }

    fn state_hash(&self) -> String {
        self.with(|s| s.state_hash())
    }

    fn state<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let state = self.with(|s| s.state().clone());
        to_py(py, &state)
    }

    fn log<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let log = self.with(|s| s.log().to_vec());
        to_py(py, &log)
    }

    /// The event log as JSON lines.
    fn log_text(&self) -> String {
        self.with(|s| write_log(s.log()))
    }

    #[getter]
    fn mode(&self) -> String {
        self.with(|s| format!("{:?}", s.state().mode).to_lowercase())
    }

    #[getter]
    fn artifact_count(&self) -> usize {
        self.with(|s| s.state().artifacts.len())
    }
}

#[pyfunction]
fn classify_cell(source: &str) -> String {
    format!("{:?}", classify(source))
}

#[pyfunction]
#[pyo3(signature = (points, k, max_iters = KMEANS_MAX_ITERS))]
fn kmeans(points: Vec<Vec<f64>>, k: usize, max_iters: usize) -> PyResult<Vec<u32>> {
    cluster::kmeans(&points, k, max_iters).map_err(|e| icon_err("Cluster", e))
}

#[pyfunction]
fn knn_graph(points: Vec<Vec<f64>>, k: usize) -> PyResult<Vec<(usize, usize)>> {
    cluster::knn_graph(&points, k).map_err(|e| icon_err("Cluster", e))
}

/// Rebuilds a session from a JSON-lines log over `notebook`.
#[pyfunction]
fn replay(log: &str, notebook: &PyNotebook) -> PyResult<PySession> {
    let events = parse_log(log).map_err(|e| icon_err("CorruptLog", e))?;
    metrics::replay(&events, &notebook.inner)
        .map(PySession::wrap)
        .map_err(|e| icon_err("CorruptLog", e))
}

#[pyfunction]
#[pyo3(signature = (log, ground_truth = None))]
fn compute_metrics<'py>(py: Python<'py>, log: &str, ground_truth: Option<&Bound<'py, PyAny>>) -> PyResult<Bound<'py, PyAny>> {
    let events = parse_log(log).map_err(|e| icon_err("CorruptLog", e))?;
    let truth: BTreeMap<String, serde_json::Value> = match ground_truth {
        Some(t) => from_py(t)?,
        None => BTreeMap::new(),
    };
    let report = metrics::compute_metrics(&events, &truth).map_err(|e| icon_err("NoCompletionMarker", e))?;
    to_py(py, &report)
}

/// Runs a scripted task; returns a dict with the log (JSON lines), the
/// metrics report, answers, ground truth and final state hash.
#[pyfunction]
#[pyo3(signature = (kind, mode, dwell_ms = None))]
fn run_task<'py>(py: Python<'py>, kind: &str, mode: &str, dwell_ms: Option<u64>) -> PyResult<Bound<'py, PyDict>> {
    let kind: TaskKind = kind.parse().map_err(|e: String| PyValueError::new_err(e))?;
    let outcome = run_script(kind, parse_mode(mode)?, config(dwell_ms)?).map_err(|e| icon_err("ScriptStepFailed", e))?;
    let d = PyDict::new(py);
    d.set_item("log", write_log(&outcome.log))?;
    d.set_item("report", to_py(py, &outcome.report)?)?;
    d.set_item("answers", to_py(py, &outcome.answers)?)?;
    d.set_item("ground_truth", to_py(py, &outcome.ground_truth)?)?;
    d.set_item("state_hash", outcome.state_hash)?;
    Ok(d)
}

#[pymodule]
fn icon(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("IconError", m.py().get_type::<IconError>())?;
    m.add_class::<PyNotebook>()?;
    m.add_class::<PySession>()?;
    m.add_function(wrap_pyfunction!(classify_cell, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(knn_graph, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(compute_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(run_task, m)?)?;
    Ok(())
}
