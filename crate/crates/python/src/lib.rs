//! Python module `resilient_swarm`.

use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use swarm_core::consensus;
use swarm_core::graph::{self, CommParams, WeightedGraph};
use swarm_core::robustness;
use swarm_core::sim::{self, ScenarioConfig};
use swarm_core::spectral::{run_distributed_estimation, PowerIterationParams};
use swarm_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::UnknownPreset(_) => PyKeyError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Round-trips a serde value through `json.loads` to get plain Python objects.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn comm(rho: f64, big_r: f64, gamma_c: f64) -> PyResult<CommParams> {
    CommParams::new(rho, big_r, gamma_c).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (distance, rho=40.0, big_r=120.0, gamma_c=2.0))]
fn comm_strength(distance: f64, rho: f64, big_r: f64, gamma_c: f64) -> PyResult<f64> {
    Ok(graph::comm_strength(distance, &comm(rho, big_r, gamma_c)?))
}

/// Symmetric weighted communication graph.
#[pyclass(name = "Graph", module = "resilient_swarm", frozen)]
struct PyGraph {
    inner: WeightedGraph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(weights: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self { inner: WeightedGraph::from_rows(&weights).map_err(py_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (n, edges))]
    fn from_edges(n: usize, edges: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        Ok(Self { inner: WeightedGraph::from_edges(n, &edges).map_err(py_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (positions, rho=40.0, big_r=120.0, gamma_c=2.0))]
    fn from_positions(positions: Vec<Vec<f64>>, rho: f64, big_r: f64, gamma_c: f64) -> PyResult<Self> {
        let params = comm(rho, big_r, gamma_c)?;
        Ok(Self { inner: graph::build_comm_graph(&positions, &params) })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn weights(&self) -> Vec<Vec<f64>> {
        self.inner.weights().to_rows()
    }

    fn laplacian(&self) -> Vec<Vec<f64>> {
        graph::laplacian(&self.inner).to_rows()
    }

    #[pyo3(signature = (threshold=0.01))]
    fn is_connected(&self, threshold: f64) -> bool {
        self.inner.is_connected(threshold)
    }

    #[pyo3(signature = (threshold=0.01))]
    fn edges(&self, threshold: f64) -> Vec<(usize, usize, f64)> {
        self.inner.edges(threshold)
    }

    /// `(lambda2, fiedler_vector)` of the weighted Laplacian.
    fn fiedler(&self) -> (f64, Vec<f64>) {
        let pair = graph::algebraic_connectivity(&graph::laplacian(&self.inner));
        (pair.lambda2, pair.vector)
    }

    fn algebraic_connectivity(&self) -> f64 {
        self.fiedler().0
    }

    #[pyo3(signature = (threshold=0.01))]
    fn max_robustness(&self, threshold: f64) -> PyResult<usize> {
        robustness::max_robustness(&self.inner, threshold).map_err(py_err)
    }

    #[pyo3(signature = (r, threshold=0.01))]
    fn is_r_robust(&self, r: usize, threshold: f64) -> PyResult<bool> {
        robustness::is_r_robust(&self.inner, r, threshold).map_err(py_err)
    }

    #[pyo3(signature = (threshold=0.01, exact=false))]
    fn analyze(&self, py: Python<'_>, threshold: f64, exact: bool) -> PyResult<Py<PyAny>> {
        let report = robustness::analyze(&self.inner, threshold, exact).map_err(py_err)?;
        to_py(py, &report)
    }

    /// Runs the distributed node-count, `lambda2` and (optionally) Fiedler
    /// estimator and returns its outcome as a dict.
    #[pyo3(signature = (k_max=500, rho_tolerance=1e-3, alpha=None, fiedler=false))]
    fn estimate_lambda2(
        &self,
        py: Python<'_>,
        k_max: usize,
        rho_tolerance: f64,
        alpha: Option<f64>,
        fiedler: bool,
    ) -> PyResult<Py<PyAny>> {
        let params = PowerIterationParams { alpha, k_max, rho_tolerance };
        let out = run_distributed_estimation(&self.inner, &params, fiedler, false).map_err(py_err)?;
        to_py(py, &out)
    }

    fn to_edge_list(&self) -> String {
        swarm_core::edgelist::format_edge_list(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, edges={})", self.inner.n(), self.inner.edges(0.0).len())
    }
}

#[pyfunction]
fn parse_edge_list(text: &str) -> PyResult<PyGraph> {
    Ok(PyGraph { inner: swarm_core::edgelist::parse_edge_list(text).map_err(py_err)? })
}

/// `(kept_ids, removed_ids)` after trimming up to `f` values above and below `own`.
#[pyfunction]
fn wmsr_filter(own: f64, samples: Vec<(usize, f64)>, f: usize) -> (Vec<usize>, Vec<usize>) {
    let out = consensus::wmsr_filter(own, &samples, f);
    (out.kept, out.removed)
}

#[pyfunction]
fn certified_robustness(lambda2: f64) -> usize {
    robustness::certified_robustness_from_lambda2(lambda2)
}

#[pyclass(name = "ScenarioConfig", module = "resilient_swarm")]
struct PyScenarioConfig {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyScenarioConfig {
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        Ok(Self { inner: sim::preset(name).map_err(py_err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: ScenarioConfig::from_json_str(text).map_err(py_err)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: ScenarioConfig::load(path).map_err(py_err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
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
    fn steps(&self) -> usize {
        self.inner.steps
    }

    #[setter]
    fn set_steps(&mut self, steps: usize) -> PyResult<()> {
        let mut next = self.inner.clone();
        next.steps = steps;
        next.validate().map_err(py_err)?;
        self.inner = next;
        Ok(())
    }

    #[getter]
    fn n_agents(&self) -> usize {
        self.inner.n_agents
    }

    fn __repr__(&self) -> String {
        format!("ScenarioConfig(name={:?}, n_agents={}, steps={})", self.inner.name, self.inner.n_agents, self.inner.steps)
    }
}

#[pyclass(name = "RunResult", module = "resilient_swarm", frozen)]
struct PyRunResult {
    inner: sim::RunResult,
}

#[pymethods]
impl PyRunResult {
    fn summary(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.summary)
    }

    #[getter]
    fn adversaries(&self) -> Vec<usize> {
        self.inner.adversaries.clone()
    }

    fn lambda2(&self) -> Vec<f64> {
        self.inner.series.iter().map(|r| r.lambda2).collect()
    }

    fn final_positions(&self) -> Vec<[f64; 2]> {
        self.inner.final_positions.clone()
    }

    fn timeseries_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        sim::write_timeseries(&self.inner, &mut buf).map_err(py_err)?;
        String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Writes the run artifacts and returns their paths.
    fn write_outputs(&self, dir: PathBuf) -> PyResult<(PathBuf, PathBuf, PathBuf)> {
        let p = sim::write_outputs(&self.inner, dir).map_err(py_err)?;
        Ok((p.timeseries, p.summary, p.config_echo))
    }

    fn __len__(&self) -> usize {
        self.inner.series.len()
    }
}

#[pyfunction]
fn run_scenario(py: Python<'_>, config: &PyScenarioConfig) -> PyResult<PyRunResult> {
    let cfg = config.inner.clone();
    let inner = py.detach(move || sim::run_scenario(&cfg)).map_err(py_err)?;
    Ok(PyRunResult { inner })
}

#[pyfunction]
fn preset_names() -> Vec<&'static str> {
    sim::preset_names()
}

#[pymodule]
fn resilient_swarm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyScenarioConfig>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(comm_strength, m)?)?;
    m.add_function(wrap_pyfunction!(parse_edge_list, m)?)?;
    m.add_function(wrap_pyfunction!(wmsr_filter, m)?)?;
    m.add_function(wrap_pyfunction!(certified_robustness, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    Ok(())
}
