//! Python bindings: networks, power flow, simulation and labelling, PMU
//! placement and the security classifiers.

use std::path::PathBuf;

use dsa_core::dynamics::{initialize_dynamics, simulate_case, SimulationTrace, SimulatorConfig};
use dsa_core::ml::{train_classifier, Algorithm, ClassifierModel, Dataset, Hyperparameters};
use dsa_core::network::{self, solve_power_flow, Dispatch, NetworkModel, PowerFlowOptions, PowerFlowSolution};
use dsa_core::pmu::{solve_placement, verify_observability, PlacementOptions, PlacementProblem};
use dsa_core::scenario::{generate_contingencies, Contingency as CoreContingency, ContingencyOptions};
use dsa_core::security;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(dsa, DsaError, PyException, "Raised for any error reported by the core library.");

fn err(e: dsa_core::Error) -> PyErr {
    DsaError::new_err(e.to_string())
}

#[pyclass(name = "Network", frozen)]
struct PyNetwork(NetworkModel);

#[pymethods]
impl PyNetwork {
    /// Loads a network JSON file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        network::load_network(path).map(PyNetwork).map_err(err)
    }

    /// One of the bundled cases, e.g. "ieee118.json" or "smib.json".
    #[staticmethod]
    fn bundled(name: &str) -> PyResult<Self> {
        network::bundled(name).map(PyNetwork).map_err(err)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name.clone()
    }

    #[getter]
    fn bus_ids(&self) -> Vec<u32> {
        self.0.buses.iter().map(|b| b.id).collect()
    }

    #[getter]
    fn n_branches(&self) -> usize {
        self.0.branches.len()
    }

    #[getter]
    fn n_machines(&self) -> usize {
        self.0.machines.len()
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn __repr__(&self) -> String {
        format!("Network({:?}, {} buses)", self.0.name, self.0.n_buses())
    }
}

#[pyclass(name = "PowerFlowSolution", frozen)]
struct PyPowerFlow(PowerFlowSolution);

#[pymethods]
impl PyPowerFlow {
    #[getter]
    fn v_mag(&self) -> Vec<f64> {
        self.0.v_mag.clone()
    }

    /// Radians.
    #[getter]
    fn v_ang(&self) -> Vec<f64> {
        self.0.v_ang.clone()
    }

    #[getter]
    fn max_mismatch(&self) -> f64 {
        self.0.max_mismatch
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations
    }
}

/// Newton-Raphson power flow of the model's own dispatch, loads scaled by
/// `load_scale`.
#[pyfunction]
#[pyo3(signature = (net, load_scale = 1.0, tolerance = 1e-8))]
fn power_flow(net: &PyNetwork, load_scale: f64, tolerance: f64) -> PyResult<PyPowerFlow> {
    let dispatch = Dispatch {
        load_scale,
        ..Dispatch::base(&net.0)
    };
    let opts = PowerFlowOptions {
        tolerance,
        ..PowerFlowOptions::default()
    };
    solve_power_flow(&net.0, &dispatch, &opts).map(PyPowerFlow).map_err(err)
}

#[pyclass(name = "Contingency", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyContingency {
    id: usize,
    faulted_lines: Vec<usize>,
    fault_fraction: f64,
    t_fault: f64,
    t_clear: f64,
}

#[pymethods]
impl PyContingency {
    #[new]
    #[pyo3(signature = (faulted_lines, t_fault = 5.0, t_clear = 5.0 + 5.0 / 60.0, fault_fraction = 0.1, id = 0))]
    fn new(faulted_lines: Vec<usize>, t_fault: f64, t_clear: f64, fault_fraction: f64, id: usize) -> Self {
        PyContingency {
            id,
            faulted_lines,
            fault_fraction,
            t_fault,
            t_clear,
        }
    }

    fn __repr__(&self) -> String {
        format!("Contingency(id={}, lines={:?}, t_clear={})", self.id, self.faulted_lines, self.t_clear)
    }
}

impl From<&CoreContingency> for PyContingency {
    fn from(c: &CoreContingency) -> Self {
        PyContingency {
            id: c.id,
            faulted_lines: c.faulted_lines.clone(),
            fault_fraction: c.fault_fraction,
            t_fault: c.t_fault,
            t_clear: c.t_clear,
        }
    }
}

impl PyContingency {
    fn core(&self) -> CoreContingency {
        CoreContingency {
            id: self.id,
            faulted_lines: self.faulted_lines.clone(),
            fault_fraction: self.fault_fraction,
            t_fault: self.t_fault,
            t_clear: self.t_clear,
        }
    }
}

/// `n_c` random N-1 ... N-k_max line-fault contingencies.
#[pyfunction]
#[pyo3(signature = (net, n_c, k_max = 6, seed = 0))]
fn contingencies(net: &PyNetwork, n_c: usize, k_max: usize, seed: u64) -> PyResult<Vec<PyContingency>> {
    let list = generate_contingencies(&net.0, n_c, k_max, seed, &ContingencyOptions::default()).map_err(err)?;
    Ok(list.iter().map(PyContingency::from).collect())
}

#[pyclass(name = "Trace", frozen)]
struct PyTrace(SimulationTrace);

#[pymethods]
impl PyTrace {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times.clone()
    }

    /// Degrees, `[sample][machine]`.
    #[getter]
    fn rotor_angle(&self) -> Vec<Vec<f64>> {
        self.0.rotor_angle.clone()
    }

    /// Per-unit, `[sample][bus]`.
    #[getter]
    fn v_mag(&self) -> Vec<Vec<f64>> {
        self.0.v_mag.clone()
    }

    #[getter]
    fn terminated_early(&self) -> bool {
        self.0.terminated_early
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Simulates one contingency from a solved operating point.
#[pyfunction]
#[pyo3(signature = (net, pf, contingency, t_end = None))]
fn simulate(net: &PyNetwork, pf: &PyPowerFlow, contingency: &PyContingency, t_end: Option<f64>) -> PyResult<PyTrace> {
    let dynamic = initialize_dynamics(&net.0, &pf.0).map_err(err)?;
    let mut cfg = SimulatorConfig::default();
    if let Some(t) = t_end {
        cfg.t_end = t;
    }
    simulate_case(&dynamic, &contingency.core(), &cfg).map(PyTrace).map_err(err)
}

/// TSI in percent for a maximum angle separation in degrees.
#[pyfunction]
fn tsi_from_delta(delta_max: f64) -> f64 {
    security::tsi_from_delta(delta_max)
}

/// Security label of a trace as a dict: secure, tsi_percent, delta_max and
/// the number of voltage violations.
#[pyfunction]
#[pyo3(signature = (trace, tsi_threshold = security::DEFAULT_TSI_THRESHOLD))]
fn label<'py>(py: Python<'py>, trace: &PyTrace, tsi_threshold: f64) -> PyResult<Bound<'py, PyDict>> {
    let l = security::label_case(&trace.0, tsi_threshold).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("secure", l.secure)?;
    d.set_item("tsi_percent", l.tsi_percent)?;
    d.set_item("delta_max", l.delta_max)?;
    d.set_item("voltage_violations", l.voltage_violations.len())?;
    Ok(d)
}

/// Minimum-cost PMU placement; returns (bus ids, proven optimal).
#[pyfunction]
#[pyo3(signature = (net, zero_injection = false))]
fn placement(py: Python<'_>, net: &PyNetwork, zero_injection: bool) -> PyResult<(Vec<u32>, bool)> {
    let problem = PlacementProblem::from_network(&net.0, zero_injection);
    let sol = py
        .detach(|| solve_placement(&problem, &PlacementOptions::default()))
        .map_err(err)?;
    Ok((problem.placed_ids(&sol.placed), sol.proven_optimal))
}

/// Whether PMUs at `buses` observe the whole network.
#[pyfunction]
#[pyo3(signature = (net, buses, zero_injection = false))]
fn is_observable(net: &PyNetwork, buses: Vec<u32>, zero_injection: bool) -> PyResult<bool> {
    let problem = PlacementProblem::from_network(&net.0, zero_injection);
    let placed = problem.placement_from_ids(&buses).map_err(err)?;
    Ok(verify_observability(&problem, &placed).map_err(err)?.observable)
}

#[pyclass(name = "Classifier", frozen)]
struct PyClassifier(ClassifierModel);

#[pymethods]
impl PyClassifier {
    #[getter]
    fn algorithm(&self) -> String {
        self.0.algorithm.to_string()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.0.converged()
    }

    /// Hyperparameters chosen during training, as JSON text.
    #[getter]
    fn hyperparameters(&self) -> String {
        self.0.hyperparameters.to_string()
    }

    /// Labels (1 secure, 0 insecure) for each row.
    fn predict(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<u8>> {
        self.0.predict_all(&rows).map_err(err)
    }

    fn score(&self, rows: Vec<Vec<f64>>, labels: Vec<u8>) -> PyResult<f64> {
        let ds = Dataset::from_rows(rows, labels).map_err(err)?;
        Ok(dsa_core::ml::evaluate(&self.0, &ds).map_err(err)?.accuracy)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ClassifierModel::from_json(text, "<string>").map(PyClassifier).map_err(err)
    }
}

/// Trains one of "cart", "rf", "svm", "mlp". Grid searches select on the
/// validation rows; `hyperparameters` is optional JSON overriding defaults.
#[pyfunction]
#[pyo3(signature = (algorithm, x, y, x_val = None, y_val = None, seed = 0, hyperparameters = None))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    algorithm: &str,
    x: Vec<Vec<f64>>,
    y: Vec<u8>,
    x_val: Option<Vec<Vec<f64>>>,
    y_val: Option<Vec<u8>>,
    seed: u64,
    hyperparameters: Option<&str>,
) -> PyResult<PyClassifier> {
    let alg: Algorithm = algorithm.parse().map_err(err)?;
    let hyper: Hyperparameters = match hyperparameters {
        Some(text) => serde_json::from_str(text).map_err(|e| DsaError::new_err(format!("hyperparameters: {e}")))?,
        None => Hyperparameters::default(),
    };
    let train = Dataset::from_rows(x, y).map_err(err)?;
    let validation = match (x_val, y_val) {
        (Some(vx), Some(vy)) => Dataset::from_rows(vx, vy).map_err(err)?,
        (None, None) => train.subset(&[]),
        _ => return Err(DsaError::new_err("x_val and y_val must be given together")),
    };
    py.detach(|| train_classifier(alg, &train, &validation, &hyper, seed))
        .map(PyClassifier)
        .map_err(err)
}

#[pymodule]
fn dsa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DsaError", m.py().get_type::<DsaError>())?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyPowerFlow>()?;
    m.add_class::<PyContingency>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyClassifier>()?;
    m.add_function(wrap_pyfunction!(power_flow, m)?)?;
    m.add_function(wrap_pyfunction!(contingencies, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(tsi_from_delta, m)?)?;
    m.add_function(wrap_pyfunction!(label, m)?)?;
    m.add_function(wrap_pyfunction!(placement, m)?)?;
    m.add_function(wrap_pyfunction!(is_observable, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
