//! Python module `siren`: score tensors, split designs, estimates, bootstrap
//! intervals, reports and baselines. Structured results come back as plain
//! dicts (parsed from the JSON the core crate emits).

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

use siren_core::baselines::{baseline_report, item_bootstrap as core_item_bootstrap};
use siren_core::bootstrap::{contrast_ci, intervals, multiplier_draws};
use siren_core::estimator::estimate as core_estimate;
use siren_core::reporting::build_report;
use siren_core::score_store::TensorFormat;
use siren_core::selector::{jacobian as core_jacobian, select as core_select};
use siren_core::sim_lab::{sample_tensor, DgpSpec};
use siren_core::{
    BaselineMethod, BootstrapConfig, ContrastSpec, Error, ReportConfig, ScoreMatrix, SelectorKind, SelectorSpec,
    WeightRule,
};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &text)
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn selector_spec(kind: &str, tau: f64, threshold: f64) -> PyResult<SelectorSpec> {
    let kind: SelectorKind = kind.parse().map_err(py_err)?;
    let spec = SelectorSpec {
        kind,
        tau,
        instability_threshold: threshold,
    };
    spec.check().map_err(py_err)?;
    Ok(spec)
}

/// Items x artifacts scores for every (system, budget) cell.
#[pyclass(name = "ScoreTensor", module = "siren", frozen)]
struct PyScoreTensor {
    inner: siren_core::ScoreTensor,
}

#[pymethods]
impl PyScoreTensor {
    /// Reads a long-format CSV or JSON file; the format follows the extension.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let format = TensorFormat::from_path(&path);
        let inner = siren_core::ScoreTensor::load(&path, format).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        let inner = siren_core::ScoreTensor::from_csv_str(text).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = siren_core::ScoreTensor::from_json_str(text).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// One-cell tensor from `rows[item][artifact]`.
    #[staticmethod]
    #[pyo3(signature = (rows, system = "system", budget = "0"))]
    fn from_rows(rows: Vec<Vec<f64>>, system: &str, budget: &str) -> PyResult<Self> {
        let scores = ScoreMatrix::from_rows(&rows).map_err(py_err)?;
        let inner = siren_core::ScoreTensor::single_cell(system, budget, scores).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_items(&self) -> usize {
        self.inner.n_items()
    }

    #[getter]
    fn budget_grid(&self) -> Vec<String> {
        self.inner.budget_grid.clone()
    }

    /// `(system, budget)` pairs in tensor order.
    #[getter]
    fn cells(&self) -> Vec<(String, String)> {
        self.inner.cell_refs().into_iter().map(|c| (c.system, c.budget)).collect()
    }

    /// Invariant violations, empty when the tensor is well formed.
    fn validate(&self) -> Vec<String> {
        self.inner.validate().iter().map(|v| v.to_string()).collect()
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn to_csv(&self) -> PyResult<String> {
        self.inner.to_csv_string().map_err(py_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "ScoreTensor(n_items={}, cells={}, budgets={:?})",
            self.inner.n_items(),
            self.inner.cells.len(),
            self.inner.budget_grid
        )
    }
}

/// Repeated (scoring, held-out) partitions of the item pool.
#[pyclass(name = "SplitDesign", module = "siren", frozen)]
struct PySplitDesign {
    inner: siren_core::SplitDesign,
}

#[pymethods]
impl PySplitDesign {
    #[new]
    #[pyo3(signature = (n_items, n_splits = 10, rho_score = 0.5, weight_rule = "uniform", seed = 0))]
    fn new(n_items: usize, n_splits: usize, rho_score: f64, weight_rule: &str, seed: u64) -> PyResult<Self> {
        let rule: WeightRule = weight_rule.parse().map_err(py_err)?;
        let inner = siren_core::SplitDesign::generate(n_items, n_splits, rho_score, rule, seed).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_items(&self) -> usize {
        self.inner.n_items
    }

    #[getter]
    fn n_splits(&self) -> usize {
        self.inner.n_splits()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    /// `(scoring, held_out)` index lists per split.
    #[getter]
    fn splits(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        self.inner.splits.iter().map(|s| (s.score.clone(), s.eval.clone())).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "SplitDesign(n_items={}, n_splits={}, n_score={})",
            self.inner.n_items,
            self.inner.n_splits(),
            self.inner.n_score()
        )
    }
}

/// Selector weights over artifacts given scoring means.
#[pyfunction]
#[pyo3(signature = (scores, kind = "softmax", tau = 0.1))]
fn select(scores: Vec<f64>, kind: &str, tau: f64) -> PyResult<Vec<f64>> {
    let spec = selector_spec(kind, tau, 0.1)?;
    Ok(core_select(&spec, &scores).map_err(py_err)?.0)
}

/// Jacobian of the selector weights, `J[a][b] = dq_a / ds_b`.
#[pyfunction]
#[pyo3(signature = (scores, kind = "softmax", tau = 0.1))]
fn jacobian(scores: Vec<f64>, kind: &str, tau: f64) -> PyResult<Vec<Vec<f64>>> {
    let spec = selector_spec(kind, tau, 0.1)?;
    core_jacobian(&spec, &scores).map_err(py_err)
}

/// Point estimates and influence contributions per cell.
#[pyfunction]
#[pyo3(signature = (tensor, design, selector = "softmax", tau = 0.1, threshold = 0.1, include_psi = true))]
fn estimate<'py>(
    py: Python<'py>,
    tensor: &PyScoreTensor,
    design: &PySplitDesign,
    selector: &str,
    tau: f64,
    threshold: f64,
    include_psi: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = selector_spec(selector, tau, threshold)?;
    let est = py
        .detach(|| core_estimate(&tensor.inner, &design.inner, &spec))
        .map_err(py_err)?;
    to_py(py, &est.to_json(include_psi))
}

/// Multiplier-bootstrap intervals, band and optional contrasts.
///
/// Each contrast is a list of `system:budget:coef` terms.
#[pyfunction]
#[pyo3(signature = (tensor, design, selector = "softmax", tau = 0.1, threshold = 0.1, n_boot = 2000, alpha = 0.05, seed = 0, contrasts = Vec::new()))]
#[allow(clippy::too_many_arguments)]
fn bootstrap<'py>(
    py: Python<'py>,
    tensor: &PyScoreTensor,
    design: &PySplitDesign,
    selector: &str,
    tau: f64,
    threshold: f64,
    n_boot: usize,
    alpha: f64,
    seed: u64,
    contrasts: Vec<Vec<String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = selector_spec(selector, tau, threshold)?;
    let contrasts = contrasts
        .iter()
        .map(|terms| ContrastSpec::parse(terms))
        .collect::<Result<Vec<_>, _>>()
        .map_err(py_err)?;
    let cfg = BootstrapConfig::new(n_boot, alpha, seed);
    let result = py
        .detach(|| {
            let est = core_estimate(&tensor.inner, &design.inner, &spec)?;
            let draws = multiplier_draws(&est, &cfg)?;
            let mut out = intervals(&est, &draws, &cfg)?;
            for c in &contrasts {
                out.contrasts.push(contrast_ci(&est, &draws, c, &cfg)?);
            }
            Ok::<_, Error>(out)
        })
        .map_err(py_err)?;
    to_py(py, &result)
}

/// Full audited report. `config` is a JSON object with the same keys as the
/// CLI's `--config` file; missing keys take their defaults.
#[pyfunction]
#[pyo3(signature = (tensor, config = None))]
fn report<'py>(py: Python<'py>, tensor: &PyScoreTensor, config: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let cfg: ReportConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("bad report config: {e}")))?,
        None => ReportConfig::default(),
    };
    let text = py
        .detach(|| build_report(&tensor.inner, &cfg).map(|r| r.to_json_string()))
        .map_err(py_err)?;
    json_to_py(py, &text)
}

/// Winner-based baselines: `m1`, `m2`, `m3` or `m4`.
#[pyfunction]
#[pyo3(signature = (tensor, method, n_splits = 10, rho_score = 0.5, alpha = 0.05, seed = 0))]
fn baseline<'py>(
    py: Python<'py>,
    tensor: &PyScoreTensor,
    method: &str,
    n_splits: usize,
    rho_score: f64,
    alpha: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let method = match method.to_ascii_lowercase().as_str() {
        "m1" => BaselineMethod::M1,
        "m2" => BaselineMethod::M2,
        "m3" => BaselineMethod::M3,
        "m4" => BaselineMethod::M4,
        other => return Err(PyValueError::new_err(format!("unknown baseline `{other}`, expected m1..m4"))),
    };
    let out = py
        .detach(|| baseline_report(&tensor.inner, method, n_splits, rho_score, alpha, seed))
        .map_err(py_err)?;
    to_py(py, &out)
}

/// Nonparametric item bootstrap on a fixed design.
#[pyfunction]
#[pyo3(signature = (tensor, design, selector = "softmax", tau = 0.1, threshold = 0.1, n_resamples = 1000, alpha = 0.05, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn item_bootstrap<'py>(
    py: Python<'py>,
    tensor: &PyScoreTensor,
    design: &PySplitDesign,
    selector: &str,
    tau: f64,
    threshold: f64,
    n_resamples: usize,
    alpha: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = selector_spec(selector, tau, threshold)?;
    let out = py
        .detach(|| core_item_bootstrap(&tensor.inner, &design.inner, &spec, n_resamples, alpha, seed))
        .map_err(py_err)?;
    to_py(py, &out)
}

/// Synthetic one-cell Bernoulli benchmark with `k` equally spaced
/// artifact qualities ending at `top`.
#[pyfunction]
#[pyo3(signature = (n_items, k, top = 0.3, seed = 0))]
fn simulate(n_items: usize, k: usize, top: f64, seed: u64) -> PyResult<PyScoreTensor> {
    let inner = sample_tensor(&DgpSpec::equally_spaced(n_items, k, top, seed)).map_err(py_err)?;
    Ok(PyScoreTensor { inner })
}

#[pymodule]
fn siren(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", siren_core::reporting::TOOL_VERSION)?;
    m.add_class::<PyScoreTensor>()?;
    m.add_class::<PySplitDesign>()?;
    m.add_function(wrap_pyfunction!(select, m)?)?;
    m.add_function(wrap_pyfunction!(jacobian, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    m.add_function(wrap_pyfunction!(item_bootstrap, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
