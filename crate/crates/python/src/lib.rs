use pyo3::exceptions::{PyLookupError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use confcause_core::cbi::{cbi_rank as rank_predicates, cbi_root_causes};
use confcause_core::dataset::{load_dataset, Dataset as CoreDataset};
use confcause_core::effects::{diagnose as rank_paths, EffectsError};
use confcause_core::model::{learn as learn_model, CausalModel as CoreModel, LearnConfig};
use confcause_core::stats::fisher_z as fisher_z_closed_form;
use confcause_core::synth::{self, fault_rows, BenchConfig, ScmConfig};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Converts any serializable value into plain Python objects.
fn to_python<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Observation table with a role and kind for every column.
#[pyclass(name = "Dataset", module = "confcause", frozen)]
struct Dataset {
    inner: CoreDataset,
}

#[pymethods]
impl Dataset {
    /// Parses CSV text and a roles JSON document.
    #[new]
    fn new(table: &str, roles: &str) -> PyResult<Self> {
        let inner = load_dataset(table.as_bytes(), roles.as_bytes()).map_err(value_error)?;
        Ok(Dataset { inner })
    }

    #[staticmethod]
    fn from_files(table_path: &str, roles_path: &str) -> PyResult<Self> {
        let table = std::fs::read_to_string(table_path).map_err(value_error)?;
        let roles = std::fs::read_to_string(roles_path).map_err(value_error)?;
        Dataset::new(&table, &roles)
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names().into_iter().map(String::from).collect()
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.sample_count()
    }

    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        self.inner
            .column_by_name(name)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| PyLookupError::new_err(format!("unknown variable `{name}`")))
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut out = Vec::new();
        self.inner.write_table(&mut out).map_err(value_error)?;
        String::from_utf8(out).map_err(value_error)
    }

    fn roles(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_python(py, &self.inner.roles_json())
    }

    fn __len__(&self) -> usize {
        self.inner.sample_count()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(rows={}, variables={})", self.inner.sample_count(), self.inner.n_vars())
    }
}

/// Learned partial ancestral graph and its fully oriented resolution.
#[pyclass(name = "CausalModel", module = "confcause", frozen)]
struct CausalModel {
    inner: CoreModel,
}

#[pymethods]
impl CausalModel {
    fn directed(&self) -> Vec<(String, String)> {
        let g = &self.inner.admg;
        g.directed().iter().map(|&(a, b)| (g.name(a).to_string(), g.name(b).to_string())).collect()
    }

    fn bidirected(&self) -> Vec<(String, String)> {
        let g = &self.inner.admg;
        g.bidirected().iter().map(|&(a, b)| (g.name(a).to_string(), g.name(b).to_string())).collect()
    }

    fn to_dot(&self) -> String {
        self.inner.admg.to_dot()
    }

    fn admg(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_python(py, &self.inner.admg)
    }

    fn pag(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_python(py, &self.inner.pag)
    }

    fn decisions(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_python(py, &self.inner.decisions)
    }

    fn __repr__(&self) -> String {
        format!(
            "CausalModel(directed={}, bidirected={})",
            self.inner.admg.directed().len(),
            self.inner.admg.bidirected().len()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (data, alpha=0.05, theta_ratio=0.8, bins=5, max_cond_size=Some(3)))]
fn learn(
    py: Python<'_>,
    data: &Dataset,
    alpha: f64,
    theta_ratio: f64,
    bins: usize,
    max_cond_size: Option<usize>,
) -> PyResult<CausalModel> {
    let cfg = LearnConfig { alpha, theta_ratio, bins, max_cond_size, ..LearnConfig::default() };
    let inner = py.detach(|| learn_model(&data.inner, &cfg)).map_err(value_error)?;
    Ok(CausalModel { inner })
}

/// Top-k causal paths into `objective` with their root causes and effects;
/// None when no option reaches it.
#[pyfunction]
#[pyo3(signature = (data, model, objective, top_k=4))]
fn diagnose(py: Python<'_>, data: &Dataset, model: &CausalModel, objective: &str, top_k: usize) -> PyResult<Py<PyAny>> {
    match rank_paths(&data.inner, &model.inner.admg, objective, top_k) {
        Ok(d) => to_python(py, &d),
        Err(EffectsError::NoPathsFound(_)) => Ok(py.None()),
        Err(e) => Err(value_error(e)),
    }
}

/// Statistical-debugging baseline: options ranked by how well a predicate on
/// them predicts faulty rows of `objective`.
#[pyfunction]
#[pyo3(signature = (data, objective, top_k=4, ci_level=0.95, bins=5))]
fn cbi_rank(py: Python<'_>, data: &Dataset, objective: &str, top_k: usize, ci_level: f64, bins: usize) -> PyResult<Py<PyAny>> {
    let rows = fault_rows(&data.inner, objective).map_err(value_error)?;
    let mut labels = vec![false; data.inner.sample_count()];
    for r in rows {
        labels[r] = true;
    }
    let scores = rank_predicates(&data.inner, &labels, ci_level, bins).map_err(value_error)?;
    let root_causes = cbi_root_causes(&scores, top_k);
    to_python(py, &serde_json::json!({ "scores": scores, "root_causes": root_causes }))
}

/// Fisher-z statistic and two-sided p-value of a partial correlation.
#[pyfunction]
fn fisher_z(rho: f64, n: usize, k: usize) -> PyResult<(f64, f64)> {
    fisher_z_closed_form(rho, n, k).map_err(value_error)
}

/// Samples a random system; returns the data, the generating model and the
/// fault ground truth.
#[pyfunction]
#[pyo3(signature = (seed=0, samples=2000, options=10, metrics=8, objectives=2, density=0.2, noise=1.0, levels=3, hidden=0))]
#[allow(clippy::too_many_arguments)]
fn generate(
    py: Python<'_>,
    seed: u64,
    samples: usize,
    options: usize,
    metrics: usize,
    objectives: usize,
    density: f64,
    noise: f64,
    levels: usize,
    hidden: usize,
) -> PyResult<(Dataset, Py<PyAny>, Py<PyAny>)> {
    let mut cfg = ScmConfig::new(options, metrics, objectives, density, noise, seed);
    cfg.option_levels = Some(levels);
    cfg.boolean_objectives = true;
    cfg.hidden_confounders = hidden;
    let scm = synth::generate_scm(&cfg).map_err(value_error)?;
    let inner = scm.sample_with_seed(samples, seed);
    let truth = synth::curate_ground_truth(&scm, &inner, objectives).map_err(value_error)?;
    Ok((Dataset { inner }, to_python(py, &scm)?, to_python(py, &truth)?))
}

/// Both methods over `instances` random systems.
#[pyfunction]
#[pyo3(signature = (seed=0, instances=10, samples=2000, top_k=4))]
fn benchmark(py: Python<'_>, seed: u64, instances: usize, samples: usize, top_k: usize) -> PyResult<Py<PyAny>> {
    let cfg = BenchConfig { seed, instances, samples, top_k, ..BenchConfig::default() };
    let report = py.detach(|| synth::run_benchmark(&cfg)).map_err(value_error)?;
    to_python(py, &report)
}

#[pymodule]
pub fn confcause(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<CausalModel>()?;
    m.add_function(wrap_pyfunction!(learn, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    m.add_function(wrap_pyfunction!(cbi_rank, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_z, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    Ok(())
}
