//! Python bindings: instance I/O, the branch-and-cut solver, the adaptive
//! alpha search, the flow-game generator, and the brute-force oracle.
//! Result documents cross the boundary as plain dicts/lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use nashcut::adaptive::{self, SearchParams, Variant};
use nashcut::bnc::{self, Limits};
use nashcut::flowgame::{self, GenParams};
use nashcut::model;
use nashcut::oracle;

fn value_to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<PyObject> {
    Ok(match v {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_py(py),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py(py)
            } else {
                n.as_f64().unwrap().into_py(py)
            }
        }
        serde_json::Value::String(s) => s.into_py(py),
        serde_json::Value::Array(items) => {
            let list = PyList::empty_bound(py);
            for item in items {
                list.append(value_to_py(py, item)?)?;
            }
            list.into_py(py)
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new_bound(py);
            for (k, item) in map {
                dict.set_item(k, value_to_py(py, item)?)?;
            }
            dict.into_py(py)
        }
    })
}

fn to_py_doc<T: serde::Serialize>(py: Python<'_>, doc: &T) -> PyResult<PyObject> {
    let v = serde_json::to_value(doc).map_err(|e| PyValueError::new_err(e.to_string()))?;
    value_to_py(py, &v)
}

fn parse_variant(name: &str) -> PyResult<Variant> {
    match name {
        "multitree" => Ok(Variant::Multitree),
        "reuse_tree" => Ok(Variant::ReuseTree),
        "reuse_tree_cuts" => Ok(Variant::ReuseTreeCuts),
        other => Err(PyValueError::new_err(format!(
            "unknown variant {other:?}; expected multitree, reuse_tree, or reuse_tree_cuts"
        ))),
    }
}

fn limits(time_limit: f64, node_limit: Option<u64>) -> Limits {
    Limits {
        time: time_limit,
        nodes: node_limit.unwrap_or(u64::MAX),
        ..Limits::default()
    }
}

/// A mixed-integer Nash game instance.
#[pyclass(name = "Game")]
#[derive(Clone)]
struct PyGame {
    inner: model::Game,
}

#[pymethods]
impl PyGame {
    /// Parse a game from its JSON document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        model::load_instance(text)
            .map(|inner| PyGame { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        model::serialize(&self.inner)
    }

    #[getter]
    fn n_players(&self) -> usize {
        self.inner.n_players()
    }

    #[getter]
    fn n_vars(&self) -> usize {
        self.inner.n_vars()
    }

    #[getter]
    fn mode(&self) -> &'static str {
        match self.inner.mode {
            model::GameMode::Nep => "nep",
            model::GameMode::Gnep => "gnep",
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Game(mode={:?}, n_players={}, n_vars={})",
            self.mode(),
            self.n_players(),
            self.n_vars()
        )
    }
}

/// A pricing flow-game instance; encodes into a `Game`.
#[pyclass(name = "FlowInstance")]
#[derive(Clone)]
struct PyFlowInstance {
    inner: flowgame::FlowInstance,
}

#[pymethods]
impl PyFlowInstance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        flowgame::load_flow_instance(text)
            .map(|inner| PyFlowInstance { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        flowgame::serialize_flow_instance(&self.inner)
    }

    fn encode(&self) -> PyResult<PyGame> {
        self.inner
            .encode()
            .map(|inner| PyGame { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn n_players(&self) -> usize {
        self.inner.n_players()
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.inner.n_edges()
    }

    /// Decode a solver witness into (flows, activations, prices).
    fn decode(&self, x: Vec<f64>) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        self.inner.decode(&x)
    }

    /// The four weak-implementation conditions for decoded flows and prices.
    fn check_implementation(&self, flows: Vec<Vec<f64>>, prices: Vec<f64>) -> [bool; 4] {
        self.inner.check_implementation(&flows, &prices)
    }
}

fn broadcast(values: Vec<f64>, n: usize, what: &str) -> PyResult<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; n]),
        len if len == n => Ok(values),
        len => Err(PyValueError::new_err(format!(
            "{what} has {len} entries but the game has {n} players"
        ))),
    }
}

/// Solve one instance for a fixed (alpha, beta) guarantee. Returns the result
/// document as a dict; status is one of ne_found, no_ne_exists, time_limit,
/// node_limit, cut_limit.
#[pyfunction]
#[pyo3(signature = (game, alpha, beta=vec![0.0], time_limit=3600.0, node_limit=None))]
fn solve(
    py: Python<'_>,
    game: &PyGame,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    time_limit: f64,
    node_limit: Option<u64>,
) -> PyResult<PyObject> {
    let n = game.inner.n_players();
    let alpha = broadcast(alpha, n, "alpha")?;
    let beta = broadcast(beta, n, "beta")?;
    let r = bnc::solve(&game.inner, &alpha, &beta, &limits(time_limit, node_limit))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py_doc(py, &r.document())
}

/// Binary-search the minimal uniform alpha admitting an (alpha, 0)-NE.
/// Returns the search document as a dict; alpha_hi is None when unbounded.
#[pyfunction]
#[pyo3(signature = (game, variant="multitree", alpha0=10.0, factor=10.0, tol=0.1,
                    max_growth=20, time_limit=3600.0, node_limit=None))]
#[allow(clippy::too_many_arguments)]
fn best_alpha(
    py: Python<'_>,
    game: &PyGame,
    variant: &str,
    alpha0: f64,
    factor: f64,
    tol: f64,
    max_growth: u32,
    time_limit: f64,
    node_limit: Option<u64>,
) -> PyResult<PyObject> {
    let params = SearchParams {
        alpha0,
        factor,
        tol,
        max_growth,
        limits: limits(time_limit, node_limit),
    };
    let r = adaptive::best_alpha(&game.inner, &params, parse_variant(variant)?)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py_doc(py, &r.document())
}

/// Generate a random flow-game instance.
#[pyfunction]
#[pyo3(signature = (seed=0, n_nodes=3, n_edges=4, n_players=2, demand_range=(1, 2),
                    mu_range=(0, 4), single_source_identical_mu=false))]
fn generate_flow(
    seed: u64,
    n_nodes: usize,
    n_edges: usize,
    n_players: usize,
    demand_range: (i64, i64),
    mu_range: (i64, i64),
    single_source_identical_mu: bool,
) -> PyResult<PyFlowInstance> {
    flowgame::generate(&GenParams {
        n_nodes,
        n_edges,
        n_players,
        demand_range,
        mu_range,
        seed,
        single_source_identical_mu,
    })
    .map(|inner| PyFlowInstance { inner })
    .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Brute-force oracle report for an all-integer, desk-scale instance.
#[pyfunction]
#[pyo3(signature = (game, alpha=vec![1.0], beta=vec![0.0]))]
fn verify(py: Python<'_>, game: &PyGame, alpha: Vec<f64>, beta: Vec<f64>) -> PyResult<PyObject> {
    let n = game.inner.n_players();
    let alpha = broadcast(alpha, n, "alpha")?;
    let beta = broadcast(beta, n, "beta")?;
    let report = oracle::oracle_report(&game.inner, &alpha, &beta)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py_doc(py, &report)
}

/// Check whether a profile is an (alpha, beta)-equilibrium; returns
/// (is_ne, violators).
#[pyfunction]
#[pyo3(signature = (game, x, alpha, beta=vec![0.0]))]
fn check_ne(
    game: &PyGame,
    x: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
) -> PyResult<(bool, Vec<usize>)> {
    let n = game.inner.n_players();
    let alpha = broadcast(alpha, n, "alpha")?;
    let beta = broadcast(beta, n, "beta")?;
    if x.len() != game.inner.n_vars() {
        return Err(PyValueError::new_err(format!(
            "profile has {} entries but the game has {} variables",
            x.len(),
            game.inner.n_vars()
        )));
    }
    let c = bnc::check_ne(&game.inner, &x, &alpha, &beta);
    Ok((c.is_ne, c.violators))
}

#[pymodule]
fn nashcut_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGame>()?;
    m.add_class::<PyFlowInstance>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(best_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(generate_flow, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(check_ne, m)?)?;
    Ok(())
}
