//! Python bindings. Matrices cross the boundary as nested lists of floats.

use conan_core::{self as core, AttributedGraph, BarycenterOptions, EncoderConfig, EncoderWeights, FgwParams};
use ndarray::{Array1, Array2, ArrayView2};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: core::Error) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn matrix(rows: Vec<Vec<f64>>, name: &str) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
        return Err(PyValueError::new_err(format!("{name}[{i}] has length {}, expected {d}", r.len())));
    }
    Ok(Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect()).expect("checked shape"))
}

fn rows(m: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Attributed graph `(H, A, omega)`; `omega` defaults to uniform.
#[pyclass(name = "Graph", module = "conan", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: AttributedGraph,
}

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (h, a, omega=None))]
    fn new(h: Vec<Vec<f64>>, a: Vec<Vec<f64>>, omega: Option<Vec<f64>>) -> PyResult<Self> {
        let g = AttributedGraph::new(matrix(h, "H")?, matrix(a, "A")?, omega.map(Array1::from)).map_err(to_py)?;
        Ok(Self { inner: g })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self {
            inner: core::io::graph_from_json(&v).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> String {
        core::io::graph_to_json(&self.inner).to_string()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter(H)]
    fn features(&self) -> Vec<Vec<f64>> {
        rows(self.inner.features())
    }

    #[getter(A)]
    fn structure(&self) -> Vec<Vec<f64>> {
        rows(self.inner.structure())
    }

    #[getter]
    fn omega(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    /// Node `i` of the result is node `perm[i]` of this graph.
    fn permute(&self, perm: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: core::permute_nodes(&self.inner, &perm).map_err(to_py)?,
        })
    }

    /// Violations as strings; empty when the graph is valid.
    fn validate(&self) -> Vec<String> {
        let r = core::validate_graph(&self.inner);
        if r.is_pass() {
            Vec::new()
        } else {
            r.to_string().split("; ").map(str::to_owned).collect()
        }
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, d={})", self.inner.n(), self.inner.d())
    }
}

#[allow(clippy::too_many_arguments)]
fn params(
    alpha: f64,
    epsilon: f64,
    loss: &str,
    inner_iters: usize,
    sinkhorn_iters: usize,
    outer_iters: usize,
    tol: f64,
) -> PyResult<FgwParams> {
    let p = FgwParams {
        alpha,
        epsilon,
        loss: loss.parse().map_err(to_py)?,
        inner_iters,
        sinkhorn_iters,
        outer_iters,
        tol,
        ..FgwParams::default()
    };
    p.validate().map_err(to_py)?;
    Ok(p)
}

/// Entropic FGW between two graphs.
#[pyfunction]
#[pyo3(signature = (g1, g2, alpha=0.5, epsilon=0.1, loss="square", inner_iters=30, sinkhorn_iters=50, tol=1e-6, return_coupling=false))]
#[allow(clippy::too_many_arguments)]
fn fgw_distance<'py>(
    py: Python<'py>,
    g1: &PyGraph,
    g2: &PyGraph,
    alpha: f64,
    epsilon: f64,
    loss: &str,
    inner_iters: usize,
    sinkhorn_iters: usize,
    tol: f64,
    return_coupling: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params(alpha, epsilon, loss, inner_iters, sinkhorn_iters, 1, tol)?;
    let (a, b) = (g1.inner.clone(), g2.inner.clone());
    let r = py.detach(move || core::entropic_fgw(&a, &b, &p)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("cost", r.cost)?;
    out.set_item("value_entropic", r.value_entropic)?;
    out.set_item("inner_iterations", r.inner_iterations)?;
    out.set_item("converged", r.converged)?;
    out.set_item("marginal_err", r.marginal_err)?;
    if return_coupling {
        out.set_item("coupling", rows(r.coupling.pi.view()))?;
    }
    Ok(out)
}

/// FGW barycenter; returns `(graph, info)`.
#[pyfunction]
#[pyo3(signature = (graphs, n_bar=None, lambdas=None, alpha=0.5, epsilon=0.1, loss="square", inner_iters=30, sinkhorn_iters=50, outer_iters=10, tol=1e-6))]
#[allow(clippy::too_many_arguments)]
fn fgw_barycenter<'py>(
    py: Python<'py>,
    graphs: Vec<PyRef<'py, PyGraph>>,
    n_bar: Option<usize>,
    lambdas: Option<Vec<f64>>,
    alpha: f64,
    epsilon: f64,
    loss: &str,
    inner_iters: usize,
    sinkhorn_iters: usize,
    outer_iters: usize,
    tol: f64,
) -> PyResult<(PyGraph, Bound<'py, PyDict>)> {
    let p = params(alpha, epsilon, loss, inner_iters, sinkhorn_iters, outer_iters, tol)?;
    let gs: Vec<AttributedGraph> = graphs.iter().map(|g| g.inner.clone()).collect();
    let opts = BarycenterOptions {
        n_bar,
        lambdas,
        ..BarycenterOptions::default()
    };
    let r = py.detach(move || core::barycenter(&gs, &opts, &p)).map_err(to_py)?;
    let info = PyDict::new(py);
    info.set_item("outer_iterations", r.outer_iterations)?;
    info.set_item("converged", r.converged)?;
    info.set_item("objective_trace", r.objective_trace.clone())?;
    info.set_item(
        "couplings",
        r.couplings.iter().map(|c| rows(c.pi.view())).collect::<Vec<_>>(),
    )?;
    Ok((PyGraph { inner: r.graph }, info))
}

/// Log-domain Sinkhorn for `min <C, pi> - eps H(pi)`.
#[pyfunction]
#[pyo3(signature = (cost, mu1, mu2, epsilon, max_iters=1000, tol=1e-9))]
fn sinkhorn<'py>(
    py: Python<'py>,
    cost: Vec<Vec<f64>>,
    mu1: Vec<f64>,
    mu2: Vec<f64>,
    epsilon: f64,
    max_iters: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let c = matrix(cost, "cost")?;
    let (m1, m2) = (Array1::from(mu1), Array1::from(mu2));
    let r = core::sinkhorn_lse(c.view(), m1.view(), m2.view(), epsilon, max_iters, tol).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("pi", rows(r.coupling.pi.view()))?;
    out.set_item("marginal_err", r.marginal_err)?;
    out.set_item("iterations", r.iterations)?;
    out.set_item("converged", r.converged)?;
    Ok(out)
}

type Frame = (Vec<u32>, Vec<Vec<f64>>);

/// Frames of a multi-frame XYZ text as `(atomic_numbers, coordinates)`.
#[pyfunction]
fn parse_xyz(text: &str) -> PyResult<Vec<Frame>> {
    let confs = core::parse_xyz(text).map_err(to_py)?;
    Ok(confs
        .iter()
        .map(|c| (c.atomic_numbers().to_vec(), rows(c.coordinates().view())))
        .collect())
}

/// Forward pass with seeded weights. `xyz` holds the conformers.
#[pyfunction]
#[pyo3(signature = (node_features, edges, xyz, seed, edge_features=None, alpha=0.5, epsilon=0.1, d=16, layers=3))]
#[allow(clippy::too_many_arguments)]
fn conan_forward<'py>(
    py: Python<'py>,
    node_features: Vec<Vec<f64>>,
    edges: Vec<(usize, usize)>,
    xyz: &str,
    seed: u64,
    edge_features: Option<Vec<Vec<f64>>>,
    alpha: f64,
    epsilon: f64,
    d: usize,
    layers: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let x = matrix(node_features, "node_features")?;
    let ef = edge_features.map(|e| matrix(e, "edge_features")).transpose()?;
    let config = EncoderConfig {
        d,
        layers,
        gat_layers: layers,
        d0: x.ncols(),
        edge_dim: ef.as_ref().map_or(0, |e| e.ncols()),
        ..EncoderConfig::default()
    };
    let mol = core::Molecule2D::new(x, edges, ef).map_err(to_py)?;
    let confs = core::parse_xyz(xyz).map_err(to_py)?;
    let p = FgwParams {
        alpha,
        epsilon,
        ..FgwParams::default()
    };
    p.validate().map_err(to_py)?;
    let r = py
        .detach(move || {
            let enc = EncoderWeights::from_seed(seed, &config);
            core::conan_forward(&mol, &confs, &enc, &p)
        })
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("y_hat", r.y_hat)?;
    out.set_item("h2d", r.h2d.to_vec())?;
    out.set_item("h3d", rows(r.h3d_per_conf.t()))?;
    out.set_item("h_bc", r.h_bc.to_vec())?;
    out.set_item("barycenter", PyGraph { inner: r.barycenter.graph })?;
    Ok(out)
}

#[pymodule]
fn conan(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(fgw_distance, m)?)?;
    m.add_function(wrap_pyfunction!(fgw_barycenter, m)?)?;
    m.add_function(wrap_pyfunction!(sinkhorn, m)?)?;
    m.add_function(wrap_pyfunction!(parse_xyz, m)?)?;
    m.add_function(wrap_pyfunction!(conan_forward, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
