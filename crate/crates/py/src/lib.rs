//! Python bindings for the hardcore-tree engine.
//!
//! Activities are passed as `lam` since `lambda` is a Python keyword.
//! Boundary conditions are strings: `empty`, `full`, `const:K`, or a list
//! of boundary spins.

use hardcore_tree::criticality::{self, CriticalOptions, DEFAULT_PROBE_OFFSETS};
use hardcore_tree::dynamics::{self, Graph};
use hardcore_tree::maps::{self, ScalarMap};
use hardcore_tree::recursion::{self, TrajectoryStatus};
use hardcore_tree::{exact, BoundaryCondition, TreeShape};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: hardcore_tree::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[derive(FromPyObject)]
enum BcArg {
    Name(String),
    Spins(Vec<u8>),
}

fn boundary(bc: BcArg) -> PyResult<BoundaryCondition> {
    match bc {
        BcArg::Spins(s) => Ok(BoundaryCondition::PerVertex(s)),
        BcArg::Name(s) => match s.as_str() {
            "empty" => Ok(BoundaryCondition::Empty),
            "full" => Ok(BoundaryCondition::Full),
            other => other
                .strip_prefix("const:")
                .and_then(|k| k.parse().ok())
                .map(BoundaryCondition::Constant)
                .ok_or_else(|| PyValueError::new_err(format!("bad boundary condition `{other}`"))),
        },
    }
}

/// Model parameters `(b, C, λ)`.
#[pyclass(frozen, skip_from_py_object, name = "ModelParams")]
#[derive(Clone)]
struct PyModelParams(hardcore_tree::ModelParams);

#[pymethods]
impl PyModelParams {
    #[new]
    fn new(b: u32, c: u32, lam: f64) -> PyResult<Self> {
        hardcore_tree::ModelParams::new(b, c, lam).map(PyModelParams).map_err(err)
    }
    #[getter]
    fn b(&self) -> u32 {
        self.0.b()
    }
    #[getter]
    fn c(&self) -> u32 {
        self.0.capacity()
    }
    #[getter]
    fn lam(&self) -> f64 {
        self.0.lambda()
    }
    fn __repr__(&self) -> String {
        format!("ModelParams(b={}, c={}, lam={})", self.0.b(), self.0.capacity(), self.0.lambda())
    }
}

/// Law of the root spin.
#[pyclass(frozen, skip_from_py_object, get_all, name = "RootLaw")]
#[derive(Clone)]
struct PyRootLaw {
    probs: Vec<f64>,
    level: u32,
}

impl PyRootLaw {
    fn from_core(law: &hardcore_tree::RootLaw) -> Self {
        PyRootLaw { probs: law.probs(), level: law.level() }
    }
}

#[pymethods]
impl PyRootLaw {
    fn tv_distance(&self, other: &PyRootLaw) -> PyResult<f64> {
        if self.probs.len() != other.probs.len() {
            return Err(PyValueError::new_err("laws have different capacities"));
        }
        Ok(0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }
    fn __repr__(&self) -> String {
        format!("RootLaw(probs={:?}, level={})", self.probs, self.level)
    }
}

#[pyclass(frozen, skip_from_py_object, get_all, name = "Trajectory")]
struct PyTrajectory {
    status: String,
    m: f64,
    big_m: f64,
    levels: usize,
    scalars: Vec<f64>,
    last: PyRootLaw,
}

#[pyclass(frozen, skip_from_py_object, get_all, name = "FixedPoint")]
#[derive(Clone)]
struct PyFixedPoint {
    value: f64,
    derivative: f64,
    stability: String,
}

#[pyclass(frozen, skip_from_py_object, get_all, name = "PhasePoint")]
#[derive(Clone)]
struct PyPhasePoint {
    lam: f64,
    delta: f64,
    coexists: bool,
    iterations: u64,
    m: f64,
    big_m: f64,
    determined: bool,
}

impl From<criticality::PhasePoint> for PyPhasePoint {
    fn from(p: criticality::PhasePoint) -> Self {
        PyPhasePoint {
            lam: p.lambda,
            delta: p.delta,
            coexists: p.coexists,
            iterations: p.iterations,
            m: p.m,
            big_m: p.big_m,
            determined: p.determined,
        }
    }
}

#[pyclass(frozen, skip_from_py_object, get_all, name = "CriticalResult")]
struct PyCriticalResult {
    lambda_cr: Option<f64>,
    bracket: Option<(f64, f64)>,
    order: String,
    jump_estimate: Option<f64>,
    consistent: bool,
    points: Vec<PyPhasePoint>,
    diagnostics: Vec<String>,
}

#[pyclass(frozen, skip_from_py_object, get_all, name = "SampleEstimate")]
struct PySampleEstimate {
    probs: Vec<f64>,
    std_errors: Vec<f64>,
    replica_laws: Vec<Vec<f64>>,
    samples: u64,
    seed: u64,
}

#[pyclass(frozen, skip_from_py_object, get_all, name = "NetworkStats")]
struct PyNetworkStats {
    occupancy: Vec<(Vec<u32>, f64)>,
    blocking_per_node: Vec<f64>,
    blocking_overall: f64,
    events: u64,
    max_flux_imbalance: f64,
    seed: u64,
}

fn calls(s: &[u8]) -> Vec<u32> {
    s.iter().map(|&k| k as u32).collect()
}

/// Root law of the depth-`depth` tree by dynamic programming.
#[pyfunction]
#[pyo3(signature = (b, depth, c, lam, bc = BcArg::Name("empty".into())))]
fn root_marginal(b: u32, depth: u32, c: u32, lam: f64, bc: BcArg) -> PyResult<PyRootLaw> {
    let params = hardcore_tree::ModelParams::new(b, c, lam).map_err(err)?;
    let shape = TreeShape::new(b, depth).map_err(err)?;
    exact::root_marginal(&shape, &boundary(bc)?, &params).map(|l| PyRootLaw::from_core(&l)).map_err(err)
}

/// Root law by exhaustive enumeration (small trees only).
#[pyfunction]
#[pyo3(signature = (b, depth, c, lam, bc = BcArg::Name("empty".into())))]
fn brute_force_marginal(b: u32, depth: u32, c: u32, lam: f64, bc: BcArg) -> PyResult<PyRootLaw> {
    let params = hardcore_tree::ModelParams::new(b, c, lam).map_err(err)?;
    let shape = TreeShape::new(b, depth).map_err(err)?;
    exact::brute_force_marginal(&shape, &boundary(bc)?, &params).map(|l| PyRootLaw::from_core(&l)).map_err(err)
}

/// Iterates the level recursion from a homogeneous boundary.
#[pyfunction]
#[pyo3(signature = (params, bc = BcArg::Name("empty".into()), tol = 1e-12, max_even_levels = 100_000))]
fn iterate(params: &PyModelParams, bc: BcArg, tol: f64, max_even_levels: u64) -> PyResult<PyTrajectory> {
    let p = &params.0;
    let seed = recursion::seed_law(&boundary(bc)?, p.capacity()).map_err(err)?;
    let t = recursion::iterate(&seed, p, tol, max_even_levels).map_err(err)?;
    let status = match t.status {
        TrajectoryStatus::ConvergedUnique => "converged_unique",
        TrajectoryStatus::ConvergedPeriod2 => "converged_period2",
        TrajectoryStatus::MaxIterations => "max_iterations",
    };
    Ok(PyTrajectory {
        status: status.into(),
        m: t.m,
        big_m: t.big_m,
        levels: t.laws.len() - 1,
        scalars: t.laws.iter().map(|l| recursion::tracked_scalar(l, p)).collect(),
        last: PyRootLaw::from_core(t.laws.last().unwrap()),
    })
}

/// Fixed points of `J`, `J2`, `FKappa` or `HGamma`.
#[pyfunction]
#[pyo3(signature = (map, b = 2, lam = 1.0, kappa = 0.0, gamma = 1.0, tol = 1e-13))]
fn fixed_points(map: &str, b: u32, lam: f64, kappa: f64, gamma: f64, tol: f64) -> PyResult<Vec<PyFixedPoint>> {
    let m = match map.to_ascii_lowercase().as_str() {
        "j" => ScalarMap::J { b, lambda: lam },
        "j2" => ScalarMap::J2 { b, lambda: lam },
        "fkappa" => ScalarMap::FKappa { b, lambda: lam, kappa },
        "hgamma" => ScalarMap::HGamma { gamma },
        other => return Err(PyValueError::new_err(format!("unknown map `{other}`"))),
    };
    let set = maps::fixed_points(&m, tol).map_err(err)?;
    Ok(set
        .points
        .iter()
        .map(|p| PyFixedPoint {
            value: p.value,
            derivative: p.derivative,
            stability: format!("{:?}", p.stability).to_lowercase(),
        })
        .collect())
}

#[pyfunction]
fn lambda_cr1(b: u32) -> PyResult<f64> {
    maps::lambda_cr1(b).map_err(err)
}

#[pyfunction]
fn epsilon_b(b: u32, lam: f64) -> PyResult<f64> {
    maps::epsilon_b(b, lam).map_err(err)
}

/// Gap between the empty and full boundary limits at one activity.
#[pyfunction]
#[pyo3(signature = (params, gap_tol = 1e-8))]
fn delta_lambda(params: &PyModelParams, gap_tol: f64) -> PyResult<PyPhasePoint> {
    let opts = CriticalOptions { gap_tol, ..Default::default() };
    criticality::delta_lambda(&params.0, &opts).map(Into::into).map_err(err)
}

/// Critical activity by bracketing, with the order of the transition.
#[pyfunction]
#[pyo3(signature = (b, c, bracket = None, rel_tol = 1e-7))]
fn find_lambda_cr(py: Python<'_>, b: u32, c: u32, bracket: Option<(f64, f64)>, rel_tol: f64) -> PyResult<PyCriticalResult> {
    let r = py
        .detach(|| criticality::find_lambda_cr(b, c, bracket, rel_tol, &CriticalOptions::default()))
        .map_err(err)?;
    Ok(PyCriticalResult {
        lambda_cr: r.lambda_cr,
        bracket: r.lambda_cr_bracket,
        order: format!("{:?}", r.order).to_lowercase(),
        jump_estimate: r.jump_estimate,
        consistent: r.consistent,
        points: r.points.into_iter().map(Into::into).collect(),
        diagnostics: r.diagnostics,
    })
}

/// `first`, `second` or `undetermined`.
#[pyfunction]
fn classify_order(b: u32, c: u32, lambda_cr: f64) -> PyResult<String> {
    let r = criticality::classify_order(b, c, lambda_cr, &DEFAULT_PROBE_OFFSETS, &CriticalOptions::default())
        .map_err(err)?;
    Ok(format!("{:?}", r.order).to_lowercase())
}

/// Root law from the coupled heat-bath sampler.
#[pyfunction]
#[pyo3(signature = (b, depth, c, lam, bc = BcArg::Name("empty".into()), sweeps = 10_000, burn_in = 1_000, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn sample_root_marginal(
    py: Python<'_>,
    b: u32,
    depth: u32,
    c: u32,
    lam: f64,
    bc: BcArg,
    sweeps: u64,
    burn_in: u64,
    seed: u64,
) -> PyResult<PySampleEstimate> {
    let params = hardcore_tree::ModelParams::new(b, c, lam).map_err(err)?;
    let shape = TreeShape::new(b, depth).map_err(err)?;
    let bc = boundary(bc)?;
    let est = py
        .detach(|| dynamics::sample_root_marginal(&shape, &bc, &params, sweeps, burn_in, seed))
        .map_err(err)?;
    Ok(PySampleEstimate {
        probs: est.law.probs(),
        std_errors: est.std_errors,
        replica_laws: est.replica_laws.to_vec(),
        samples: est.samples,
        seed: est.seed,
    })
}

/// Loss network on `n` vertices with the given edges.
#[pyfunction]
#[pyo3(signature = (n, edges, c, lam, horizon = 1e5, seed = 0))]
fn simulate_loss_network(
    py: Python<'_>,
    n: usize,
    edges: Vec<(usize, usize)>,
    c: u32,
    lam: f64,
    horizon: f64,
    seed: u64,
) -> PyResult<PyNetworkStats> {
    let g = Graph::from_edges(n, &edges).map_err(err)?;
    let stats = py.detach(|| dynamics::simulate_loss_network(&g, c, lam, horizon, seed)).map_err(err)?;
    Ok(PyNetworkStats {
        occupancy: stats.occupancy.iter().map(|(s, p)| (calls(s), *p)).collect(),
        blocking_per_node: stats.blocking_per_node(),
        blocking_overall: stats.blocking_overall(),
        events: stats.events,
        max_flux_imbalance: stats.max_flux_imbalance(),
        seed,
    })
}

/// Stationary law `∝ λ^{Σ calls}` of the loss network.
#[pyfunction]
fn product_form_law(n: usize, edges: Vec<(usize, usize)>, c: u32, lam: f64) -> PyResult<Vec<(Vec<u32>, f64)>> {
    let g = Graph::from_edges(n, &edges).map_err(err)?;
    let law = dynamics::product_form_law(&g, c, lam).map_err(err)?;
    Ok(law.iter().map(|(s, p)| (calls(s), *p)).collect())
}

#[pymodule]
fn pyhardcore(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyRootLaw>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyFixedPoint>()?;
    m.add_class::<PyPhasePoint>()?;
    m.add_class::<PyCriticalResult>()?;
    m.add_class::<PySampleEstimate>()?;
    m.add_class::<PyNetworkStats>()?;
    m.add_function(wrap_pyfunction!(root_marginal, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_marginal, m)?)?;
    m.add_function(wrap_pyfunction!(iterate, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_points, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_cr1, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_b, m)?)?;
    m.add_function(wrap_pyfunction!(delta_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(find_lambda_cr, m)?)?;
    m.add_function(wrap_pyfunction!(classify_order, m)?)?;
    m.add_function(wrap_pyfunction!(sample_root_marginal, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_loss_network, m)?)?;
    m.add_function(wrap_pyfunction!(product_form_law, m)?)?;
    Ok(())
}
