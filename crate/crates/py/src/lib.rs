//! Python bindings: landscapes, training, AutoNEB, the grid oracle and the
//! saddle-graph explorer.

use std::fs::File;

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use autoneb_core::autoneb::SaddleSource;
use autoneb_core::explorer::{ultrametric_bound as core_bound, StopReason};
use autoneb_core::io::profile_rows;
use autoneb_core::landscape::{
    init_params, init_uniform as core_init_uniform, make_double_well, permute_hidden_units as core_permute,
    train_minimum as core_train, two_cluster_dataset, xor_dataset, Activation, Dataset, GaussianWell, GaussianWells,
    Landscape as CoreLandscape, LossKind, MlpLandscape, MlpSpec, Targets, TrainConfig,
};
use autoneb_core::{AutoNebSchedule, Chain, ExploreConfig, GridSpec, LandscapeGraph, NebCycle, ParamVector};

fn err(e: autoneb_core::Error) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn vector(values: Vec<f64>) -> PyResult<ParamVector> {
    ParamVector::new(values).map_err(err)
}

fn activation(name: &str) -> PyResult<Activation> {
    match name {
        "tanh" => Ok(Activation::Tanh),
        "relu" => Ok(Activation::Relu),
        _ => Err(PyValueError::new_err(format!("unknown activation {name:?}"))),
    }
}

fn loss_kind(name: &str) -> PyResult<LossKind> {
    match name {
        "cross_entropy" => Ok(LossKind::CrossEntropy),
        "squared_error" => Ok(LossKind::SquaredError),
        _ => Err(PyValueError::new_err(format!("unknown loss kind {name:?}"))),
    }
}

enum Inner {
    Analytic(Box<dyn CoreLandscape>),
    Mlp(MlpLandscape),
}

/// A differentiable loss surface.
#[pyclass(frozen, module = "autoneb")]
struct Landscape {
    inner: Inner,
}

impl Landscape {
    fn core(&self) -> &dyn CoreLandscape {
        match &self.inner {
            Inner::Analytic(l) => l.as_ref(),
            Inner::Mlp(m) => m,
        }
    }

    fn as_mlp(&self) -> PyResult<&MlpLandscape> {
        match &self.inner {
            Inner::Mlp(m) => Ok(m),
            Inner::Analytic(_) => Err(PyValueError::new_err("this operation needs an MLP landscape")),
        }
    }

    fn from_mlp(layer_sizes: Vec<usize>, data: Dataset, act: &str, kind: LossKind) -> PyResult<Self> {
        let spec = MlpSpec::new(layer_sizes, activation(act)?, kind).map_err(err)?;
        Ok(Landscape { inner: Inner::Mlp(MlpLandscape::new(spec, data).map_err(err)?) })
    }
}

#[pymethods]
impl Landscape {
    /// `(1 - x²)² + 2 (y - x²)²`, minima at `(±1, 1)`, saddle value 1.
    #[staticmethod]
    fn double_well() -> Self {
        Landscape { inner: Inner::Analytic(Box::new(make_double_well())) }
    }

    /// Wells given as `(center, depth, width)` tuples.
    #[staticmethod]
    #[pyo3(signature = (wells, confinement = 0.1))]
    fn gaussian_wells(wells: Vec<(Vec<f64>, f64, f64)>, confinement: f64) -> PyResult<Self> {
        if wells.is_empty() || wells.iter().any(|w| w.0.len() != wells[0].0.len()) {
            return Err(PyValueError::new_err("need at least one well and equal-length centers"));
        }
        let wells = wells.into_iter().map(|(center, depth, width)| GaussianWell { center, depth, width }).collect();
        Ok(Landscape { inner: Inner::Analytic(Box::new(GaussianWells::new(wells, confinement))) })
    }

    /// Seeded 2D surface with `count` wells.
    #[staticmethod]
    fn random_wells(count: usize, seed: u64) -> PyResult<Self> {
        if count == 0 {
            return Err(PyValueError::new_err("count must be positive"));
        }
        Ok(Landscape { inner: Inner::Analytic(Box::new(GaussianWells::random_2d(count, seed))) })
    }

    /// MLP on explicit data. Targets are class indices for cross-entropy
    /// and one real value per row for squared error.
    #[staticmethod]
    #[pyo3(signature = (layer_sizes, inputs, targets, activation = "tanh", loss_kind = "squared_error"))]
    fn mlp(
        layer_sizes: Vec<usize>,
        inputs: Vec<Vec<f64>>,
        targets: Vec<f64>,
        activation: &str,
        loss_kind: &str,
    ) -> PyResult<Self> {
        let kind = self::loss_kind(loss_kind)?;
        let width = inputs.first().map_or(0, Vec::len);
        if inputs.iter().any(|r| r.len() != width) {
            return Err(PyValueError::new_err("input rows differ in length"));
        }
        let targets = match kind {
            LossKind::CrossEntropy => {
                if targets.iter().any(|t| *t < 0.0 || t.fract() != 0.0) {
                    return Err(PyValueError::new_err("class labels must be non-negative integers"));
                }
                Targets::Classes(targets.iter().map(|&t| t as usize).collect())
            }
            LossKind::SquaredError => Targets::Values { values: targets, width: 1 },
        };
        let data = Dataset::new(inputs.concat(), width, targets).map_err(err)?;
        Landscape::from_mlp(layer_sizes, data, activation, kind)
    }

    /// MLP on a CSV dataset (header row, features then target).
    #[staticmethod]
    #[pyo3(signature = (layer_sizes, path, activation = "tanh", loss_kind = "squared_error"))]
    fn mlp_from_csv(layer_sizes: Vec<usize>, path: &str, activation: &str, loss_kind: &str) -> PyResult<Self> {
        let kind = self::loss_kind(loss_kind)?;
        let file = File::open(path).map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
        let data = Dataset::from_csv(file, kind).map_err(err)?;
        Landscape::from_mlp(layer_sizes, data, activation, kind)
    }

    /// Squared-error MLP on the four XOR points.
    #[staticmethod]
    #[pyo3(signature = (layer_sizes, activation = "tanh"))]
    fn xor(layer_sizes: Vec<usize>, activation: &str) -> PyResult<Self> {
        Landscape::from_mlp(layer_sizes, xor_dataset(), activation, LossKind::SquaredError)
    }

    /// Cross-entropy MLP on a seeded two-cluster dataset.
    #[staticmethod]
    #[pyo3(signature = (layer_sizes, n = 200, seed = 7, activation = "tanh"))]
    fn two_clusters(layer_sizes: Vec<usize>, n: usize, seed: u64, activation: &str) -> PyResult<Self> {
        Landscape::from_mlp(layer_sizes, two_cluster_dataset(n, seed), activation, LossKind::CrossEntropy)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.core().dim()
    }

    fn loss(&self, params: Vec<f64>) -> PyResult<f64> {
        self.core().loss(&params).map_err(err)
    }

    /// `(loss, gradient)`.
    fn evaluate(&self, params: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
        let e = self.core().evaluate(&params).map_err(err)?;
        Ok((e.loss, e.gradient.into_inner()))
    }

    /// Seeded fan-in initialisation of an MLP.
    fn init_params(&self, seed: u64) -> PyResult<Vec<f64>> {
        Ok(init_params(self.as_mlp()?.spec(), seed).into_inner())
    }

    fn misclassified(&self, params: Vec<f64>) -> PyResult<usize> {
        let net = self.as_mlp()?;
        if params.len() != net.dim() {
            return Err(err(autoneb_core::Error::DimensionMismatch { expected: net.dim(), found: params.len() }));
        }
        Ok(net.misclassified(&params))
    }

    fn __repr__(&self) -> String {
        match &self.inner {
            Inner::Analytic(l) => format!("Landscape(analytic, dim={})", l.dim()),
            Inner::Mlp(m) => format!("Landscape(mlp {:?}, dim={})", m.spec().layer_sizes, m.dim()),
        }
    }
}

/// AutoNEB cycle plan and insertion settings. Without `cycles` the
/// fourteen-cycle default is used.
#[pyclass(module = "autoneb", skip_from_py_object)]
#[derive(Clone)]
struct Schedule {
    inner: AutoNebSchedule,
}

#[pymethods]
impl Schedule {
    #[new]
    #[pyo3(signature = (
        cycles = None,
        insert_threshold = 0.2,
        dense_count = 9,
        insert_cap = 4,
        initial_pivots = 3,
        momentum = 0.9,
        weight_decay = 1e-4,
        spring_constant = 0.0,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        cycles: Option<Vec<(usize, f64)>>,
        insert_threshold: f64,
        dense_count: usize,
        insert_cap: usize,
        initial_pivots: usize,
        momentum: f64,
        weight_decay: f64,
        spring_constant: f64,
    ) -> PyResult<Self> {
        let mut inner = AutoNebSchedule::default();
        if let Some(c) = cycles {
            inner.cycles = c.into_iter().map(|(steps, learning_rate)| NebCycle { steps, learning_rate }).collect();
        }
        inner.insert_threshold = insert_threshold;
        inner.dense_count = dense_count;
        inner.insert_cap = insert_cap;
        inner.initial_pivots = initial_pivots;
        inner.momentum = momentum;
        inner.weight_decay = weight_decay;
        inner.spring_constant = spring_constant;
        inner.validate().map_err(err)?;
        Ok(Schedule { inner })
    }

    #[getter]
    fn total_steps(&self) -> usize {
        self.inner.total_steps()
    }

    #[getter]
    fn cycles(&self) -> Vec<(usize, f64)> {
        self.inner.cycles.iter().map(|c| (c.steps, c.learning_rate)).collect()
    }
}

fn schedule_or_default(schedule: Option<&Schedule>) -> AutoNebSchedule {
    schedule.map_or_else(AutoNebSchedule::default, |s| s.inner.clone())
}

#[pyfunction]
fn init_uniform(dim: usize, low: f64, high: f64, seed: u64) -> PyResult<Vec<f64>> {
    Ok(core_init_uniform(dim, low, high, seed).map_err(err)?.into_inner())
}

/// Momentum descent from `init`; returns the lowest-loss iterate.
#[pyfunction]
#[pyo3(signature = (landscape, init, learning_rate, steps, momentum = 0.9, weight_decay = 1e-4))]
fn train_minimum(
    py: Python<'_>,
    landscape: &Landscape,
    init: Vec<f64>,
    learning_rate: f64,
    steps: usize,
    momentum: f64,
    weight_decay: f64,
) -> PyResult<Vec<f64>> {
    let cfg = TrainConfig { learning_rate, momentum, weight_decay, steps, seed: 0 };
    let init = vector(init)?;
    let out = py.detach(|| core_train(landscape.core(), &init, &cfg)).map_err(err)?;
    Ok(out.into_inner())
}

/// Connects `start` and `end`. Returns a dict with the saddle, the final
/// pivots, per-cycle maxima and the dense profile rows
/// `(cumulative_arc_length, alpha_global, loss, is_pivot)`.
#[pyfunction]
#[pyo3(signature = (landscape, start, end, schedule = None))]
fn auto_neb<'py>(
    py: Python<'py>,
    landscape: &Landscape,
    start: Vec<f64>,
    end: Vec<f64>,
    schedule: Option<&Schedule>,
) -> PyResult<Bound<'py, PyDict>> {
    let (a, b) = (vector(start)?, vector(end)?);
    let schedule = schedule_or_default(schedule);
    let out = py.detach(|| autoneb_core::auto_neb(&a, &b, landscape.core(), &schedule)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("saddle_loss", out.saddle.loss)?;
    d.set_item("saddle_params", out.saddle.params.as_slice().to_vec())?;
    d.set_item(
        "saddle_source",
        match out.saddle.source {
            SaddleSource::Pivot => "pivot",
            SaddleSource::DensePoint => "dense_point",
        },
    )?;
    d.set_item("pivots", out.chain.pivots().iter().map(|p| p.to_vec()).collect::<Vec<_>>())?;
    d.set_item("cycle_max_losses", out.cycle_max_losses.clone())?;
    d.set_item("pivot_counts", out.pivot_counts.clone())?;
    let rows: Vec<(f64, f64, f64, bool)> = profile_rows(&out.chain, &out.profile)
        .into_iter()
        .map(|r| (r.cumulative_arc_length, r.alpha_global, r.loss, r.is_pivot))
        .collect();
    d.set_item("profile", rows)?;
    Ok(d)
}

/// Exact minimax path on a square grid over `[low, high]²`. Returns
/// `(saddle_value, points)`.
#[pyfunction]
#[pyo3(signature = (landscape, start, end, low = -2.0, high = 2.0, resolution = 401))]
fn grid_mep(
    py: Python<'_>,
    landscape: &Landscape,
    start: Vec<f64>,
    end: Vec<f64>,
    low: f64,
    high: f64,
    resolution: usize,
) -> PyResult<(f64, Vec<(f64, f64)>)> {
    let spec = GridSpec::square(low, high, resolution);
    let path = py.detach(|| autoneb_core::grid_mep(landscape.core(), &spec, &start, &end)).map_err(err)?;
    Ok((path.saddle_value, path.points.iter().map(|p| (p[0], p[1])).collect()))
}

/// Relabels hidden layer `layer` (1-based) of an MLP parameter vector.
#[pyfunction]
fn permute_hidden_units(landscape: &Landscape, params: Vec<f64>, layer: usize, perm: Vec<usize>) -> PyResult<Vec<f64>> {
    let spec = landscape.as_mlp()?.spec();
    Ok(core_permute(&vector(params)?, spec, layer, &perm).map_err(err)?.into_inner())
}

/// Equal arc-length redistribution of interior pivots.
#[pyfunction]
fn redistribute(pivots: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let chain = Chain::new(pivots.into_iter().map(vector).collect::<PyResult<_>>()?).map_err(err)?;
    Ok(chain.redistribute().pivots().iter().map(|p| p.to_vec()).collect())
}

/// Minimax saddle between nodes `a` and `b` of a graph given by node
/// losses and `(u, v, saddle_loss)` edges.
#[pyfunction]
fn ultrametric_bound(min_losses: Vec<f64>, edges: Vec<(usize, usize, f64)>, a: usize, b: usize) -> PyResult<f64> {
    let mut g = LandscapeGraph::new();
    for l in min_losses {
        g.add_node(ParamVector::zeros(0), l);
    }
    for (u, v, w) in edges {
        g.insert_edge(u, v, w, None).map_err(err)?;
    }
    core_bound(&g, a, b).map_err(err)
}

/// Saddle graph over `minima`. Returns a dict with `edges`
/// (`(id, u, v, saddle_loss)`), `mst` edge ids, `runs`, `stop` and
/// `mst_max_history`.
#[pyfunction]
#[pyo3(signature = (landscape, minima, budget, stop_ratio = 0.1, seed = 0, schedule = None))]
fn explore<'py>(
    py: Python<'py>,
    landscape: &Landscape,
    minima: Vec<Vec<f64>>,
    budget: usize,
    stop_ratio: f64,
    seed: u64,
    schedule: Option<&Schedule>,
) -> PyResult<Bound<'py, PyDict>> {
    let minima: Vec<ParamVector> = minima.into_iter().map(vector).collect::<PyResult<_>>()?;
    let schedule = schedule_or_default(schedule);
    let cfg = ExploreConfig { budget, stop_ratio, seed };
    let out = py.detach(|| autoneb_core::explore(&minima, landscape.core(), &schedule, &cfg)).map_err(err)?;
    let d = PyDict::new(py);
    let edges: Vec<(usize, usize, usize, f64)> =
        out.graph.edges().iter().map(|e| (e.id, e.u, e.v, e.saddle_loss)).collect();
    d.set_item("edges", edges)?;
    d.set_item("mst", out.mst.clone())?;
    d.set_item("runs", out.runs)?;
    d.set_item(
        "stop",
        match out.stop {
            StopReason::AllPairsKnown => "all_pairs_known",
            StopReason::BudgetExhausted => "budget_exhausted",
            StopReason::SimilarSaddles => "similar_saddles",
            StopReason::AllEdgesIgnored => "all_edges_ignored",
        },
    )?;
    d.set_item("mst_max_history", out.mst_max_history.clone())?;
    Ok(d)
}

#[pymodule]
fn autoneb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Landscape>()?;
    m.add_class::<Schedule>()?;
    m.add_function(wrap_pyfunction!(init_uniform, m)?)?;
    m.add_function(wrap_pyfunction!(train_minimum, m)?)?;
    m.add_function(wrap_pyfunction!(auto_neb, m)?)?;
    m.add_function(wrap_pyfunction!(grid_mep, m)?)?;
    m.add_function(wrap_pyfunction!(permute_hidden_units, m)?)?;
    m.add_function(wrap_pyfunction!(redistribute, m)?)?;
    m.add_function(wrap_pyfunction!(ultrametric_bound, m)?)?;
    m.add_function(wrap_pyfunction!(explore, m)?)?;
    Ok(())
}
