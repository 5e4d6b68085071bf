//! Python bindings for `gossip_core`.
//!
//! Agents are 1-based. States may be given by label (`str`) or by 1-based
//! position (`int`).

use std::sync::Arc;

use gossip_core::analysis;
use gossip_core::cli::check_experiment;
use gossip_core::config::{self, ExperimentConfig};
use gossip_core::graph::{
    recurrent_classes, stationary_distribution_with, DirectedNetwork, SelectionMatrix,
    StationaryDistribution, StationarySolver,
};
use gossip_core::simulator::{self, SimulationConfig, SimulationTrace};
use gossip_core::world::{self, LikelihoodTable, Prior, StateSpace, WorldModel};
use pyo3::create_exception;
use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(pygossip, GossipError, PyValueError);

fn err(e: gossip_core::Error) -> PyErr {
    GossipError::new_err(e.to_string())
}

fn agent_index(agent: usize, n: usize) -> PyResult<usize> {
    if agent == 0 || agent > n {
        return Err(PyIndexError::new_err(format!(
            "agent {agent} not in 1..={n}"
        )));
    }
    Ok(agent - 1)
}

fn one_based(nodes: &[usize]) -> Vec<usize> {
    nodes.iter().map(|i| i + 1).collect()
}

fn state_index(states: &StateSpace, state: &Bound<'_, PyAny>) -> PyResult<usize> {
    if let Ok(label) = state.extract::<String>() {
        return states
            .index_of(&label)
            .ok_or_else(|| PyValueError::new_err(format!("unknown state {label:?}")));
    }
    let k: usize = state.extract()?;
    if k == 0 || k > states.len() {
        return Err(PyIndexError::new_err(format!(
            "state {k} not in 1..={}",
            states.len()
        )));
    }
    Ok(k - 1)
}

/// Directed observation network; an edge `(j, i)` means agent `i` observes `j`.
#[pyclass(name = "Network", module = "pygossip", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyNetwork {
    inner: DirectedNetwork,
}

#[pymethods]
impl PyNetwork {
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(Self {
            inner: DirectedNetwork::from_one_based(n, &edges).map_err(err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner
            .edges()
            .iter()
            .map(|&(s, t)| (s + 1, t + 1))
            .collect()
    }

    fn in_neighbors(&self, agent: usize) -> PyResult<Vec<usize>> {
        let i = agent_index(agent, self.inner.n())?;
        Ok(one_based(self.inner.in_neighbors(i)))
    }

    fn is_strongly_connected(&self) -> bool {
        self.inner.is_strongly_connected()
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(n={}, edges={})",
            self.inner.n(),
            self.inner.edges().len()
        )
    }
}

/// Row-stochastic selection matrix supported on each agent's observed set.
#[pyclass(name = "Selection", module = "pygossip", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PySelection {
    inner: SelectionMatrix,
}

#[pymethods]
impl PySelection {
    #[staticmethod]
    fn uniform(net: &PyNetwork) -> Self {
        Self {
            inner: SelectionMatrix::uniform(&net.inner),
        }
    }

    #[staticmethod]
    fn custom(net: &PyNetwork, rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: SelectionMatrix::custom(&net.inner, &rows).map_err(err)?,
        })
    }

    fn dense(&self) -> Vec<Vec<f64>> {
        self.inner.dense()
    }

    /// Closed communicating classes (1-based) and the transient agents.
    fn recurrent_classes(&self) -> (Vec<Vec<usize>>, Vec<usize>) {
        let rs = recurrent_classes(&self.inner);
        (
            rs.classes.iter().map(|c| one_based(c)).collect(),
            one_based(&rs.transient()),
        )
    }

    #[pyo3(signature = (solver = "auto"))]
    fn stationary_distribution(&self, solver: &str) -> PyResult<Vec<f64>> {
        let solver = match solver {
            "auto" => StationarySolver::Auto,
            "direct" => StationarySolver::Direct,
            "power" => StationarySolver::Power,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown solver {other:?}; expected auto, direct or power"
                )))
            }
        };
        Ok(stationary_distribution_with(&self.inner, solver)
            .map_err(err)?
            .into_vec())
    }

    /// `max_j |(pi P)_j - pi_j|`.
    fn residual(&self, pi: Vec<f64>) -> PyResult<f64> {
        if pi.len() != self.inner.n() {
            return Err(PyValueError::new_err("pi has the wrong length"));
        }
        Ok(StationaryDistribution::from_vec(pi)
            .map_err(err)?
            .residual(&self.inner))
    }
}

/// States, common prior and per-agent likelihood tables (`tables[agent][state][signal]`).
#[pyclass(name = "World", module = "pygossip", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyWorld {
    inner: Arc<WorldModel>,
}

#[pymethods]
impl PyWorld {
    #[new]
    #[pyo3(signature = (states, true_state, tables, prior = None))]
    fn new(
        states: Vec<String>,
        true_state: String,
        tables: Vec<Vec<Vec<f64>>>,
        prior: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let truth = states
            .iter()
            .position(|s| *s == true_state)
            .ok_or_else(|| {
                PyValueError::new_err(format!("true state {true_state:?} is not a state"))
            })?;
        let k = states.len();
        let space = StateSpace::new(states, truth).map_err(err)?;
        let prior = match prior {
            Some(p) => Prior::new(p).map_err(err)?,
            None => Prior::uniform(k),
        };
        let tables = tables
            .into_iter()
            .map(LikelihoodTable::new)
            .collect::<gossip_core::Result<Vec<_>>>()
            .map_err(err)?;
        Ok(Self {
            inner: Arc::new(WorldModel::new(space, prior, tables).map_err(err)?),
        })
    }

    #[getter]
    fn states(&self) -> Vec<String> {
        self.inner.states().labels().to_vec()
    }

    #[getter]
    fn true_state(&self) -> String {
        let s = self.inner.states();
        s.label(s.true_state()).to_string()
    }

    #[getter]
    fn num_agents(&self) -> usize {
        self.inner.num_agents()
    }

    #[getter]
    fn prior(&self) -> Vec<f64> {
        self.inner.prior().as_slice().to_vec()
    }

    /// `D_KL(l_agent(.|a) || l_agent(.|b))` in nats.
    fn divergence(
        &self,
        agent: usize,
        a: &Bound<'_, PyAny>,
        b: &Bound<'_, PyAny>,
    ) -> PyResult<f64> {
        let i = agent_index(agent, self.inner.num_agents())?;
        let states = self.inner.states();
        Ok(self
            .inner
            .divergence(i, state_index(states, a)?, state_index(states, b)?))
    }

    /// Witnesses per false state among `agents` (all agents when omitted).
    #[pyo3(signature = (agents = None))]
    fn identifiability<'py>(
        &self,
        py: Python<'py>,
        agents: Option<Vec<usize>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let n = self.inner.num_agents();
        let agents = match agents {
            Some(a) => a
                .into_iter()
                .map(|x| agent_index(x, n))
                .collect::<PyResult<Vec<_>>>()?,
            None => (0..n).collect(),
        };
        let report = self
            .inner
            .check_global_identifiability(&agents)
            .map_err(err)?;
        identifiability_dict(py, &self.inner, &report)
    }
}

fn identifiability_dict<'py>(
    py: Python<'py>,
    world: &WorldModel,
    report: &world::IdentifiabilityReport,
) -> PyResult<Bound<'py, PyDict>> {
    let witnesses = PyDict::new(py);
    for entry in &report.entries {
        witnesses.set_item(
            world.states().label(entry.check_state),
            one_based(&entry.witnesses),
        )?;
    }
    let out = PyDict::new(py);
    out.set_item("identifiable", report.identifiable)?;
    out.set_item("witnesses", witnesses)?;
    Ok(out)
}

/// One simulated replication.
#[pyclass(name = "Trace", module = "pygossip", frozen)]
pub struct PyTrace {
    inner: SimulationTrace,
    world: Arc<WorldModel>,
}

impl PyTrace {
    fn check_time(&self, t: usize) -> PyResult<()> {
        if t > self.inner.horizon() {
            return Err(PyIndexError::new_err(format!(
                "t={t} beyond horizon {}",
                self.inner.horizon()
            )));
        }
        Ok(())
    }
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    #[getter]
    fn snapshot_times(&self) -> Vec<usize> {
        self.inner.snapshot_times().to_vec()
    }

    fn signal(&self, agent: usize, t: usize) -> PyResult<usize> {
        let i = agent_index(agent, self.inner.n())?;
        self.check_time(t)?;
        Ok(self.inner.signal(i, t))
    }

    /// Agent selected by `agent` in round `t >= 1`.
    fn selection(&self, t: usize, agent: usize) -> PyResult<usize> {
        let i = agent_index(agent, self.inner.n())?;
        self.check_time(t)?;
        if t == 0 {
            return Err(PyIndexError::new_err("no selection at t=0"));
        }
        Ok(self.inner.selection(t, i) + 1)
    }

    /// Belief of `agent` at `t`, or `None` if that round was not recorded.
    fn belief(&self, t: usize, agent: usize) -> PyResult<Option<Vec<f64>>> {
        let i = agent_index(agent, self.inner.n())?;
        Ok(self.inner.belief(t, i).map(|b| b.probabilities()))
    }

    fn log_belief(&self, t: usize, agent: usize) -> PyResult<Option<Vec<f64>>> {
        let i = agent_index(agent, self.inner.n())?;
        Ok(self.inner.log_belief(t, i).map(<[f64]>::to_vec))
    }

    fn log_ratio(&self, agent: usize, t: usize, check_state: &Bound<'_, PyAny>) -> PyResult<f64> {
        let i = agent_index(agent, self.inner.n())?;
        let k = state_index(self.world.states(), check_state)?;
        self.inner.log_ratio(i, t, k).map_err(err)
    }

    fn backward_walk(&self, agent: usize, t: usize) -> PyResult<Vec<usize>> {
        let i = agent_index(agent, self.inner.n())?;
        Ok(one_based(
            &simulator::backward_walk(&self.inner, i, t).map_err(err)?,
        ))
    }

    fn verify_walk_identity(
        &self,
        agent: usize,
        t: usize,
        check_state: &Bound<'_, PyAny>,
    ) -> PyResult<f64> {
        let i = agent_index(agent, self.inner.n())?;
        let k = state_index(self.world.states(), check_state)?;
        simulator::verify_walk_identity(&self.inner, &self.world, i, t, k).map_err(err)
    }

    /// Fraction of walk steps `i_1..i_t` spent at each agent.
    fn occupancy(&self, agent: usize, t: usize) -> PyResult<Vec<f64>> {
        let i = agent_index(agent, self.inner.n())?;
        Ok(analysis::occupancy(&self.inner, i, t, None)
            .map_err(err)?
            .empirical)
    }

    /// Least-squares slope of the log-ratio over `window` (default: last 80% of rounds).
    #[pyo3(signature = (agent, check_state, window = None))]
    fn empirical_rate(
        &self,
        agent: usize,
        check_state: &Bound<'_, PyAny>,
        window: Option<(usize, usize)>,
    ) -> PyResult<f64> {
        let i = agent_index(agent, self.inner.n())?;
        let k = state_index(self.world.states(), check_state)?;
        let window = window.unwrap_or_else(|| analysis::default_window(self.inner.horizon()));
        Ok(analysis::empirical_rate(&self.inner, i, k, window)
            .map_err(err)?
            .slope)
    }

    /// `(t, |mu_a(t)(state) - mu_b(t)(state)|)` over recorded rounds.
    #[pyo3(signature = (a, b, state = None))]
    fn belief_difference(
        &self,
        a: usize,
        b: usize,
        state: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Vec<(usize, f64)>> {
        let n = self.inner.n();
        let k = match state {
            Some(s) => state_index(self.world.states(), s)?,
            None => self.world.true_state(),
        };
        Ok(analysis::belief_difference(
            &self.inner,
            agent_index(a, n)?,
            agent_index(b, n)?,
            k,
        ))
    }

    /// Recomputes every recorded belief from the stored signals and selections.
    fn replay(&self) -> PyResult<()> {
        self.inner.replay(&self.world).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Trace(n={}, horizon={}, seed={})",
            self.inner.n(),
            self.inner.horizon(),
            self.inner.seed()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (network, selection, world, horizon, seed, snapshot_stride = 1))]
fn simulate(
    py: Python<'_>,
    network: &PyNetwork,
    selection: &PySelection,
    world: &PyWorld,
    horizon: usize,
    seed: u64,
    snapshot_stride: usize,
) -> PyResult<PyTrace> {
    let mut cfg = SimulationConfig::new(horizon, seed);
    cfg.record_beliefs_every = snapshot_stride;
    let trace = py
        .detach(|| simulator::run(&network.inner, &selection.inner, &world.inner, &cfg))
        .map_err(err)?;
    Ok(PyTrace {
        inner: trace,
        world: world.inner.clone(),
    })
}

#[pyfunction]
fn kl_divergence(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    world::kl_divergence(&p, &q).map_err(err)
}

/// `sum_m pi_m D_KL(l_m(.|truth) || l_m(.|check_state))`.
#[pyfunction]
fn theoretical_rate(
    pi: Vec<f64>,
    world: &PyWorld,
    check_state: &Bound<'_, PyAny>,
) -> PyResult<f64> {
    let k = state_index(world.inner.states(), check_state)?;
    analysis::theoretical_rate(
        &StationaryDistribution::from_vec(pi).map_err(err)?,
        &world.inner,
        k,
    )
    .map_err(err)
}

#[pyfunction]
fn replication_seed(master: u64, rep: usize) -> u64 {
    simulator::replication_seed(master, rep)
}

/// A validated experiment loaded from JSON.
#[pyclass(name = "Experiment", module = "pygossip", frozen)]
pub struct PyExperiment {
    config: ExperimentConfig,
    network: PyNetwork,
    selection: PySelection,
    world: PyWorld,
    sim: SimulationConfig,
}

impl PyExperiment {
    fn from_config(config: ExperimentConfig) -> PyResult<Self> {
        let exp = config.build().map_err(err)?;
        Ok(Self {
            config,
            network: PyNetwork { inner: exp.network },
            selection: PySelection {
                inner: exp.selection,
            },
            world: PyWorld {
                inner: Arc::new(exp.world),
            },
            sim: exp.simulation,
        })
    }
}

#[pymethods]
impl PyExperiment {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::from_config(ExperimentConfig::from_json(text).map_err(err)?)
    }

    /// The built-in eight-agent example.
    #[staticmethod]
    fn example1() -> PyResult<Self> {
        Self::from_config(config::example1())
    }

    fn to_json(&self) -> String {
        self.config.to_json()
    }

    #[getter]
    fn network(&self) -> PyNetwork {
        self.network.clone()
    }

    #[getter]
    fn selection(&self) -> PySelection {
        self.selection.clone()
    }

    #[getter]
    fn world(&self) -> PyWorld {
        self.world.clone()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.sim.horizon
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.sim.seed
    }

    #[getter]
    fn replications(&self) -> usize {
        self.sim.replications
    }

    /// Structure and identifiability summary, as printed by `gossip check`.
    fn check<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let exp = self.config.build().map_err(err)?;
        let outcome = check_experiment(&exp);
        let out = PyDict::new(py);
        out.set_item("strongly_connected", outcome.strongly_connected)?;
        out.set_item(
            "classes",
            outcome
                .classes
                .iter()
                .map(|c| one_based(c))
                .collect::<Vec<_>>(),
        )?;
        out.set_item("transient", one_based(&outcome.transient))?;
        out.set_item(
            "stationary",
            outcome.stationary.map(StationaryDistribution::into_vec),
        )?;
        let reports = outcome
            .identifiability
            .iter()
            .map(|r| identifiability_dict(py, &exp.world, r))
            .collect::<PyResult<Vec<_>>>()?;
        out.set_item("identifiability", reports)?;
        out.set_item("identifiable", outcome.verdict)?;
        Ok(out)
    }

    /// Runs the configured replications (optionally overridden), in parallel.
    #[pyo3(signature = (horizon = None, seed = None, replications = None))]
    fn simulate(
        &self,
        py: Python<'_>,
        horizon: Option<usize>,
        seed: Option<u64>,
        replications: Option<usize>,
    ) -> PyResult<Vec<PyTrace>> {
        let cfg = SimulationConfig {
            horizon: horizon.unwrap_or(self.sim.horizon),
            seed: seed.unwrap_or(self.sim.seed),
            replications: replications.unwrap_or(self.sim.replications),
            ..self.sim
        };
        let traces = py
            .detach(|| {
                simulator::run_replications(
                    &self.network.inner,
                    &self.selection.inner,
                    &self.world.inner,
                    &cfg,
                )
            })
            .map_err(err)?;
        Ok(traces
            .into_iter()
            .map(|inner| PyTrace {
                inner,
                world: self.world.inner.clone(),
            })
            .collect())
    }
}

#[pymodule]
fn pygossip(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GossipError", m.py().get_type::<GossipError>())?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PySelection>()?;
    m.add_class::<PyWorld>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(theoretical_rate, m)?)?;
    m.add_function(wrap_pyfunction!(replication_seed, m)?)?;
    Ok(())
}
