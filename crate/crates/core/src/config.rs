//! JSON experiment configuration.
//!
//! Parsing is strict: unknown keys are rejected, and every module-level
//! validation runs in [`ExperimentConfig::build`] before anything executes.
//! Agents and states are 1-based / label-based here, as in all user-facing I/O.
//! Probabilities may be written as JSON numbers or as exact fraction strings
//! such as `"1/3"`; the original spelling survives a round trip.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirectedNetwork, SelectionMatrix};
use crate::simulator::SimulationConfig;
use crate::world::{LikelihoodTable, Prior, StateSpace, WorldModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkSpec,
    #[serde(default)]
    pub selection: SelectionSpec,
    pub world: WorldSpec,
    pub simulation: SimulationSpec,
    #[serde(default, skip_serializing_if = "AnalysisSpec::is_empty")]
    pub analysis: AnalysisSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub agents: usize,
    /// `[source, target]` pairs: `target` observes `source`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    /// Alternative to `edges`: the agents each agent observes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_neighbors: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SelectionSpec {
    /// Only `"uniform"` is recognized.
    Keyword(String),
    Explicit(ExplicitRows),
}

impl Default for SelectionSpec {
    fn default() -> Self {
        SelectionSpec::Keyword("uniform".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitRows {
    pub rows: Vec<Vec<Prob>>,
}

/// A state label as written in the config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Int(i64),
    Text(String),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Int(v) => write!(f, "{v}"),
            Label::Text(s) => f.write_str(s),
        }
    }
}

/// A probability: a number, or a string holding a decimal or `a/b` fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prob {
    Num(f64),
    Text(String),
}

impl Prob {
    pub fn value(&self) -> Result<f64> {
        match self {
            Prob::Num(v) => Ok(*v),
            Prob::Text(s) => parse_prob(s),
        }
    }
}

fn parse_prob(s: &str) -> Result<f64> {
    let bad = || Error::Parse(format!("cannot read {s:?} as a probability"));
    match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            if den == 0.0 {
                return Err(bad());
            }
            Ok(num / den)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

fn values(row: &[Prob]) -> Result<Vec<f64>> {
    row.iter().map(Prob::value).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub states: Vec<Label>,
    pub true_state: Label,
    /// Uniform when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<Prob>>,
    /// Named likelihood tables agents can share: rows per state, columns per signal.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tables: BTreeMap<String, Vec<Vec<Prob>>>,
    pub agents: Vec<AgentSignals>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSignals {
    /// Name of a shared table in `world.tables`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub like: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<Vec<Prob>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub horizon: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default = "one")]
    pub snapshot_stride: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    /// False states to report rates for; all of them when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_states: Option<Vec<Label>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_window: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_tolerance: Option<f64>,
    /// Agents whose empirical rates are reported; all agents when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_agents: Option<Vec<usize>>,
    /// Pair of agents for the belief-difference series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief_diff: Option<[usize; 2]>,
    /// Agent whose backward walk is used for the occupancy report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupancy_agent: Option<usize>,
}

impl AnalysisSpec {
    fn is_empty(&self) -> bool {
        *self == AnalysisSpec::default()
    }
}

pub const DEFAULT_RATE_TOLERANCE: f64 = 0.15;

/// Validated analysis settings, 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSettings {
    pub check_states: Vec<usize>,
    pub window: Option<(usize, usize)>,
    pub tolerance: f64,
    pub agents: Vec<usize>,
    pub belief_diff: Option<(usize, usize)>,
    pub occupancy_agent: Option<usize>,
}

/// A fully validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub network: DirectedNetwork,
    pub selection: SelectionMatrix,
    pub world: WorldModel,
    pub simulation: SimulationConfig,
    pub analysis: AnalysisSettings,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Parse(format!(
                "at `{path}` (line {}, column {}): {inner}",
                inner.line(),
                inner.column()
            ))
        })
    }

    /// Canonical pretty-printed form.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn build(&self) -> Result<Experiment> {
        let network = self.network.build()?;
        let selection = match &self.selection {
            SelectionSpec::Keyword(k) if k == "uniform" => SelectionMatrix::uniform(&network),
            SelectionSpec::Keyword(k) => {
                return Err(Error::Parse(format!(
                    "at `selection`: unknown selection {k:?}, expected \"uniform\" or {{\"rows\": ...}}"
                )))
            }
            SelectionSpec::Explicit(rows) => {
                let dense = rows
                    .rows
                    .iter()
                    .map(|r| values(r))
                    .collect::<Result<Vec<_>>>()?;
                SelectionMatrix::custom(&network, &dense)?
            }
        };
        let world = self.world.build()?;
        if world.num_agents() != network.n() {
            return Err(Error::Inconsistent(format!(
                "world lists {} agents but the network has {}",
                world.num_agents(),
                network.n()
            )));
        }
        let sim = &self.simulation;
        let simulation = SimulationConfig {
            horizon: sim.horizon,
            seed: sim.seed,
            record_beliefs_every: sim.snapshot_stride,
            replications: sim.replications,
        };
        simulation.validate()?;
        let analysis = self.analysis_settings(&world, network.n(), sim.horizon)?;
        Ok(Experiment {
            network,
            selection,
            world,
            simulation,
            analysis,
        })
    }

    fn analysis_settings(
        &self,
        world: &WorldModel,
        n: usize,
        horizon: usize,
    ) -> Result<AnalysisSettings> {
        let a = &self.analysis;
        let states = world.states();
        let check_states = match &a.check_states {
            Some(labels) => labels
                .iter()
                .map(|l| {
                    let k = state_index(states, l)?;
                    if k == states.true_state() {
                        return Err(Error::Parse(format!(
                            "at `analysis.check_states`: {l} is the true state"
                        )));
                    }
                    Ok(k)
                })
                .collect::<Result<Vec<_>>>()?,
            None => (0..states.len())
                .filter(|&k| k != states.true_state())
                .collect(),
        };
        let agent = |i: usize, field: &str| {
            if i == 0 || i > n {
                Err(Error::Parse(format!(
                    "at `analysis.{field}`: agent {i} outside 1..={n}"
                )))
            } else {
                Ok(i - 1)
            }
        };
        let agents = match &a.rate_agents {
            Some(list) => list
                .iter()
                .map(|&i| agent(i, "rate_agents"))
                .collect::<Result<Vec<_>>>()?,
            None => (0..n).collect(),
        };
        let window = match a.rate_window {
            Some([t0, t1]) => {
                if t0 >= t1 || t1 > horizon {
                    return Err(Error::Parse(format!(
                        "at `analysis.rate_window`: [{t0}, {t1}] must satisfy t0 < t1 <= horizon {horizon}"
                    )));
                }
                Some((t0, t1))
            }
            None => None,
        };
        let tolerance = a.rate_tolerance.unwrap_or(DEFAULT_RATE_TOLERANCE);
        if tolerance.is_nan() || tolerance <= 0.0 {
            return Err(Error::Parse(
                "at `analysis.rate_tolerance`: must be positive".into(),
            ));
        }
        let belief_diff = match a.belief_diff {
            Some([x, y]) => Some((agent(x, "belief_diff")?, agent(y, "belief_diff")?)),
            None => None,
        };
        let occupancy_agent = a
            .occupancy_agent
            .map(|i| agent(i, "occupancy_agent"))
            .transpose()?;
        Ok(AnalysisSettings {
            check_states,
            window,
            tolerance,
            agents,
            belief_diff,
            occupancy_agent,
        })
    }
}

fn state_index(states: &StateSpace, label: &Label) -> Result<usize> {
    states
        .index_of(&label.to_string())
        .ok_or_else(|| Error::Parse(format!("unknown state label {label}")))
}

impl NetworkSpec {
    fn build(&self) -> Result<DirectedNetwork> {
        match (&self.edges, &self.in_neighbors) {
            (Some(edges), None) => {
                let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e[0], e[1])).collect();
                DirectedNetwork::from_one_based(self.agents, &pairs)
            }
            (None, Some(lists)) => {
                if lists.len() != self.agents {
                    return Err(Error::Parse(format!(
                        "at `network.in_neighbors`: {} lists for {} agents",
                        lists.len(),
                        self.agents
                    )));
                }
                let pairs: Vec<(usize, usize)> = lists
                    .iter()
                    .enumerate()
                    .flat_map(|(i, nbrs)| nbrs.iter().map(move |&j| (j, i + 1)))
                    .collect();
                DirectedNetwork::from_one_based(self.agents, &pairs)
            }
            (None, None) => DirectedNetwork::from_edge_list(self.agents, &[]),
            (Some(_), Some(_)) => Err(Error::Parse(
                "at `network`: give either `edges` or `in_neighbors`, not both".into(),
            )),
        }
    }
}

impl WorldSpec {
    fn build(&self) -> Result<WorldModel> {
        let labels: Vec<String> = self.states.iter().map(Label::to_string).collect();
        let truth = labels
            .iter()
            .position(|l| *l == self.true_state.to_string())
            .ok_or_else(|| {
                Error::Parse(format!(
                    "at `world.true_state`: {} is not a listed state",
                    self.true_state
                ))
            })?;
        let states = StateSpace::new(labels, truth)?;
        let prior = match &self.prior {
            Some(p) => Prior::new(values(p)?)?,
            None => Prior::uniform(states.len()),
        };
        let read_table = |rows: &Vec<Vec<Prob>>| -> Result<LikelihoodTable> {
            let rows = rows.iter().map(|r| values(r)).collect::<Result<Vec<_>>>()?;
            LikelihoodTable::new(rows)
        };
        let mut named = BTreeMap::new();
        for (name, rows) in &self.tables {
            let table = read_table(rows)
                .map_err(|e| Error::Parse(format!("at `world.tables.{name}`: {e}")))?;
            named.insert(name.as_str(), table);
        }
        let mut tables = Vec::with_capacity(self.agents.len());
        for (i, agent) in self.agents.iter().enumerate() {
            let at = format!("world.agents[{i}]");
            let table = match (&agent.like, &agent.table) {
                (Some(name), None) => named.get(name.as_str()).cloned().ok_or_else(|| {
                    Error::Parse(format!("at `{at}.like`: no table named {name:?}"))
                })?,
                (None, Some(rows)) => {
                    read_table(rows).map_err(|e| Error::Parse(format!("at `{at}.table`: {e}")))?
                }
                _ => {
                    return Err(Error::Parse(format!(
                        "at `{at}`: give exactly one of `like` or `table`"
                    )))
                }
            };
            tables.push(table);
        }
        WorldModel::new(states, prior, tables)
    }
}

/// The eight-agent, three-state scenario with binary signals, as a config.
pub const EXAMPLE1_JSON: &str = r#"{
  "network": {
    "agents": 8,
    "edges": [[1, 2], [2, 5], [2, 3], [3, 4], [3, 1], [3, 6], [4, 2], [1, 7], [5, 4], [7, 8]]
  },
  "selection": "uniform",
  "world": {
    "states": ["1", "2", "3"],
    "true_state": "1",
    "prior": ["1/3", "1/3", "1/3"],
    "tables": {
      "l_1": [["1/3", "2/3"], ["1/3", "2/3"], ["1/5", "4/5"]],
      "l_2": [["1/2", "1/2"], ["2/3", "1/3"], ["1/2", "1/2"]],
      "l_3": [["1/4", "3/4"], ["1/4", "3/4"], ["1/4", "3/4"]]
    },
    "agents": [
      {"like": "l_1"}, {"like": "l_2"}, {"like": "l_3"}, {"like": "l_3"},
      {"like": "l_3"}, {"like": "l_3"}, {"like": "l_3"}, {"like": "l_3"}
    ]
  },
  "simulation": {
    "horizon": 5000,
    "seed": 42,
    "replications": 20,
    "snapshot_stride": 1
  },
  "analysis": {
    "check_states": ["2", "3"],
    "rate_window": [1000, 5000],
    "rate_tolerance": 0.15,
    "belief_diff": [3, 8],
    "occupancy_agent": 8
  }
}"#;

pub fn example1() -> ExperimentConfig {
    ExperimentConfig::from_json(EXAMPLE1_JSON).expect("built-in config parses")
}
