//! The environment agents reason about: a finite state space with a common
//! prior, and one signal structure (likelihood table) per agent.

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance for probability vectors summing to one.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// KL divergence above this value counts as "distinguishable".
pub const DISTINGUISH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    labels: Vec<String>,
    true_state: usize,
}

impl StateSpace {
    pub fn new(labels: Vec<String>, true_state: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidWorld("state space is empty".into()));
        }
        for (k, label) in labels.iter().enumerate() {
            if labels[..k].contains(label) {
                return Err(Error::InvalidWorld(format!(
                    "duplicate state label {label:?}"
                )));
            }
        }
        if true_state >= labels.len() {
            return Err(Error::IndexOutOfRange {
                what: "true state",
                index: true_state + 1,
                size: labels.len(),
            });
        }
        Ok(Self { labels, true_state })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, k: usize) -> &str {
        &self.labels[k]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn true_state(&self) -> usize {
        self.true_state
    }
}

/// Strictly positive common prior over the state space.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior(Vec<f64>);

impl Prior {
    pub fn new(nu: Vec<f64>) -> Result<Self> {
        check_distribution(&nu, "prior")?;
        if let Some(k) = nu.iter().position(|&p| p <= 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "prior entry {} is {}, must be strictly positive",
                k + 1,
                nu[k]
            )));
        }
        Ok(Self(nu))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `rows[state][signal] = l(signal | state)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodTable {
    rows: Vec<Vec<f64>>,
    log_rows: Vec<Vec<f64>>,
}

impl LikelihoodTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if width == 0 {
            return Err(Error::InvalidWorld(
                "likelihood table has no signals".into(),
            ));
        }
        for (k, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::InvalidWorld(format!(
                    "likelihood row {} has {} signals, expected {width}",
                    k + 1,
                    row.len()
                )));
            }
            check_distribution(row, "likelihood row")?;
        }
        let log_rows = rows
            .iter()
            .map(|row| row.iter().map(|p| p.ln()).collect())
            .collect();
        Ok(Self { rows, log_rows })
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn num_signals(&self) -> usize {
        self.rows[0].len()
    }

    /// Signal distribution under `state`.
    pub fn row(&self, state: usize) -> &[f64] {
        &self.rows[state]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn prob(&self, signal: usize, state: usize) -> f64 {
        self.rows[state][signal]
    }

    pub fn log_prob(&self, signal: usize, state: usize) -> f64 {
        self.log_rows[state][signal]
    }

    /// Inverse-CDF draw from the row of `state` given a uniform variate in [0, 1).
    pub fn signal_from_uniform(&self, state: usize, u: f64) -> usize {
        let row = &self.rows[state];
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (s, &p) in row.iter().enumerate() {
            if p > 0.0 {
                last_positive = s;
                acc += p;
                if u < acc {
                    return s;
                }
            }
        }
        last_positive
    }
}

pub(crate) fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution(format!("{what} is empty")));
    }
    if let Some(&bad) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "{what} has entry {bad}"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidDistribution(format!(
            "{what} sums to {sum}, not 1"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    states: StateSpace,
    prior: Prior,
    likelihoods: Vec<LikelihoodTable>,
}

impl WorldModel {
    pub fn new(
        states: StateSpace,
        prior: Prior,
        likelihoods: Vec<LikelihoodTable>,
    ) -> Result<Self> {
        if prior.as_slice().len() != states.len() {
            return Err(Error::InvalidWorld(format!(
                "prior has {} entries for {} states",
                prior.as_slice().len(),
                states.len()
            )));
        }
        if likelihoods.is_empty() {
            return Err(Error::InvalidWorld("no agents".into()));
        }
        for (i, table) in likelihoods.iter().enumerate() {
            if table.num_states() != states.len() {
                return Err(Error::InvalidWorld(format!(
                    "agent {} likelihood table has {} rows for {} states",
                    i + 1,
                    table.num_states(),
                    states.len()
                )));
            }
        }
        Ok(Self {
            states,
            prior,
            likelihoods,
        })
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn true_state(&self) -> usize {
        self.states.true_state()
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn num_agents(&self) -> usize {
        self.likelihoods.len()
    }

    pub fn likelihood(&self, agent: usize) -> &LikelihoodTable {
        &self.likelihoods[agent]
    }

    pub fn likelihoods(&self) -> &[LikelihoodTable] {
        &self.likelihoods
    }

    pub(crate) fn check_agent(&self, agent: usize) -> Result<()> {
        if agent >= self.num_agents() {
            return Err(Error::IndexOutOfRange {
                what: "agent",
                index: agent + 1,
                size: self.num_agents(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_state(&self, state: usize) -> Result<()> {
        if state >= self.num_states() {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: state + 1,
                size: self.num_states(),
            });
        }
        Ok(())
    }

    /// Draws `agent`'s private signal under the true state.
    pub fn sample_signal<R: Rng + ?Sized>(&self, agent: usize, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.likelihoods[agent].signal_from_uniform(self.true_state(), u)
    }

    /// `D_KL(l_agent(.|a) || l_agent(.|b))`.
    pub fn divergence(&self, agent: usize, a: usize, b: usize) -> f64 {
        let table = &self.likelihoods[agent];
        kl_divergence(table.row(a), table.row(b)).expect("rows of one table share a length")
    }

    pub fn distinguishable(&self, agent: usize, a: usize, b: usize) -> Result<bool> {
        self.check_agent(agent)?;
        self.check_state(a)?;
        self.check_state(b)?;
        Ok(self.divergence(agent, a, b) > DISTINGUISH_TOL)
    }

    /// For every false state, which agents of `agents` tell it apart from the truth.
    pub fn check_global_identifiability(&self, agents: &[usize]) -> Result<IdentifiabilityReport> {
        for &a in agents {
            self.check_agent(a)?;
        }
        let truth = self.true_state();
        let entries = (0..self.num_states())
            .filter(|&k| k != truth)
            .map(|k| {
                let witnesses = agents
                    .iter()
                    .copied()
                    .filter(|&a| self.divergence(a, truth, k) > DISTINGUISH_TOL)
                    .collect();
                StateWitnesses {
                    check_state: k,
                    witnesses,
                }
            })
            .collect::<Vec<_>>();
        let identifiable = entries.iter().all(|e| !e.witnesses.is_empty());
        Ok(IdentifiabilityReport {
            true_state: truth,
            entries,
            identifiable,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateWitnesses {
    pub check_state: usize,
    /// Agents whose signal structure separates `check_state` from the truth.
    pub witnesses: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentifiabilityReport {
    pub true_state: usize,
    pub entries: Vec<StateWitnesses>,
    pub identifiable: bool,
}

/// Kullback-Leibler divergence `sum_k p_k ln(p_k / q_k)` in nats.
///
/// Terms with `p_k = 0` contribute nothing. If `q_k = 0 < p_k` the result is
/// `f64::INFINITY`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut total = 0.0;
    for (&pk, &qk) in p.iter().zip(q) {
        if pk == 0.0 {
            continue;
        }
        if qk == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += pk * (pk / qk).ln();
    }
    Ok(total.max(0.0))
}

/// Draws one round of signals for every agent.
///
/// The simulator hands each agent a uniform variate from that agent's own
/// random stream. Implementations may combine them to build correlated joint
/// signals; marginals must still follow each agent's likelihood row under the
/// true state.
pub trait JointSignalSampler: Send + Sync {
    fn sample_round(&self, world: &WorldModel, uniforms: &[f64], signals: &mut [usize]);
}

/// Signals independent across agents.
#[derive(Debug, Clone, Copy, Default)]
pub struct IndependentSignals;

impl JointSignalSampler for IndependentSignals {
    fn sample_round(&self, world: &WorldModel, uniforms: &[f64], signals: &mut [usize]) {
        let truth = world.true_state();
        for (agent, (&u, s)) in uniforms.iter().zip(signals.iter_mut()).enumerate() {
            *s = world.likelihood(agent).signal_from_uniform(truth, u);
        }
    }
}
