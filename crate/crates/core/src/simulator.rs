//! Seeded execution of the gossip protocol and the trace it leaves behind.
//!
//! # Randomness
//!
//! Every run is keyed by a 64-bit seed fed to `ChaCha8Rng::seed_from_u64`.
//! Agent `i` owns two ChaCha streams, `2i` for signals and `2i + 1` for
//! neighbor selection. Round `t` consumes exactly one `f64` (two 32-bit words,
//! word position `2t`) from each stream, so every draw is addressable by
//! `(seed, agent, purpose, round)` regardless of update order or thread count.
//! Replication `r` runs under [`replication_seed`]`(seed, r)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::belief::{self, bayes_step, BeliefState};
use crate::error::{Error, Result};
use crate::graph::{DirectedNetwork, SelectionMatrix};
use crate::world::{IndependentSignals, JointSignalSampler, WorldModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationConfig {
    pub horizon: usize,
    pub seed: u64,
    pub record_beliefs_every: usize,
    pub replications: usize,
}

impl SimulationConfig {
    pub fn new(horizon: usize, seed: u64) -> Self {
        Self {
            horizon,
            seed,
            record_beliefs_every: 1,
            replications: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.record_beliefs_every == 0 {
            return Err(Error::InvalidConfig(
                "snapshot stride must be at least 1".into(),
            ));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig(
                "replications must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn records(&self, t: usize) -> bool {
        t.is_multiple_of(self.record_beliefs_every) || t == self.horizon
    }
}

/// Seed of replication `rep` derived from a master seed (SplitMix64 finalizer).
pub fn replication_seed(master: u64, rep: usize) -> u64 {
    let mut z = master.wrapping_add((rep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Signal = 0,
    Selection = 1,
}

fn stream_id(agent: usize, purpose: Purpose) -> u64 {
    2 * agent as u64 + purpose as u64
}

/// The uniform variate agent `agent` uses for `purpose` in round `round`.
pub fn draw_at(seed: u64, agent: usize, purpose: Purpose, round: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(agent, purpose));
    rng.set_word_pos(2 * round as u128);
    rng.gen()
}

struct Streams {
    signal: Vec<ChaCha8Rng>,
    selection: Vec<ChaCha8Rng>,
}

impl Streams {
    fn new(seed: u64, n: usize) -> Self {
        let base = ChaCha8Rng::seed_from_u64(seed);
        let make = |purpose| {
            (0..n)
                .map(|i| {
                    let mut rng = base.clone();
                    rng.set_stream(stream_id(i, purpose));
                    rng.set_word_pos(0);
                    rng
                })
                .collect()
        };
        Self {
            signal: make(Purpose::Signal),
            selection: make(Purpose::Selection),
        }
    }
}

/// Hex digests identifying the inputs a trace was produced from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Fingerprints {
    pub network: String,
    pub selection: String,
    pub world: String,
}

impl Fingerprints {
    pub fn of(net: &DirectedNetwork, p: &SelectionMatrix, world: &WorldModel) -> Self {
        Self {
            network: network_fingerprint(net),
            selection: selection_fingerprint(p),
            world: world_fingerprint(world),
        }
    }
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn network_fingerprint(net: &DirectedNetwork) -> String {
    let mut bytes = (net.n() as u64).to_le_bytes().to_vec();
    for &(s, t) in net.edges() {
        bytes.extend((s as u64).to_le_bytes());
        bytes.extend((t as u64).to_le_bytes());
    }
    digest(&bytes)
}

pub fn selection_fingerprint(p: &SelectionMatrix) -> String {
    let mut bytes = (p.n() as u64).to_le_bytes().to_vec();
    for i in 0..p.n() {
        bytes.extend((p.row(i).len() as u64).to_le_bytes());
        for &(j, w) in p.row(i) {
            bytes.extend((j as u64).to_le_bytes());
            bytes.extend(w.to_bits().to_le_bytes());
        }
    }
    digest(&bytes)
}

pub fn world_fingerprint(world: &WorldModel) -> String {
    let mut bytes = Vec::new();
    for label in world.states().labels() {
        bytes.extend((label.len() as u64).to_le_bytes());
        bytes.extend(label.as_bytes());
    }
    bytes.extend((world.true_state() as u64).to_le_bytes());
    for p in world.prior().as_slice() {
        bytes.extend(p.to_bits().to_le_bytes());
    }
    for table in world.likelihoods() {
        bytes.extend((table.num_signals() as u64).to_le_bytes());
        for row in table.rows() {
            for p in row {
                bytes.extend(p.to_bits().to_le_bytes());
            }
        }
    }
    digest(&bytes)
}

/// Everything a run produced: all signals and selections, plus strided belief snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    n: usize,
    num_states: usize,
    horizon: usize,
    seed: u64,
    true_state: usize,
    /// `signals[t * n + i]`, `t` in `0..=horizon`.
    signals: Vec<u32>,
    /// `selections[(t - 1) * n + i]`, `t` in `1..=horizon`.
    selections: Vec<u32>,
    snapshot_times: Vec<usize>,
    /// `[snapshot][agent][state]`, flattened.
    snapshots: Vec<f64>,
    pub fingerprints: Fingerprints,
}

/// Raw columns of a trace, as read back from disk.
#[derive(Debug, Clone, Default)]
pub struct TraceParts {
    pub n: usize,
    pub num_states: usize,
    pub horizon: usize,
    pub seed: u64,
    pub true_state: usize,
    pub signals: Vec<u32>,
    pub selections: Vec<u32>,
    pub snapshot_times: Vec<usize>,
    pub snapshots: Vec<f64>,
    pub fingerprints: Fingerprints,
}

impl SimulationTrace {
    pub fn from_parts(parts: TraceParts) -> Result<Self> {
        let TraceParts {
            n,
            num_states,
            horizon,
            seed,
            true_state,
            signals,
            selections,
            snapshot_times,
            snapshots,
            fingerprints,
        } = parts;
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Trace(msg.to_string()))
            }
        };
        check(n > 0 && num_states > 0, "empty dimensions")?;
        check(true_state < num_states, "true state out of range")?;
        check(
            signals.len() == (horizon + 1) * n,
            "signal table has wrong size",
        )?;
        check(
            selections.len() == horizon * n,
            "selection table has wrong size",
        )?;
        check(
            selections.iter().all(|&j| (j as usize) < n),
            "selection out of range",
        )?;
        check(
            snapshot_times.windows(2).all(|w| w[0] < w[1]),
            "snapshot times not strictly increasing",
        )?;
        check(
            snapshot_times.last().is_none_or(|&t| t <= horizon),
            "snapshot beyond horizon",
        )?;
        check(
            snapshots.len() == snapshot_times.len() * n * num_states,
            "snapshot table has wrong size",
        )?;
        Ok(Self {
            n,
            num_states,
            horizon,
            seed,
            true_state,
            signals,
            selections,
            snapshot_times,
            snapshots,
            fingerprints,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn true_state(&self) -> usize {
        self.true_state
    }

    /// `s_{i,t}`.
    pub fn signal(&self, agent: usize, t: usize) -> usize {
        self.signals[t * self.n + agent] as usize
    }

    /// `sigma_{t,i}` for `t >= 1`.
    pub fn selection(&self, t: usize, agent: usize) -> usize {
        assert!(
            t >= 1 && t <= self.horizon,
            "selection time {t} out of 1..={}",
            self.horizon
        );
        self.selections[(t - 1) * self.n + agent] as usize
    }

    pub fn snapshot_times(&self) -> &[usize] {
        &self.snapshot_times
    }

    fn snapshot_index(&self, t: usize) -> Option<usize> {
        self.snapshot_times.binary_search(&t).ok()
    }

    pub fn log_belief(&self, t: usize, agent: usize) -> Option<&[f64]> {
        let idx = self.snapshot_index(t)?;
        let start = (idx * self.n + agent) * self.num_states;
        Some(&self.snapshots[start..start + self.num_states])
    }

    pub fn belief(&self, t: usize, agent: usize) -> Option<BeliefState> {
        self.log_belief(t, agent)
            .map(|lb| BeliefState::from_log(agent, t, lb.to_vec()))
    }

    /// `ln mu_{i,t}(check) - ln mu_{i,t}(truth)` from the recorded snapshot.
    pub fn log_ratio(&self, agent: usize, t: usize, check_state: usize) -> Result<f64> {
        let lb = self.log_belief(t, agent).ok_or(Error::MissingSnapshot {
            agent: agent + 1,
            time: t,
        })?;
        belief::log_ratio(lb, check_state, self.true_state).ok_or(Error::ZeroTrueStateMass {
            agent: agent + 1,
            time: t,
        })
    }

    pub fn signals_raw(&self) -> &[u32] {
        &self.signals
    }

    pub fn selections_raw(&self) -> &[u32] {
        &self.selections
    }

    pub fn snapshots_raw(&self) -> &[f64] {
        &self.snapshots
    }

    fn check_world(&self, world: &WorldModel) -> Result<()> {
        if world.num_agents() != self.n
            || world.num_states() != self.num_states
            || world.true_state() != self.true_state
        {
            return Err(Error::Inconsistent(
                "world model does not match trace dimensions".into(),
            ));
        }
        if !self.fingerprints.world.is_empty()
            && self.fingerprints.world != world_fingerprint(world)
        {
            return Err(Error::Inconsistent(
                "world model fingerprint differs from the one recorded in the trace".into(),
            ));
        }
        Ok(())
    }

    /// Recomputes every belief from the recorded signals and selections and
    /// checks each recorded snapshot matches bit for bit.
    pub fn replay(&self, world: &WorldModel) -> Result<()> {
        self.check_world(world)?;
        let (n, k) = (self.n, self.num_states);
        let prior_log: Vec<f64> = world.prior().as_slice().iter().map(|p| p.ln()).collect();
        let mut prev = vec![0.0; n * k];
        let mut next = vec![0.0; n * k];
        for i in 0..n {
            step(
                world,
                &prior_log,
                i,
                self.signal(i, 0),
                &mut prev[i * k..(i + 1) * k],
            )?;
        }
        self.compare_snapshot(0, &prev)?;
        for t in 1..=self.horizon {
            for i in 0..n {
                let j = self.selection(t, i);
                step(
                    world,
                    &prev[j * k..(j + 1) * k],
                    i,
                    self.signal(i, t),
                    &mut next[i * k..(i + 1) * k],
                )?;
            }
            std::mem::swap(&mut prev, &mut next);
            self.compare_snapshot(t, &prev)?;
        }
        Ok(())
    }

    fn compare_snapshot(&self, t: usize, state: &[f64]) -> Result<()> {
        let Some(idx) = self.snapshot_index(t) else {
            return Ok(());
        };
        let len = self.n * self.num_states;
        let recorded = &self.snapshots[idx * len..(idx + 1) * len];
        let same = recorded
            .iter()
            .zip(state)
            .all(|(a, b)| a.to_bits() == b.to_bits());
        if same {
            Ok(())
        } else {
            Err(Error::Trace(format!(
                "replay diverges from snapshot at t={t}"
            )))
        }
    }
}

fn step(
    world: &WorldModel,
    prior_log: &[f64],
    agent: usize,
    signal: usize,
    out: &mut [f64],
) -> Result<()> {
    if bayes_step(prior_log, world.likelihood(agent), signal, out) {
        Ok(())
    } else {
        Err(Error::ImpossibleSignal {
            agent: agent + 1,
            signal,
        })
    }
}

fn check_inputs(net: &DirectedNetwork, p: &SelectionMatrix, world: &WorldModel) -> Result<()> {
    p.check_against(net)?;
    if world.num_agents() != net.n() {
        return Err(Error::Inconsistent(format!(
            "world has {} agents but network has {}",
            world.num_agents(),
            net.n()
        )));
    }
    Ok(())
}

/// Runs one replication under `cfg.seed`.
pub fn run(
    net: &DirectedNetwork,
    p: &SelectionMatrix,
    world: &WorldModel,
    cfg: &SimulationConfig,
) -> Result<SimulationTrace> {
    run_with_sampler(net, p, world, cfg, &IndependentSignals)
}

pub fn run_with_sampler(
    net: &DirectedNetwork,
    p: &SelectionMatrix,
    world: &WorldModel,
    cfg: &SimulationConfig,
    sampler: &dyn JointSignalSampler,
) -> Result<SimulationTrace> {
    cfg.validate()?;
    check_inputs(net, p, world)?;
    let n = net.n();
    let k = world.num_states();
    let horizon = cfg.horizon;
    let mut streams = Streams::new(cfg.seed, n);

    let mut signals = vec![0u32; (horizon + 1) * n];
    let mut selections = vec![0u32; horizon * n];
    let mut snapshot_times = Vec::new();
    let mut snapshots = Vec::new();

    let mut uniforms = vec![0.0; n];
    let mut round_signals = vec![0usize; n];
    let mut draw_signals = |streams: &mut Streams, round_signals: &mut [usize]| {
        for (u, rng) in uniforms.iter_mut().zip(streams.signal.iter_mut()) {
            *u = rng.gen();
        }
        sampler.sample_round(world, &uniforms, round_signals);
    };

    let prior_log: Vec<f64> = world.prior().as_slice().iter().map(|p| p.ln()).collect();
    let mut prev = vec![0.0; n * k];
    let mut next = vec![0.0; n * k];

    draw_signals(&mut streams, &mut round_signals);
    for i in 0..n {
        signals[i] = round_signals[i] as u32;
        step(
            world,
            &prior_log,
            i,
            round_signals[i],
            &mut prev[i * k..(i + 1) * k],
        )?;
    }
    if cfg.records(0) {
        snapshot_times.push(0);
        snapshots.extend_from_slice(&prev);
    }

    for t in 1..=horizon {
        draw_signals(&mut streams, &mut round_signals);
        for i in 0..n {
            let u: f64 = streams.selection[i].gen();
            let j = p.select(i, u);
            selections[(t - 1) * n + i] = j as u32;
            signals[t * n + i] = round_signals[i] as u32;
            step(
                world,
                &prev[j * k..(j + 1) * k],
                i,
                round_signals[i],
                &mut next[i * k..(i + 1) * k],
            )?;
        }
        std::mem::swap(&mut prev, &mut next);
        if cfg.records(t) {
            snapshot_times.push(t);
            snapshots.extend_from_slice(&prev);
        }
    }

    Ok(SimulationTrace {
        n,
        num_states: k,
        horizon,
        seed: cfg.seed,
        true_state: world.true_state(),
        signals,
        selections,
        snapshot_times,
        snapshots,
        fingerprints: Fingerprints::of(net, p, world),
    })
}

/// Runs `cfg.replications` independent replications in parallel, ordered by replication index.
pub fn run_replications(
    net: &DirectedNetwork,
    p: &SelectionMatrix,
    world: &WorldModel,
    cfg: &SimulationConfig,
) -> Result<Vec<SimulationTrace>> {
    cfg.validate()?;
    check_inputs(net, p, world)?;
    (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let rep_cfg = SimulationConfig {
                seed: replication_seed(cfg.seed, rep),
                replications: 1,
                ..*cfg
            };
            run(net, p, world, &rep_cfg)
        })
        .collect()
}

/// `(i, i_1, ..., i_t)` with `i_1 = sigma_{t,i}` and `i_{k+1} = sigma_{t-k, i_k}`.
pub fn backward_walk(trace: &SimulationTrace, agent: usize, t: usize) -> Result<Vec<usize>> {
    if t > trace.horizon {
        return Err(Error::IndexOutOfRange {
            what: "time",
            index: t,
            size: trace.horizon,
        });
    }
    if agent >= trace.n {
        return Err(Error::IndexOutOfRange {
            what: "agent",
            index: agent + 1,
            size: trace.n,
        });
    }
    let mut walk = Vec::with_capacity(t + 1);
    walk.push(agent);
    let mut cur = agent;
    for k in 0..t {
        cur = trace.selection(t - k, cur);
        walk.push(cur);
    }
    Ok(walk)
}

fn signal_llr(world: &WorldModel, agent: usize, signal: usize, check: usize) -> f64 {
    let table = world.likelihood(agent);
    table.log_prob(signal, check) - table.log_prob(signal, world.true_state())
}

/// The walk side of the belief-ratio identity:
/// `llr_i(s_{i,t}) + ln nu(check)/nu(truth) + sum_{tau=1..t} llr_{i_tau}(s_{i_tau, t-tau})`.
pub fn walk_log_ratio(
    trace: &SimulationTrace,
    world: &WorldModel,
    agent: usize,
    t: usize,
    check_state: usize,
) -> Result<f64> {
    trace.check_world(world)?;
    world.check_state(check_state)?;
    let walk = backward_walk(trace, agent, t)?;
    let nu = world.prior().as_slice();
    let mut total = signal_llr(world, agent, trace.signal(agent, t), check_state)
        + (nu[check_state].ln() - nu[world.true_state()].ln());
    for (tau, &m) in walk.iter().enumerate().skip(1) {
        total += signal_llr(world, m, trace.signal(m, t - tau), check_state);
    }
    Ok(total)
}

/// `|belief-side log-ratio - walk-side log-ratio|` at `(agent, t)`.
///
/// Both sides equal to `-inf` count as an exact match (residual 0).
pub fn verify_walk_identity(
    trace: &SimulationTrace,
    world: &WorldModel,
    agent: usize,
    t: usize,
    check_state: usize,
) -> Result<f64> {
    let lhs = trace.log_ratio(agent, t, check_state)?;
    let rhs = walk_log_ratio(trace, world, agent, t, check_state)?;
    if lhs == f64::NEG_INFINITY || rhs == f64::NEG_INFINITY {
        if lhs == rhs {
            return Ok(0.0);
        }
        return Err(Error::WalkMismatch {
            agent: agent + 1,
            time: t,
            lhs,
            rhs,
        });
    }
    Ok((lhs - rhs).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::tests::example1_world;
    use crate::world::{LikelihoodTable, Prior, StateSpace};

    fn example1_inputs() -> (DirectedNetwork, SelectionMatrix, WorldModel) {
        let net = DirectedNetwork::from_one_based(
            8,
            &[
                (1, 2),
                (2, 5),
                (2, 3),
                (3, 4),
                (3, 1),
                (3, 6),
                (4, 2),
                (1, 7),
                (5, 4),
                (7, 8),
            ],
        )
        .unwrap();
        let p = SelectionMatrix::uniform(&net);
        (net, p, example1_world())
    }

    #[test]
    fn config_validation() {
        assert!(SimulationConfig::new(0, 1).validate().is_err());
        let mut cfg = SimulationConfig::new(10, 1);
        cfg.record_beliefs_every = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sequential_streams_match_addressed_draws() {
        let mut streams = Streams::new(77, 3);
        for round in 0..5 {
            for agent in 0..3 {
                let a: f64 = streams.signal[agent].gen();
                let b: f64 = streams.selection[agent].gen();
                assert_eq!(a, draw_at(77, agent, Purpose::Signal, round));
                assert_eq!(b, draw_at(77, agent, Purpose::Selection, round));
            }
        }
    }

    #[test]
    fn selections_respect_neighborhoods() {
        let (net, p, w) = example1_inputs();
        let trace = run(&net, &p, &w, &SimulationConfig::new(500, 9)).unwrap();
        for t in 1..=500 {
            for i in 0..8 {
                assert!(net.may_select(i, trace.selection(t, i)));
            }
        }
    }

    #[test]
    fn uninformative_agent_after_initial_round() {
        let (net, p, w) = example1_inputs();
        let trace = run(&net, &p, &w, &SimulationConfig::new(1, 4)).unwrap();
        let b = trace.belief(0, 2).unwrap();
        for v in b.probabilities() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (_, _, w) = example1_inputs();
        let net = DirectedNetwork::from_one_based(2, &[(1, 2), (2, 1)]).unwrap();
        let p = SelectionMatrix::uniform(&net);
        assert!(matches!(
            run(&net, &p, &w, &SimulationConfig::new(5, 1)),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn strided_snapshots_keep_last_round() {
        let (net, p, w) = example1_inputs();
        let mut cfg = SimulationConfig::new(23, 2);
        cfg.record_beliefs_every = 10;
        let trace = run(&net, &p, &w, &cfg).unwrap();
        assert_eq!(trace.snapshot_times(), &[0, 10, 20, 23]);
        trace.replay(&w).unwrap();
    }

    #[test]
    fn backward_walk_shapes() {
        let (net, p, w) = example1_inputs();
        let trace = run(&net, &p, &w, &SimulationConfig::new(50, 3)).unwrap();
        let walk = backward_walk(&trace, 7, 1).unwrap();
        assert_eq!(walk, vec![7, trace.selection(1, 7)]);
        let walk = backward_walk(&trace, 4, 50).unwrap();
        assert_eq!(walk.len(), 51);
        for pair in walk.windows(2) {
            assert!(net.may_select(pair[0], pair[1]));
        }
        assert!(backward_walk(&trace, 0, 51).is_err());

        let lone = DirectedNetwork::from_edge_list(1, &[]).unwrap();
        let states = StateSpace::new(vec!["a".into(), "b".into()], 0).unwrap();
        let table = LikelihoodTable::new(vec![vec![0.6, 0.4], vec![0.3, 0.7]]).unwrap();
        let w1 = WorldModel::new(states, Prior::uniform(2), vec![table]).unwrap();
        let trace = run(
            &lone,
            &SelectionMatrix::uniform(&lone),
            &w1,
            &SimulationConfig::new(20, 1),
        )
        .unwrap();
        assert_eq!(backward_walk(&trace, 0, 20).unwrap(), vec![0; 21]);
    }

    #[test]
    fn walk_identity_one_step() {
        let (net, p, w) = example1_inputs();
        let trace = run(&net, &p, &w, &SimulationConfig::new(3, 12)).unwrap();
        for i in 0..8 {
            for check in 1..3 {
                assert!(verify_walk_identity(&trace, &w, i, 1, check).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn walk_identity_leaf_agent() {
        let (net, p, w) = example1_inputs();
        let trace = run(&net, &p, &w, &SimulationConfig::new(100, 2024)).unwrap();
        assert!(verify_walk_identity(&trace, &w, 7, 100, 1).unwrap() < 1e-8);
    }

    #[test]
    fn walk_identity_with_zero_likelihoods() {
        // state "c" can never emit signal 0, which the truth emits often
        let net = DirectedNetwork::from_one_based(2, &[(1, 2), (2, 1)]).unwrap();
        let states = StateSpace::new(vec!["a".into(), "b".into(), "c".into()], 0).unwrap();
        let t1 =
            LikelihoodTable::new(vec![vec![0.5, 0.5], vec![0.4, 0.6], vec![0.0, 1.0]]).unwrap();
        let t2 = LikelihoodTable::new(vec![vec![0.5, 0.5]; 3]).unwrap();
        let w = WorldModel::new(states, Prior::uniform(3), vec![t1, t2]).unwrap();
        let trace = run(
            &net,
            &SelectionMatrix::uniform(&net),
            &w,
            &SimulationConfig::new(40, 8),
        )
        .unwrap();
        assert_eq!(trace.log_ratio(0, 40, 2).unwrap(), f64::NEG_INFINITY);
        assert_eq!(verify_walk_identity(&trace, &w, 0, 40, 2).unwrap(), 0.0);
        trace.replay(&w).unwrap();
    }

    #[test]
    fn all_uninformative_identity_is_prior_ratio() {
        let (net, p, _) = example1_inputs();
        let states = StateSpace::new(vec!["1".into(), "2".into(), "3".into()], 0).unwrap();
        let prior = Prior::new(vec![0.5, 0.3, 0.2]).unwrap();
        let table = LikelihoodTable::new(vec![vec![0.25, 0.75]; 3]).unwrap();
        let w = WorldModel::new(states, prior, vec![table; 8]).unwrap();
        let trace = run(&net, &p, &w, &SimulationConfig::new(30, 5)).unwrap();
        let expected = 0.3f64.ln() - 0.5f64.ln();
        for i in 0..8 {
            assert_eq!(walk_log_ratio(&trace, &w, i, 30, 1).unwrap(), expected);
            assert!((trace.log_ratio(i, 30, 1).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn replay_detects_tampering() {
        let (net, p, w) = example1_inputs();
        let trace = run(&net, &p, &w, &SimulationConfig::new(20, 6)).unwrap();
        trace.replay(&w).unwrap();
        let mut parts = TraceParts {
            n: trace.n,
            num_states: trace.num_states,
            horizon: trace.horizon,
            seed: trace.seed,
            true_state: trace.true_state,
            signals: trace.signals.clone(),
            selections: trace.selections.clone(),
            snapshot_times: trace.snapshot_times.clone(),
            snapshots: trace.snapshots.clone(),
            fingerprints: trace.fingerprints.clone(),
        };
        let t = 10;
        parts.selections[(t - 1) * 8 + 1] = if trace.selection(t, 1) == 0 { 3 } else { 0 };
        let tampered = SimulationTrace::from_parts(parts).unwrap();
        assert!(tampered.replay(&w).is_err());
    }

    #[test]
    fn replication_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> =
            (0..100).map(|r| replication_seed(42, r)).collect();
        assert_eq!(seeds.len(), 100);
    }
}
