//! Log-space beliefs and the Bayes-without-recall update rules.
//!
//! Every update has the same shape: take some prior over the states (the
//! common prior at `t = 0`, otherwise the belief of whichever agent was
//! selected, possibly the agent itself), multiply by the agent's own
//! likelihood of its fresh signal, renormalize.

use crate::error::{Error, Result};
use crate::world::{LikelihoodTable, WorldModel};

/// Total log-mass within this distance of zero is left alone instead of being
/// renormalized, so already-normalized inputs pass through bit-for-bit.
const RENORM_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub agent: usize,
    pub time: usize,
    log_belief: Vec<f64>,
}

impl BeliefState {
    /// Wraps an already-normalized log-belief vector.
    pub fn from_log(agent: usize, time: usize, log_belief: Vec<f64>) -> Self {
        Self {
            agent,
            time,
            log_belief,
        }
    }

    /// Normalizes arbitrary nonnegative weights into a belief.
    pub fn from_weights(agent: usize, time: usize, weights: &[f64]) -> Result<Self> {
        let mut log_belief: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        if log_belief.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidDistribution("negative or NaN weight".into()));
        }
        if !normalize_log(&mut log_belief) {
            return Err(Error::InvalidDistribution("weights have zero total".into()));
        }
        Ok(Self::from_log(agent, time, log_belief))
    }

    pub fn log_belief(&self) -> &[f64] {
        &self.log_belief
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log_belief.iter().map(|v| v.exp()).collect()
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.log_belief[state].exp()
    }

    /// `ln mu(check) - ln mu(truth)`; `-inf` when `check` has no mass.
    pub fn log_ratio(&self, check_state: usize, true_state: usize) -> Result<f64> {
        log_ratio(&self.log_belief, check_state, true_state).ok_or(Error::ZeroTrueStateMass {
            agent: self.agent + 1,
            time: self.time,
        })
    }
}

/// `ln mu(check) - ln mu(truth)`, or `None` when the true state has no mass.
pub fn log_ratio(log_belief: &[f64], check_state: usize, true_state: usize) -> Option<f64> {
    let truth = log_belief[true_state];
    if truth == f64::NEG_INFINITY {
        return None;
    }
    Some(log_belief[check_state] - truth)
}

/// In-place log-sum-exp normalization. Returns false if the total mass is zero.
pub fn normalize_log(log_w: &mut [f64]) -> bool {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return false;
    }
    let sum: f64 = log_w.iter().map(|v| (v - max).exp()).sum();
    let lse = max + sum.ln();
    if lse.abs() > RENORM_TOL {
        log_w.iter_mut().for_each(|v| *v -= lse);
    }
    true
}

/// One Bayes step: `out ∝ prior · l(signal | .)`, written into `out`.
///
/// Returns `false` if the signal has zero probability under every state the
/// prior allows.
///
/// The log-likelihood column is shifted by its maximum before it is added, so a
/// signal that every state explains equally well leaves `prior` untouched.
pub fn bayes_step(
    prior_log: &[f64],
    table: &LikelihoodTable,
    signal: usize,
    out: &mut [f64],
) -> bool {
    let k = prior_log.len();
    let max_ll = (0..k)
        .map(|state| table.log_prob(signal, state))
        .fold(f64::NEG_INFINITY, f64::max);
    if max_ll == f64::NEG_INFINITY {
        return false;
    }
    for (state, (o, &p)) in out.iter_mut().zip(prior_log).enumerate() {
        *o = p + (table.log_prob(signal, state) - max_ll);
    }
    normalize_log(out)
}

fn check_signal(world: &WorldModel, agent: usize, signal: usize) -> Result<()> {
    world.check_agent(agent)?;
    let size = world.likelihood(agent).num_signals();
    if signal >= size {
        return Err(Error::IndexOutOfRange {
            what: "signal",
            index: signal,
            size,
        });
    }
    Ok(())
}

fn update_from(
    world: &WorldModel,
    prior_log: &[f64],
    agent: usize,
    time: usize,
    signal: usize,
) -> Result<BeliefState> {
    check_signal(world, agent, signal)?;
    if prior_log.len() != world.num_states() {
        return Err(Error::LengthMismatch {
            left: prior_log.len(),
            right: world.num_states(),
        });
    }
    let mut out = vec![0.0; prior_log.len()];
    if !bayes_step(prior_log, world.likelihood(agent), signal, &mut out) {
        return Err(Error::ImpossibleSignal {
            agent: agent + 1,
            signal,
        });
    }
    Ok(BeliefState::from_log(agent, time, out))
}

/// Initial opinion at `t = 0` from the common prior and the first signal.
pub fn initial_belief(world: &WorldModel, agent: usize, signal: usize) -> Result<BeliefState> {
    let prior_log: Vec<f64> = world.prior().as_slice().iter().map(|p| p.ln()).collect();
    update_from(world, &prior_log, agent, 0, signal)
}

/// Bayes update of an agent on its own previous belief (no neighbor, or self-selection).
pub fn self_update(world: &WorldModel, belief: &BeliefState, signal: usize) -> Result<BeliefState> {
    gossip_update(world, belief, belief.agent, signal)
}

/// `agent` adopts `neighbor_belief` as its prior and applies its own likelihood of `signal`.
pub fn gossip_update(
    world: &WorldModel,
    neighbor_belief: &BeliefState,
    agent: usize,
    signal: usize,
) -> Result<BeliefState> {
    update_from(
        world,
        &neighbor_belief.log_belief,
        agent,
        neighbor_belief.time + 1,
        signal,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::tests::example1_world;
    use crate::world::{LikelihoodTable, Prior, StateSpace};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn initial_belief_agent1() {
        let w = example1_world();
        let b = initial_belief(&w, 0, 0).unwrap();
        assert!(close(
            &b.probabilities(),
            &[5.0 / 13.0, 5.0 / 13.0, 3.0 / 13.0],
            1e-14
        ));
        assert_eq!(b.time, 0);
    }

    #[test]
    fn uninformative_initial_belief_is_prior() {
        let w = example1_world();
        let prior_log: Vec<f64> = w.prior().as_slice().iter().map(|p| p.ln()).collect();
        for s in 0..2 {
            let b = initial_belief(&w, 2, s).unwrap();
            assert_eq!(b.log_belief(), prior_log.as_slice());
        }
    }

    #[test]
    fn point_mass_from_point_likelihood() {
        let states = StateSpace::new(vec!["a".into(), "b".into(), "c".into()], 1).unwrap();
        let table =
            LikelihoodTable::new(vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let w = crate::world::WorldModel::new(states, Prior::uniform(3), vec![table]).unwrap();
        let b = initial_belief(&w, 0, 0).unwrap();
        assert_eq!(b.probabilities(), vec![0.0, 1.0, 0.0]);
        // point mass stays put under a signal the state can produce
        let b = self_update(&w, &b, 0).unwrap();
        assert_eq!(b.probabilities(), vec![0.0, 1.0, 0.0]);
        // a signal only the zero-mass states can produce is impossible
        assert!(matches!(
            self_update(&w, &b, 1),
            Err(Error::ImpossibleSignal {
                agent: 1,
                signal: 1
            })
        ));
    }

    #[test]
    fn self_update_agent2() {
        let w = example1_world();
        let uniform = BeliefState::from_weights(1, 0, &[1.0, 1.0, 1.0]).unwrap();
        let b = self_update(&w, &uniform, 0).unwrap();
        assert!(close(&b.probabilities(), &[0.3, 0.4, 0.3], 1e-14));
        assert_eq!(b.time, 1);
    }

    #[test]
    fn uninformative_self_update_is_identity() {
        let w = example1_world();
        let b = BeliefState::from_weights(2, 0, &[0.2, 0.5, 0.3]).unwrap();
        let mut cur = b.clone();
        for t in 0..50 {
            cur = self_update(&w, &cur, t % 2).unwrap();
        }
        assert_eq!(cur.log_belief(), b.log_belief());
    }

    #[test]
    fn gossip_update_agent1() {
        let w = example1_world();
        let nb = BeliefState::from_weights(4, 3, &[0.2, 0.5, 0.3]).unwrap();
        let b = gossip_update(&w, &nb, 0, 0).unwrap();
        assert!(close(
            &b.probabilities(),
            &[10.0 / 44.0, 25.0 / 44.0, 9.0 / 44.0],
            1e-14
        ));
        assert_eq!(b.agent, 0);
        assert_eq!(b.time, 4);
    }

    #[test]
    fn gossip_with_self_is_self_update() {
        let w = example1_world();
        let b = BeliefState::from_weights(1, 2, &[0.1, 0.6, 0.3]).unwrap();
        assert_eq!(
            gossip_update(&w, &b, 1, 1).unwrap(),
            self_update(&w, &b, 1).unwrap()
        );
    }

    #[test]
    fn log_ratio_examples() {
        let w = example1_world();
        let uniform = BeliefState::from_weights(0, 0, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(uniform.log_ratio(1, 0).unwrap(), 0.0);
        let b = initial_belief(&w, 0, 0).unwrap();
        assert!(b.log_ratio(1, 0).unwrap().abs() < 1e-15);
        assert!((b.log_ratio(2, 0).unwrap() - (0.6f64).ln()).abs() < 1e-14);

        let dead = BeliefState::from_log(0, 3, vec![f64::NEG_INFINITY, 0.0]);
        assert!(matches!(
            dead.log_ratio(1, 0),
            Err(Error::ZeroTrueStateMass { .. })
        ));
        assert_eq!(dead.log_ratio(0, 1).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn bad_signal_index() {
        let w = example1_world();
        assert!(matches!(
            initial_belief(&w, 0, 2),
            Err(Error::IndexOutOfRange { what: "signal", .. })
        ));
    }
}
