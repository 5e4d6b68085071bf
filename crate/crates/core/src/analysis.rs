//! Learning-rate estimates, backward-walk occupancy and belief-difference series.

use crate::error::{Error, Result};
use crate::graph::StationaryDistribution;
use crate::simulator::{backward_walk, walk_log_ratio, SimulationTrace};
use crate::world::WorldModel;

/// Fraction of the horizon discarded before fitting rates by default.
pub const DEFAULT_BURN_IN: f64 = 0.2;

/// Two-sided 95% normal quantile used for confidence half-widths.
const Z95: f64 = 1.959_963_984_540_054;

/// Asymptotic learning rate against `check_state`, in nats per round:
/// `sum_m pi_m * D_KL(l_m(.|truth) || l_m(.|check))`.
///
/// Agents with zero stationary weight contribute nothing, even if their
/// divergence is infinite.
pub fn theoretical_rate(
    pi: &StationaryDistribution,
    world: &WorldModel,
    check_state: usize,
) -> Result<f64> {
    world.check_state(check_state)?;
    let weights = pi.as_slice();
    if weights.len() != world.num_agents() {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: world.num_agents(),
        });
    }
    let truth = world.true_state();
    Ok(weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(m, &w)| w * world.divergence(m, truth, check_state))
        .sum())
}

/// `[ceil(0.2 T), T]`.
pub fn default_window(horizon: usize) -> (usize, usize) {
    ((horizon as f64 * DEFAULT_BURN_IN).ceil() as usize, horizon)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeEstimate {
    pub slope: f64,
    /// OLS standard error. Log-ratios are serially correlated, so this
    /// understates the spread across replications.
    pub stderr: f64,
    pub points: usize,
}

fn ols(points: &[(f64, f64)]) -> Result<SlopeEstimate> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InvalidWindow(format!(
            "need at least 3 points to fit a slope, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Ok(SlopeEstimate {
        slope,
        stderr: (ssr / (nf - 2.0) / sxx).sqrt(),
        points: n,
    })
}

fn check_window(trace: &SimulationTrace, window: (usize, usize)) -> Result<()> {
    let (t0, t1) = window;
    if t0 >= t1 {
        return Err(Error::InvalidWindow(format!("[{t0}, {t1}] is empty")));
    }
    if t1 > trace.horizon() {
        return Err(Error::InvalidWindow(format!(
            "window end {t1} exceeds horizon {}",
            trace.horizon()
        )));
    }
    Ok(())
}

/// Least-squares slope of the recorded log belief ratio against `t`, over the
/// snapshots inside `window`. Should approach `-theoretical_rate`.
pub fn empirical_rate(
    trace: &SimulationTrace,
    agent: usize,
    check_state: usize,
    window: (usize, usize),
) -> Result<SlopeEstimate> {
    check_window(trace, window)?;
    let mut points = Vec::new();
    for &t in trace
        .snapshot_times()
        .iter()
        .filter(|&&t| t >= window.0 && t <= window.1)
    {
        let r = trace.log_ratio(agent, t, check_state)?;
        if r == f64::NEG_INFINITY {
            return Err(Error::InfiniteLogRatio { time: t });
        }
        points.push((t as f64, r));
    }
    ols(&points)
}

/// Same fit, but on the walk-side decomposition of the log-ratio recomputed
/// from signals and selections at every round of the window.
pub fn walk_rate(
    trace: &SimulationTrace,
    world: &WorldModel,
    agent: usize,
    check_state: usize,
    window: (usize, usize),
) -> Result<SlopeEstimate> {
    check_window(trace, window)?;
    let mut points = Vec::with_capacity(window.1 - window.0 + 1);
    for t in window.0..=window.1 {
        let r = walk_log_ratio(trace, world, agent, t, check_state)?;
        if r == f64::NEG_INFINITY {
            return Err(Error::InfiniteLogRatio { time: t });
        }
        points.push((t as f64, r));
    }
    ols(&points)
}

/// Replication-averaged slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicatedRate {
    pub mean_slope: f64,
    /// Standard error of the mean across replications (0 for a single replication).
    pub stderr: f64,
    pub half_width: f64,
    pub replications: usize,
}

pub fn replicated_rate(
    traces: &[SimulationTrace],
    agent: usize,
    check_state: usize,
    window: (usize, usize),
) -> Result<ReplicatedRate> {
    if traces.is_empty() {
        return Err(Error::InvalidWindow("no replications to average".into()));
    }
    let slopes = traces
        .iter()
        .map(|tr| empirical_rate(tr, agent, check_state, window).map(|e| e.slope))
        .collect::<Result<Vec<_>>>()?;
    let r = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / r;
    let stderr = if slopes.len() > 1 {
        let var = slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (r - 1.0);
        (var / r).sqrt()
    } else {
        0.0
    };
    Ok(ReplicatedRate {
        mean_slope: mean,
        stderr,
        half_width: Z95 * stderr,
        replications: slopes.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRate {
    pub agent: usize,
    pub empirical: ReplicatedRate,
}

impl AgentRate {
    /// `|(-slope) - theoretical| / theoretical`; `None` when the theoretical rate is 0.
    pub fn relative_error(&self, theoretical: f64) -> Option<f64> {
        (theoretical > 0.0)
            .then(|| ((-self.empirical.mean_slope) - theoretical).abs() / theoretical)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckStateRates {
    pub check_state: usize,
    pub theoretical: f64,
    pub agents: Vec<AgentRate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub horizon: usize,
    pub replications: usize,
    pub window: (usize, usize),
    pub entries: Vec<CheckStateRates>,
}

impl RateReport {
    /// Every listed agent is within `tolerance` relative error of a positive theoretical rate.
    pub fn passes(&self, tolerance: f64) -> bool {
        self.entries.iter().all(|e| {
            e.agents.iter().all(|a| {
                a.relative_error(e.theoretical)
                    .is_some_and(|r| r <= tolerance)
            })
        })
    }
}

pub fn rate_report(
    traces: &[SimulationTrace],
    world: &WorldModel,
    pi: &StationaryDistribution,
    check_states: &[usize],
    agents: &[usize],
    window: (usize, usize),
) -> Result<RateReport> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidWindow("no replications to average".into()))?;
    let entries = check_states
        .iter()
        .map(|&check| {
            let theoretical = theoretical_rate(pi, world, check)?;
            let agents = agents
                .iter()
                .map(|&agent| {
                    Ok(AgentRate {
                        agent,
                        empirical: replicated_rate(traces, agent, check, window)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CheckStateRates {
                check_state: check,
                theoretical,
                agents,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateReport {
        horizon: first.horizon(),
        replications: traces.len(),
        window,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyReport {
    pub agent: usize,
    pub t: usize,
    /// Fraction of steps `tau in 1..=t` with `i_tau = m`.
    pub empirical: Vec<f64>,
    pub stationary: Option<Vec<f64>>,
}

impl OccupancyReport {
    pub fn max_deviation(&self) -> Option<f64> {
        self.stationary.as_ref().map(|pi| {
            self.empirical
                .iter()
                .zip(pi)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
    }
}

/// Occupancy of the backward walk from `(agent, t)`, counting `i_1..=i_t`.
pub fn occupancy(
    trace: &SimulationTrace,
    agent: usize,
    t: usize,
    pi: Option<&StationaryDistribution>,
) -> Result<OccupancyReport> {
    if t == 0 {
        return Err(Error::InvalidWindow("occupancy needs t >= 1".into()));
    }
    let walk = backward_walk(trace, agent, t)?;
    let mut counts = vec![0usize; trace.n()];
    for &m in &walk[1..] {
        counts[m] += 1;
    }
    Ok(OccupancyReport {
        agent,
        t,
        empirical: counts.iter().map(|&c| c as f64 / t as f64).collect(),
        stationary: pi.map(|p| p.as_slice().to_vec()),
    })
}

/// `|mu_{a,t}(state) - mu_{b,t}(state)|` at every snapshot time.
pub fn belief_difference(
    trace: &SimulationTrace,
    agent_a: usize,
    agent_b: usize,
    state: usize,
) -> Vec<(usize, f64)> {
    trace
        .snapshot_times()
        .iter()
        .map(|&t| {
            let a = trace.log_belief(t, agent_a).expect("snapshot time")[state].exp();
            let b = trace.log_belief(t, agent_b).expect("snapshot time")[state].exp();
            (t, (a - b).abs())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{stationary_distribution, DirectedNetwork, SelectionMatrix};
    use crate::simulator::{run, SimulationConfig};
    use crate::world::tests::example1_world;
    use crate::world::{LikelihoodTable, Prior, StateSpace};

    #[test]
    fn ols_recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|t| (t as f64, 3.0 - 0.5 * t as f64)).collect();
        let e = ols(&pts).unwrap();
        assert!((e.slope + 0.5).abs() < 1e-14);
        assert!(e.stderr < 1e-12);
        assert!(ols(&pts[..2]).is_err());
    }

    #[test]
    fn default_window_burn_in() {
        assert_eq!(default_window(5000), (1000, 5000));
        assert_eq!(default_window(7), (2, 7));
    }

    #[test]
    fn uninformative_world_has_zero_rate() {
        let net = DirectedNetwork::from_one_based(2, &[(1, 2), (2, 1)]).unwrap();
        let p = SelectionMatrix::uniform(&net);
        let pi = stationary_distribution(&p).unwrap();
        let states = StateSpace::new(vec!["a".into(), "b".into()], 0).unwrap();
        let table = LikelihoodTable::new(vec![vec![0.3, 0.7]; 2]).unwrap();
        let w =
            WorldModel::new(states, Prior::new(vec![0.6, 0.4]).unwrap(), vec![table; 2]).unwrap();
        assert_eq!(theoretical_rate(&pi, &w, 1).unwrap(), 0.0);

        let trace = run(&net, &p, &w, &SimulationConfig::new(200, 1)).unwrap();
        let e = empirical_rate(&trace, 0, 1, (40, 200)).unwrap();
        assert!(e.slope.abs() < 1e-12);
        let expected = 0.4f64.ln() - 0.6f64.ln();
        assert!((trace.log_ratio(1, 200, 1).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn infinite_log_ratio_in_window_is_an_error() {
        let net = DirectedNetwork::from_edge_list(1, &[]).unwrap();
        let states = StateSpace::new(vec!["a".into(), "b".into()], 0).unwrap();
        let table = LikelihoodTable::new(vec![vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        let w = WorldModel::new(states, Prior::uniform(2), vec![table]).unwrap();
        let trace = run(
            &net,
            &SelectionMatrix::uniform(&net),
            &w,
            &SimulationConfig::new(100, 3),
        )
        .unwrap();
        assert!(matches!(
            empirical_rate(&trace, 0, 1, (20, 100)),
            Err(Error::InfiniteLogRatio { .. })
        ));
    }

    #[test]
    fn window_validation() {
        let net = DirectedNetwork::from_edge_list(1, &[]).unwrap();
        let states = StateSpace::new(vec!["a".into(), "b".into()], 0).unwrap();
        let table = LikelihoodTable::new(vec![vec![0.5, 0.5], vec![0.4, 0.6]]).unwrap();
        let w = WorldModel::new(states, Prior::uniform(2), vec![table]).unwrap();
        let trace = run(
            &net,
            &SelectionMatrix::uniform(&net),
            &w,
            &SimulationConfig::new(10, 3),
        )
        .unwrap();
        assert!(empirical_rate(&trace, 0, 1, (5, 5)).is_err());
        assert!(empirical_rate(&trace, 0, 1, (5, 11)).is_err());
    }

    #[test]
    fn example1_theoretical_rates() {
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
        let pi = stationary_distribution(&SelectionMatrix::uniform(&net)).unwrap();
        let w = example1_world();
        assert!((theoretical_rate(&pi, &w, 1).unwrap() - 0.019_630_505_942_730_58).abs() < 1e-15);
        assert!((theoretical_rate(&pi, &w, 2).unwrap() - 0.008_121_250_565_448_97).abs() < 1e-15);
    }

    #[test]
    fn occupancy_on_self_loop_and_two_cycle() {
        let net = DirectedNetwork::from_edge_list(1, &[]).unwrap();
        let states = StateSpace::new(vec!["a".into(), "b".into()], 0).unwrap();
        let table = LikelihoodTable::new(vec![vec![0.5, 0.5], vec![0.4, 0.6]]).unwrap();
        let w = WorldModel::new(states, Prior::uniform(2), vec![table.clone()]).unwrap();
        let trace = run(
            &net,
            &SelectionMatrix::uniform(&net),
            &w,
            &SimulationConfig::new(10, 3),
        )
        .unwrap();
        assert_eq!(occupancy(&trace, 0, 10, None).unwrap().empirical, vec![1.0]);

        let net = DirectedNetwork::from_one_based(2, &[(1, 2), (2, 1)]).unwrap();
        let p = SelectionMatrix::uniform(&net);
        let pi = stationary_distribution(&p).unwrap();
        let states = StateSpace::new(vec!["a".into(), "b".into()], 0).unwrap();
        let w = WorldModel::new(states, Prior::uniform(2), vec![table; 2]).unwrap();
        let trace = run(&net, &p, &w, &SimulationConfig::new(101, 3)).unwrap();
        let occ = occupancy(&trace, 0, 101, Some(&pi)).unwrap();
        assert!((occ.empirical[1] - 51.0 / 101.0).abs() < 1e-15);
        assert!(occ.max_deviation().unwrap() < 0.01);
        assert!(occupancy(&trace, 0, 0, None).is_err());
    }

    #[test]
    fn identical_agents_same_signals_have_zero_difference() {
        let net = DirectedNetwork::from_one_based(2, &[(1, 2), (2, 1)]).unwrap();
        let states = StateSpace::new(vec!["a".into(), "b".into()], 0).unwrap();
        let table = LikelihoodTable::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        let w = WorldModel::new(states, Prior::uniform(2), vec![table; 2]).unwrap();
        let trace = run(
            &net,
            &SelectionMatrix::uniform(&net),
            &w,
            &SimulationConfig::new(30, 3),
        )
        .unwrap();
        assert!(belief_difference(&trace, 0, 1, 0)
            .iter()
            .all(|&(_, d)| d == 0.0));
    }
}
