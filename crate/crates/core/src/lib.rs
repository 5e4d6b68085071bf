//! Simulation and analysis of gossip-without-recall learning.
//!
//! Agents on a directed network hold beliefs over a finite set of world
//! states. Each round every agent picks one neighbor at random, takes that
//! neighbor's previous belief as its prior and applies Bayes' rule with its
//! own fresh private signal. Unrolling the selections backward in time gives a
//! random walk on the network; the belief log-ratio of an agent is exactly the
//! sum of signal log-likelihood ratios collected along that walk, which is why
//! every agent learns at the rate `sum_m pi_m D_KL(l_m(.|truth) || l_m(.|other))`.
//!
//! - [`graph`]: networks, selection matrices, recurrent classes, stationary distributions
//! - [`world`]: state space, prior, likelihood tables, KL divergence, identifiability
//! - [`belief`]: log-space beliefs and the update rules
//! - [`simulator`]: seeded runs, traces, backward walks and the walk identity
//! - [`analysis`]: theoretical and empirical rates, occupancy, belief differences
//! - [`config`], [`export`], [`cli`]: JSON configs, CSV/manifest files, the `gossip` binary

pub mod analysis;
pub mod belief;
pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod graph;
pub mod simulator;
pub mod world;

pub use error::{Error, Result};
