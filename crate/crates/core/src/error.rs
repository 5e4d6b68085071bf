use thiserror::Error;

/// Errors produced while building models, running the protocol, or analyzing traces.
///
/// Agent and state indices inside messages are 1-based, matching all user-facing I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("network must contain at least one agent")]
    EmptyNetwork,

    #[error("edge ({source_node}, {target}) has an endpoint outside 1..={n}")]
    EdgeOutOfRange {
        source_node: usize,
        target: usize,
        n: usize,
    },

    #[error("duplicate edge ({source_node}, {target})")]
    DuplicateEdge { source_node: usize, target: usize },

    #[error("selection matrix: {0}")]
    InvalidSelection(String),

    #[error("stationary distribution is not unique: chain has {} recurrent classes {}", .0.len(), format_classes(.0))]
    NonUniqueStationary(Vec<Vec<usize>>),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("world model: {0}")]
    InvalidWorld(String),

    #[error("index {index} out of range for {what} (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("signal {signal} is impossible for agent {agent} under every candidate state")]
    ImpossibleSignal { agent: usize, signal: usize },

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("true state has zero belief mass for agent {agent} at t={time}")]
    ZeroTrueStateMass { agent: usize, time: usize },

    #[error("no belief snapshot for agent {agent} at t={time}")]
    MissingSnapshot { agent: usize, time: usize },

    #[error(
        "walk identity mismatch for agent {agent} at t={time}: belief side {lhs}, walk side {rhs}"
    )]
    WalkMismatch {
        agent: usize,
        time: usize,
        lhs: f64,
        rhs: f64,
    },

    #[error("log-ratio is -inf at t={time} inside the rate window; shrink the window (the state has exactly zero mass)")]
    InfiniteLogRatio { time: usize },

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("trace data: {0}")]
    Trace(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

fn format_classes(classes: &[Vec<usize>]) -> String {
    let parts: Vec<String> = classes
        .iter()
        .map(|c| {
            let members: Vec<String> = c.iter().map(|i| (i + 1).to_string()).collect();
            format!("{{{}}}", members.join(","))
        })
        .collect();
    parts.join(" ")
}
