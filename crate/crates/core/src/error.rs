use alloc::vec::Vec;

/// Errors produced anywhere in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Error {
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("self-edge at node {0}")]
    SelfEdge(usize),
    #[error("edge endpoint {node} out of range for {node_count} nodes")]
    NodeOutOfRange { node: usize, node_count: usize },
    #[error("duplicate zealot id {0}")]
    DuplicateZealot(usize),
    #[error("zealot {node} has non-finite opinion {opinion}")]
    NonFiniteOpinion { node: usize, opinion: f64 },
    #[error("path graph needs at least one persuadable node")]
    EmptyPath,
    #[error("clique size {0} is invalid: need an even size of at least 2")]
    InvalidCliqueSize(usize),
    #[error("balanced exposure is defined for two zealots, found {0}")]
    ZealotCount(usize),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("state has length {found}, graph has {expected} nodes")]
    StateLength { expected: usize, found: usize },
    #[error("state entry {0} is not finite")]
    NonFiniteState(usize),
    #[error("zealot {node} is not pinned to its opinion")]
    ZealotNotPinned { node: usize },
    #[error("invalid model parameters: gamma = {gamma}, delta = {delta}")]
    InvalidParams { gamma: f64, delta: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("integration failed at t = {time}: step size underflow")]
    IntegrationFailure { time: f64, last_state: Vec<f64> },
    #[error("node {0} has zero strength; the strength matrix cannot be inverted")]
    ZeroStrength(usize),
    #[error("eigensolver failed to converge")]
    EigenFailure,
    #[error("persuadable component containing node {0} has no zealot; harmonic state undefined")]
    ZealotFreeComponent(usize),
    #[error("Jacobian is numerically singular (condition estimate {condition:e})")]
    SingularJacobian { condition: f64 },
    #[error("steady-state solver did not converge; best residual {residual:e}")]
    NonConvergence { residual: f64, best: Vec<f64> },
    #[error("reduction is inconsistent: within-class velocity spread {0:e}")]
    InconsistentReduction(f64),
    #[error("hypothesis violated: {0}")]
    Hypothesis(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
