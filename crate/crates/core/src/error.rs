use thiserror::Error;

use crate::schemes::{FailoverMatrix, FlowId};
use crate::topology::NodeId;

/// Errors produced by the failover laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("network size {n} is too small (need at least {min} nodes)")]
    InvalidSize { n: usize, min: usize },

    #[error("invalid link ({a}, {b}) for a clique of {n} nodes")]
    InvalidLink { a: usize, b: usize, n: usize },

    #[error("duplicate link ({a}, {b}) in failure scenario")]
    DuplicateLink { a: usize, b: usize },

    #[error("scenario is for n={scenario} but the topology has n={topology}")]
    SizeMismatch { scenario: usize, topology: usize },

    #[error("source and destination must differ (both are {0})")]
    SameEndpoints(NodeId),

    #[error("node {node} is out of range for n={n}")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("no failover row for flow {0}")]
    MissingRow(FlowId),

    #[error("destination {dst} is not supported for this scheme with n={n} (expected {expected})")]
    UnsupportedDestination {
        dst: NodeId,
        n: usize,
        expected: NodeId,
    },

    #[error("node {0} has no usable next hop (all incident links failed)")]
    NoNextHop(NodeId),

    #[error("failure budget {phi} exceeds the maximum {max}")]
    BudgetTooLarge { phi: usize, max: usize },

    #[error("pattern mismatch: {0}")]
    PatternMismatch(String),

    #[error("no acceptable matrix after {redraws} redraws (best max load {best_load})")]
    Exhausted {
        redraws: usize,
        best_load: usize,
        best: Box<FailoverMatrix>,
    },

    #[error("search space of {required} scenarios exceeds the cap of {cap}")]
    SearchTooLarge { required: u128, cap: u128 },

    #[error("adversarial construction failed: {0}")]
    ConstructionFailed(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input")]
    EmptyInput,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}
