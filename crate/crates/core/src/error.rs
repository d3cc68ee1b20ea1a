use crate::mission::{EdgeKey, NodeId};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("edge ({0}, {1}) references a missing node")]
    DanglingEdge(NodeId, NodeId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),
    #[error("graph contains a directed cycle")]
    Cycle,
    #[error("task {0} has no coalition function")]
    MissingCoalition(NodeId),
    #[error("edge ({}, {}) has no influence function", .0.0, .0.1)]
    MissingInfluence(EdgeKey),
    #[error("task {0} has no aggregation entry")]
    MissingAggregation(NodeId),
    #[error("task {0} has no combination entry")]
    MissingCombination(NodeId),
    #[error("no coalition fraction given for task {0}")]
    MissingFraction(NodeId),
    #[error("reward evaluation produced a non-finite value at task {0}")]
    NonFinite(NodeId),
    #[error("fleet size must be at least 1")]
    EmptyFleet,
    #[error("task {0} is not in progress")]
    NotInProgress(NodeId),
    #[error("{what} exceeds oracle guard: {actual} > {limit}")]
    SizeGuard {
        what: &'static str,
        limit: usize,
        actual: usize,
    },
    #[error("integer flow decomposition failed at node {0}")]
    Decomposition(NodeId),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("mission file is invalid: {0}")]
    InvalidMission(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
