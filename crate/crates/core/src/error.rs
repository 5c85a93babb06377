use thiserror::Error;

use crate::overlay::{NodeId, Pair};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),

    #[error("duplicate edge {0}")]
    DuplicateEdge(Pair),

    #[error("pair {0} is not a potential neighbor pair")]
    NotPotential(Pair),

    #[error("node {node} exceeds its degree bound {bound} (degree {degree})")]
    DegreeBound {
        node: NodeId,
        degree: usize,
        bound: usize,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("instance too large to enumerate: {free} free pairs (limit {limit})")]
    InstanceTooLarge { free: usize, limit: usize },

    #[error("invalid capacity profile: {0}")]
    InvalidProfile(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("node {0} has no potential neighbors")]
    IsolatedNode(NodeId),

    #[error("node {u} is not an out-neighbor of {v} in the active configuration")]
    NotNeighbor { v: NodeId, u: NodeId },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("source and sink coincide ({0})")]
    SourceIsSink(NodeId),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("numerical failure in LP solver: {0}")]
    Numerical(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("support mismatch between distributions")]
    SupportMismatch,

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("coding error: {0}")]
    Codec(String),

    #[error("rate measurement failed: {0}")]
    Measurement(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
