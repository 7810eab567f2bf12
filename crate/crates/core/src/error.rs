use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate SO(3) projection: singular values {0:?}")]
    DegenerateProjection([f64; 3]),

    #[error("edge references marker {0} which is not in the object model")]
    UnknownMarker(usize),

    #[error("unknown camera {0}")]
    UnknownCamera(usize),

    #[error("anchor camera {0} is not part of the graph")]
    UnknownAnchor(usize),

    #[error("{kind} node {index} has zero degree")]
    DisconnectedNode { kind: &'static str, index: usize },

    #[error("dual block for time index {0} is singular or ill-conditioned")]
    SingularDualBlock(usize),

    #[error("graph is empty")]
    EmptyGraph,

    #[error("duplicate edge (cam {cam}, marker {marker}, time {time})")]
    DuplicateEdge {
        cam: usize,
        marker: usize,
        time: usize,
    },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("problem too large for the exact oracle: {nodes} nodes (limit {limit})")]
    SizeGuard { nodes: usize, limit: usize },

    #[error("rig markers unreachable from the reference marker: {0:?}")]
    DisconnectedRig(Vec<usize>),

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("bad config (line {line}, field `{field}`): {msg}")]
    BadConfig {
        line: usize,
        field: String,
        msg: String,
    },

    #[error("id mismatch: {0}")]
    IdMismatch(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
