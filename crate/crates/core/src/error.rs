use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown node id {0}")]
    UnknownNode(usize),
    #[error("edge {src}->{dst} violates layering: {reason}")]
    Layering {
        src: usize,
        dst: usize,
        reason: &'static str,
    },
    #[error("node {node} has non-positive weight {weight}")]
    NonPositiveWeight { node: usize, weight: f64 },
    #[error("node {node} has in-degree {in_degree} and out-degree {out_degree}: {reason}")]
    Connectivity {
        node: usize,
        in_degree: usize,
        out_degree: usize,
        reason: &'static str,
    },
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("negative value {value} at index {index} ({what})")]
    Negative {
        what: &'static str,
        index: usize,
        value: f64,
    },
    #[error("node {0} is not an output node")]
    NotAnOutput(usize),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("weights are not uniform within layer {0}")]
    NotLayerUniform(usize),
    #[error("SDA invariant breach: {0}")]
    InvariantBreach(String),
    #[error("malformed data: {0}")]
    Malformed(String),
}
