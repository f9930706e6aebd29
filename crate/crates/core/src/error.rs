use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("label {0} is not part of the operator support")]
    UnknownLabel(usize),

    #[error("label {0} appears more than once in a support")]
    DuplicateLabel(usize),

    #[error("subsystem {label} has dimension {found}, expected {expected}")]
    DimensionConflict { label: usize, expected: usize, found: usize },

    #[error("matrix is {rows}x{cols} but the support spans dimension {expected}")]
    ShapeMismatch { rows: usize, cols: usize, expected: usize },

    #[error("operands are supported on different subsystems")]
    SupportMismatch,

    #[error("operator is not normal (residual {residual:.3e})")]
    NonNormal { residual: f64 },

    #[error("operator is not positive (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("operator is singular (largest eigenvalue {largest:.3e})")]
    Singular { largest: f64 },

    #[error("LAPACK routine {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error("dense dimension {dim} exceeds the cap {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("edge operators do not commute (max commutator {max_norm:.3e})")]
    NonCommutingEdges { max_norm: f64 },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("message update {from}->{to} failed: {source}")]
    Message {
        from: usize,
        to: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("belief on edge ({u}, {v}) failed: {source}")]
    Belief {
        u: usize,
        v: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid tripartition: {0}")]
    InvalidTripartition(String),

    #[error("not enough history: {0}")]
    InsufficientHistory(String),

    #[error("numerical integration did not converge (last change {last_change:.3e})")]
    Quadrature { last_change: f64 },

    #[error("fixed-point iteration did not converge after {rounds} rounds (delta {delta:.3e})")]
    FixedPoint { rounds: usize, delta: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn in_message(self, from: usize, to: usize) -> Self {
        Error::Message { from, to, source: Box::new(self) }
    }

    pub(crate) fn in_belief(self, u: usize, v: usize) -> Self {
        Error::Belief { u, v, source: Box::new(self) }
    }
}
