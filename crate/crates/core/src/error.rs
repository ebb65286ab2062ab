use thiserror::Error;

/// Errors raised by the simulation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice size: {0}")]
    InvalidSize(String),

    #[error("invalid edge ({0}, {1}): {2}")]
    InvalidEdge(usize, usize, String),

    #[error("lattice graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("basis label {label} out of range (size {size})")]
    LabelOutOfRange { label: String, size: usize },

    #[error("basis mismatch: dimension {left} vs {right}")]
    BasisMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("matrix dimension {dim} exceeds dense cap {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("bond {bond} has both couplings zero; its dark state is undefined")]
    DegenerateDarkState { bond: usize },

    #[error("spectrum has no nonzero eigenvalue; gap undefined")]
    NoGap,

    #[error("dark manifold requires the lossless (Hermitian) model")]
    NotHermitian,

    #[error("time {t} outside protocol domain [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },

    #[error("nodes {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("integration accuracy: {0}")]
    IntegrationAccuracy(String),

    #[error("fidelity undefined for a zero-norm state")]
    UndefinedFidelity,

    #[error("optimizer: {0}")]
    Optimizer(String),
}

pub type Result<T> = std::result::Result<T, Error>;
