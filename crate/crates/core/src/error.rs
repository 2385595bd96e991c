use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
///
/// Variants are grouped by how the command-line runner reports them: malformed
/// input, infeasible parameters and numerical failures map to distinct exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("map is not completely positive at g = {g} (min Choi eigenvalue {min_eigenvalue:.3e})")]
    NotCompletelyPositive { g: f64, min_eigenvalue: f64 },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("site {0:?} is outside the lattice")]
    SiteOutOfRange(Vec<usize>),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("too many layers: {layers} (limit {limit}); the interaction set is not local")]
    TooManyLayers { layers: usize, limit: usize },

    #[error("firing probability {p} exceeds 1 for {what}; increase the number of steps")]
    ProbabilityOverflow { what: String, p: f64 },

    #[error("block size {block} does not divide step count {steps}")]
    BlockMisaligned { block: usize, steps: usize },

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("cluster of {qubits} qubits exceeds the contraction cap of {cap}")]
    ContractionCap { qubits: usize, cap: usize },

    #[error("retry budget exhausted after {attempts} attempts for sample {sample}")]
    RetryBudgetExhausted { sample: u64, attempts: u64 },

    #[error("insufficient trials: {0}")]
    InsufficientTrials(String),

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, SimError>;
