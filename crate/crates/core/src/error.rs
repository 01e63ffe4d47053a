use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("label row {row} sums to {sum} (must be 1 within tolerance)")]
    NonStochasticLabel { row: usize, sum: f64 },

    #[error("non-finite value in {0}")]
    NonFiniteValue(String),

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("operation requires hard (one-hot) labels")]
    SoftLabels,

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("feature dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sinkhorn did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("numerical underflow in scaling-domain sinkhorn (use log_domain)")]
    NumericalUnderflow,

    #[error("transport problem has {cells} cells, exceeding the cap of {cap}")]
    ProblemTooLarge { cells: usize, cap: usize },

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("coupling row {0} has near-zero mass; cannot normalize")]
    DegenerateRow(usize),

    #[error("k = {k} exceeds the labeled set size {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("{name} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("maps must share a source dataset: {0}")]
    SourceMismatch(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
