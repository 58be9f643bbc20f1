//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures raised while building, transforming or measuring copulas.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CopulaError {
    #[error("negative cell mass {mass} at flat index {index}")]
    NegativeMass { index: u64, mass: f64 },
    #[error("axis {axis} slab {slab} has mass {mass}, expected {expected}")]
    MarginViolation {
        axis: usize,
        slab: usize,
        mass: f64,
        expected: f64,
    },
    #[error("total mass {0} differs from 1")]
    TotalMassViolation(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("tensor shape does not match resolutions: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("lower corner exceeds upper corner on axis {0}")]
    InvertedBox(usize),
    #[error("bad index set: {0}")]
    BadIndexSet(String),
    #[error("bad axis {0}")]
    BadAxis(usize),
    #[error("bad dimension: {0}")]
    BadDimension(String),
    #[error("bad index: {0}")]
    BadIndex(String),
    #[error("invalid weights: {0}")]
    WeightError(String),
    #[error("refined grid needs {cells} cells, above the limit {limit}")]
    ResolutionOverflow { cells: u128, limit: u128 },
    #[error("ties detected in coordinate {0}")]
    TiesDetected(usize),
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("invalid shuffle: {0}")]
    InvalidShuffle(String),
    #[error("invalid perturbation function: {0}")]
    InvalidPerturbation(String),
    #[error("input is not a copula: box mass {0}")]
    NonCopulaInput(f64),
    #[error("conditioning slab has zero mass")]
    ZeroMassSlab,
    #[error("flat conditional margin overlaps positive joint mass")]
    DegenerateMargins,
    #[error("kernel evaluator unavailable for {0}")]
    KernelUnavailable(String),
    #[error("closed-form conditional family unavailable")]
    ClosedFormUnavailable,
    #[error("support violation: first operand has mass on a null cell of the second")]
    SupportViolation,
    #[error("metric chain violated: {0}")]
    ChainViolation(String),
    #[error("conditioning cell has mass under the vine marginal but none under the input")]
    UndefinedConditional,
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, CopulaError>;
