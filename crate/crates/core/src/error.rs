use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("vector norm is zero (below 1e-300)")]
    ZeroVector,
    #[error("non-finite entry in input")]
    NonFinite,
    #[error("column {column} is not unit-norm (norm {norm})")]
    NotUnitNorm { column: usize, norm: f64 },
    #[error("at least two codewords are required, got {0}")]
    TooFewCodewords(usize),
    #[error("codewords {0} and {1} coincide")]
    CoincidentCodewords(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("RIP order {k} requires k < 1/mu (mu = {mu})")]
    OrderTooLarge { k: usize, mu: f64 },
    #[error("only {available} candidates remain after exclusion, {requested} requested")]
    InsufficientCandidates { requested: usize, available: usize },
    #[error("neighbor lists have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("codeword is closer than 1e-12 to rotation {rotation} of codeword {other}")]
    CoincidentRotation { other: usize, rotation: usize },
    #[error("aggregate force vanished")]
    DegenerateForce,
    #[error("empty neighborhood")]
    EmptyNeighborhood,
    #[error("seed code has codewords {0} and {1} coinciding up to rotation")]
    DegenerateSeed(usize, usize),
    #[error("force exponent must be an even integer >= 2, got {0}")]
    InvalidExponent(u32),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}
