//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("polynomial {0} is reducible over GF({1})")]
    ReduciblePolynomial(String, u64),

    #[error("irreducible polynomial has degree {got}, field extension needs degree {want}")]
    DegreeMismatch { want: usize, got: usize },

    #[error("{0} is not a prime power")]
    NotPrimePower(u64),

    #[error("field order {0} exceeds the supported maximum 65536")]
    FieldTooLarge(u64),

    #[error("field element {0} outside 0..{1}")]
    ElementOutOfRange(u64, u64),

    #[error("erasure rate {0} outside [0, 1]")]
    EpsilonOutOfRange(f64),

    #[error("power exponent must be >= 1")]
    BadPowerExponent,

    #[error("matrix is singular, kernel rows must be invertible")]
    SingularKernel,

    #[error("matrix rows have unequal lengths")]
    RaggedRows,

    #[error("kernel size {0} exceeds the subset-enumeration limit {1}")]
    EllTooLarge(usize, usize),

    #[error("kernel size must be at least 2, got {0}")]
    EllTooSmall(usize),

    #[error("channel field GF({0}) does not match kernel field GF({1})")]
    FieldMismatch(u64, u64),

    #[error("tree would need {need} nodes, budget is {budget}")]
    BudgetExceeded { need: u64, budget: u64 },

    #[error("node {0} is not a leaf of this tree")]
    NotALeaf(usize),

    #[error("node {0} does not belong to this tree")]
    UnknownNode(usize),

    #[error("depth schedule is empty")]
    EmptySchedule,

    #[error("graft stock and error kernels must share one length, got {0} and {1}")]
    GraftLengthMismatch(usize, usize),

    #[error("graft error kernel field GF({got}) is not the degree-{k} extension GF({want})")]
    GraftFieldMismatch { want: u64, got: u64, k: u32 },

    #[error("rated depth {n_rat} does not fit total depth {n}")]
    RatedDepthOutOfRange { n_rat: i64, n: i64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no admissible constant found: {0}")]
    NoAdmissibleConstant(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("simulation needs at least one trial")]
    NoTrials,
}

pub type Result<T> = std::result::Result<T, CoreError>;
