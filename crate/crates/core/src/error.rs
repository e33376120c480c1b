use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dataset columns have different lengths (x: {x}, y: {y}, z: {z})")]
    LengthMismatch { x: usize, y: usize, z: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("non-finite value in column {column} at row {row}")]
    NonFinite { column: &'static str, row: usize },

    #[error("index {index} is out of bounds for a dataset of size {n}")]
    IndexOutOfBounds { index: usize, n: usize },

    #[error("index {0} appears in more than one pair")]
    DuplicateIndex(usize),

    #[error("pair ({0}, {0}) matches an index with itself")]
    SelfPair(usize),

    #[error("weight {index} is {value}; weights must be finite and non-negative")]
    InvalidWeight { index: usize, value: f64 },

    #[error("expected {expected} entries, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("swap entries must be +1 or -1, found {0}")]
    InvalidSign(i64),

    #[error("truncation constant must be positive and finite, got {0}")]
    InvalidTruncation(f64),

    #[error("kernel violates anti-monotonicity at x={x}, x'={x_prime}, delta={delta}, delta'={delta_prime}")]
    NotAntiMonotone {
        x: f64,
        x_prime: f64,
        delta: f64,
        delta_prime: f64,
    },

    #[error("unknown kernel `{0}` (expected linear, sign or trunc:<K>)")]
    UnknownKernel(String),

    #[error("unknown matching strategy `{0}` (expected neighbour, crossbin:<K>, crossbin:n^<p> or plugin)")]
    UnknownStrategy(String),

    #[error("need at least {required} observations, got {actual}")]
    TooFewObservations { required: usize, actual: usize },

    #[error("invalid bin count {bins} for {n} observations")]
    InvalidBinCount { bins: usize, n: usize },

    #[error("variance estimate must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("exact enumeration supports at most {cap} pairs, matching has {pairs}; use the Monte Carlo method")]
    ExactCapExceeded { pairs: usize, cap: usize },

    #[error("brute-force enumeration supports at most {cap} points, got {n}")]
    BruteForceTooLarge { n: usize, cap: usize },

    #[error("control values must be sorted in ascending order")]
    UnsortedControl,

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("the built-in moment estimator only supports the linear kernel")]
    UnsupportedKernel,

    #[error("value at position {index} is {value}; expected 0 or 1")]
    NonBinary { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model is not in the monotone conditional-independence null: {0}")]
    NotNullModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
